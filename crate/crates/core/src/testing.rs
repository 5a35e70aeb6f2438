//! Seeded generators for randomized differential tests: small random
//! knowledge bases, evidence picks, and individual renamings.

use std::collections::BTreeMap;

use rand::Rng;

use crate::ground::{ground, GroundNetwork, NodeId};
use crate::infer::Evidence;
use crate::model::{
    ident, CptTemplate, Identifier, KnowledgeBase, ParentRef, Prior, QuantifierKind,
    QuantifierRef, Schema, SchemaAtom, TypeDecl,
};

/// Reads `SCHEMANET_SEED` (decimal u64) or falls back to the default.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var("SCHEMANET_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_schemata: usize,
    pub max_individuals: usize,
    pub max_nodes: usize,
    /// Restrict parameterized schemata to right-multiple form and skip
    /// quantifiers, so new individuals only add barren leaves.
    pub right_multiple_only: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_schemata: 6,
            max_individuals: 4,
            max_nodes: 20,
            right_multiple_only: false,
        }
    }
}

fn random_cpt(rng: &mut impl Rng, parent_count: usize) -> CptTemplate {
    let mut rows = BTreeMap::new();
    for mask in 0..1usize << parent_count {
        let key: Vec<bool> = (0..parent_count).map(|i| mask >> i & 1 == 1).collect();
        rows.insert(key, rng.gen_range(0.05..0.95));
    }
    CptTemplate { rows }
}

/// Generates a random knowledge base that validates cleanly and grounds into
/// at most `max_nodes` nodes. Layered child predicates keep it acyclic.
pub fn random_kb(rng: &mut impl Rng, cfg: &GenConfig) -> (KnowledgeBase, GroundNetwork) {
    loop {
        let kb = random_kb_once(rng, cfg);
        let diags = crate::model::validate_kb(&kb);
        debug_assert!(diags.is_empty(), "generator produced invalid kb: {diags:?}");
        match ground(&kb) {
            Ok(net) if net.node_count() <= cfg.max_nodes && net.node_count() >= 2 => {
                return (kb, net);
            }
            _ => continue,
        }
    }
}

fn random_kb_once(rng: &mut impl Rng, cfg: &GenConfig) -> KnowledgeBase {
    let n_individuals = rng.gen_range(1..=cfg.max_individuals);
    let individuals: Vec<Identifier> =
        (0..n_individuals).map(|i| ident(&format!("c{i}"))).collect();
    // split individuals between one type and the extras
    let type_size = rng.gen_range(0..=n_individuals);
    let type_decl = TypeDecl {
        name: ident("grp"),
        members: individuals[..type_size].to_vec(),
    };
    let extras = individuals[type_size..].iter().cloned().collect();

    let n_schemata = rng.gen_range(1..=cfg.max_schemata);
    // predicate r{i} is a root, s{i} a schema child; children may only depend
    // on strictly earlier layers
    let mut roots: Vec<(SchemaAtom, bool)> = Vec::new(); // (atom, parameterized)
    let n_roots = rng.gen_range(1..=2usize);
    let mut priors = Vec::new();
    for i in 0..n_roots {
        let parameterized = rng.gen_bool(0.5);
        let atom = if parameterized {
            SchemaAtom::new(ident(&format!("r{i}")), vec![ident("X")])
        } else {
            SchemaAtom::new(ident(&format!("r{i}")), vec![])
        };
        priors.push(Prior { atom: atom.clone(), p_true: rng.gen_range(0.05..0.95) });
        roots.push((atom, parameterized));
    }

    // earlier layers available as parents: (template atom, parameterized)
    let mut available: Vec<(SchemaAtom, bool)> = roots.clone();
    let mut schemata = Vec::new();
    let mut used_quantifier_over: Vec<(Identifier, usize)> = Vec::new();
    for i in 0..n_schemata {
        let child_param = if cfg.right_multiple_only {
            rng.gen_bool(0.6)
        } else {
            rng.gen_bool(0.5)
        };
        let child = if child_param {
            SchemaAtom::new(ident(&format!("s{i}")), vec![ident("X")])
        } else {
            SchemaAtom::new(ident(&format!("s{i}")), vec![])
        };

        let quantified = !cfg.right_multiple_only
            && !child_param
            && type_size > 0
            && rng.gen_bool(0.3);
        if quantified {
            // pick a parameterized body from earlier layers
            let bodies: Vec<&(SchemaAtom, bool)> = available
                .iter()
                .filter(|(a, p)| {
                    *p && !used_quantifier_over
                        .contains(&(a.predicate.clone(), a.arity()))
                })
                .collect();
            if let Some((body, _)) = bodies.first().map(|b| (*b).clone()) {
                let kind = if rng.gen_bool(0.5) {
                    QuantifierKind::Exists
                } else {
                    QuantifierKind::Forall
                };
                used_quantifier_over.push((body.predicate.clone(), body.arity()));
                schemata.push(Schema {
                    parents: vec![ParentRef::Quantifier(QuantifierRef {
                        kind,
                        bound: ident("X"),
                        type_name: ident("grp"),
                        body: body.clone(),
                    })],
                    child: child.clone(),
                    cpt: random_cpt(rng, 1),
                });
                available.push((child, false));
                continue;
            }
        }

        // plain schema: 1..=2 parents from earlier layers; in right-multiple
        // mode, a parameterized child takes only nullary parents
        let candidates: Vec<SchemaAtom> = available
            .iter()
            .filter(|(_, parameterized)| {
                if child_param {
                    // in right-multiple mode the child's parameter must not
                    // occur in any parent
                    !cfg.right_multiple_only || !parameterized
                } else {
                    // nullary child must not take parameterized parents
                    !parameterized
                }
            })
            .map(|(a, _)| a.clone())
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let n_parents = rng.gen_range(1..=2.min(candidates.len()));
        let mut parents = Vec::new();
        for _ in 0..n_parents {
            let pick = candidates[rng.gen_range(0..candidates.len())].clone();
            if !parents.contains(&pick) {
                parents.push(pick);
            }
        }
        schemata.push(Schema {
            parents: parents.iter().cloned().map(ParentRef::Atom).collect(),
            child: child.clone(),
            cpt: random_cpt(rng, parents.len()),
        });
        available.push((child, child_param));
    }

    KnowledgeBase { types: vec![type_decl], schemata, priors, extra_individuals: extras }
}

/// Picks random evidence over up to `max` chance nodes.
pub fn random_evidence(rng: &mut impl Rng, net: &GroundNetwork, max: usize) -> Evidence {
    let mut ev = Evidence::new();
    let n = net.node_count();
    for _ in 0..rng.gen_range(0..=max) {
        let i = rng.gen_range(0..n);
        ev.insert(net.node(i).clone(), rng.gen_bool(0.5));
    }
    ev
}

/// Bijectively renames the individuals `c{i}` to `z{i}` throughout a
/// generated knowledge base.
pub fn rename_individuals(kb: &KnowledgeBase) -> (KnowledgeBase, BTreeMap<Identifier, Identifier>) {
    let pool = kb.individual_pool();
    let mapping: BTreeMap<Identifier, Identifier> = pool
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), ident(&format!("z{}", pool.len() - 1 - i))))
        .collect();
    let mut out = kb.clone();
    for t in &mut out.types {
        t.members = t.members.iter().map(|m| mapping[m].clone()).collect();
    }
    out.extra_individuals = out
        .extra_individuals
        .iter()
        .map(|m| mapping[m].clone())
        .collect();
    (out, mapping)
}

/// Applies an individual renaming to a node name.
pub fn rename_node(node: &NodeId, mapping: &BTreeMap<Identifier, Identifier>) -> NodeId {
    let rename = |id: &Identifier| mapping.get(id).cloned().unwrap_or_else(|| id.clone());
    match node {
        NodeId::Atom(a) => NodeId::Atom(crate::model::GroundAtom::new(
            a.predicate.clone(),
            a.args.iter().map(rename).collect(),
        )),
        NodeId::Quantifier(q) => {
            let mut q = q.clone();
            q.fixed_args = q
                .fixed_args
                .iter()
                .map(|a| a.as_ref().map(rename))
                .collect();
            NodeId::Quantifier(q)
        }
    }
}

/// Canonical structural signature of a network: per node name, its kind tag,
/// sorted parent names, and the CPT reindexed to sorted-parent order.
pub fn signature(
    net: &GroundNetwork,
    map: impl Fn(&NodeId) -> NodeId,
) -> BTreeMap<String, (String, Vec<String>, Vec<u64>)> {
    let mut out = BTreeMap::new();
    for i in 0..net.node_count() {
        let name = map(net.node(i)).to_string();
        let kind = format!("{:?}", net.kind(i));
        let parents = net.parents_of(i);
        let mut named: Vec<(String, usize)> = parents
            .iter()
            .enumerate()
            .map(|(pos, &p)| (map(net.node(p)).to_string(), pos))
            .collect();
        named.sort();
        let cpt = net.cpt(i);
        let mut reordered = Vec::with_capacity(cpt.len());
        for mask in 0..cpt.len() {
            // mask over sorted parents -> mask over original positions
            let mut orig = 0usize;
            for (j, (_, pos)) in named.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    orig |= 1 << pos;
                }
            }
            reordered.push(cpt[orig].to_bits());
        }
        out.insert(name, (kind, named.into_iter().map(|(n, _)| n).collect(), reordered));
    }
    out
}
