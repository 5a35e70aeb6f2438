//! Grounds a knowledge base into a Bayesian network: enumerates substitutions
//! of individuals into schema parameters, expands existential/universal
//! combinations into deterministic Or/And nodes, and instantiates the
//! contingency-table templates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{
    classify, Classification, GroundAtom, Identifier, KnowledgeBase, ParentRef, QuantifierKind,
    Schema, SchemaAtom, Substitution,
};

/// Identity of an existential/universal combination node. Two quantifier
/// nodes are equal iff kind, type name, and body (with the bound positions
/// normalized) coincide.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantifierNodeId {
    pub kind: QuantifierKind,
    pub type_name: Identifier,
    /// Body atom with every bound-parameter position replaced by `None`;
    /// constants and already-substituted free parameters stay.
    pub predicate: Identifier,
    pub fixed_args: Vec<Option<Identifier>>,
}

impl QuantifierNodeId {
    fn from_body(kind: QuantifierKind, type_name: Identifier, body: &SchemaAtom, bound: &Identifier) -> Self {
        let fixed_args = body
            .args
            .iter()
            .map(|a| if a == bound { None } else { Some(a.clone()) })
            .collect();
        QuantifierNodeId { kind, type_name, predicate: body.predicate.clone(), fixed_args }
    }

    fn body_instance(&self, member: &Identifier) -> GroundAtom {
        let args = self
            .fixed_args
            .iter()
            .map(|a| a.clone().unwrap_or_else(|| member.clone()))
            .collect();
        GroundAtom::new(self.predicate.clone(), args)
    }
}

impl fmt::Display for QuantifierNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let all_bound = self.fixed_args.iter().all(|a| a.is_none());
        if all_bound {
            write!(
                f,
                "{}({}, {}/{})",
                self.kind,
                self.type_name,
                self.predicate,
                self.fixed_args.len()
            )
        } else {
            let args: Vec<String> = self
                .fixed_args
                .iter()
                .map(|a| a.as_ref().map_or("_".to_owned(), |c| c.to_string()))
                .collect();
            write!(
                f,
                "{}({}, {}({}))",
                self.kind,
                self.type_name,
                self.predicate,
                args.join(",")
            )
        }
    }
}

/// A node of the ground network: a proposition or a combination node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeId {
    Atom(GroundAtom),
    Quantifier(QuantifierNodeId),
}

impl NodeId {
    /// Canonical text form; node ordering is lexicographic on this.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Atom(a) => write!(f, "{a}"),
            NodeId::Quantifier(q) => write!(f, "{q}"),
        }
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical().cmp(&other.canonical())
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Chance,
    DetOr,
    DetAnd,
}

/// Where an arc came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ArcOrigin {
    /// Image of a schema under a substitution of its free parameters.
    Schema { schema_index: usize, substitution: Substitution },
    /// Fan-in arc gathering a type member into a quantifier node.
    QuantifierGather { schema_index: usize, member: Identifier },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GroundError {
    #[error("schema for `{child}` has parameters but no individuals are declared")]
    EmptyIndividualPool { child: String },
    #[error("quantifier references undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("grounding produced a cycle: {}", cycle.join(" -> "))]
    CycleDetected { cycle: Vec<String> },
    #[error("substitution made `{0}` its own parent")]
    SelfArc(String),
    #[error("node `{0}` received two conflicting definitions")]
    DuplicateNodeDefinition(String),
    #[error("node `{0}` has no defining schema instance and matches no prior")]
    UndefinedNode(String),
}

/// A directed acyclic graph of boolean proposition nodes, each with a
/// complete conditional probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundNetwork {
    nodes: Vec<NodeId>,
    /// Parent indices per node, in CPT order.
    parents: Vec<Vec<usize>>,
    /// Per node, 2^|parents| values of P(node = true | assignment); the row
    /// index has bit i set when parent i is true.
    cpts: Vec<Vec<f64>>,
    kinds: Vec<NodeKind>,
    provenance: BTreeMap<(usize, usize), ArcOrigin>,
}

impl GroundNetwork {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &NodeId {
        &self.nodes[index]
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.nodes.binary_search(id).ok()
    }

    pub fn index_of_atom(&self, atom: &GroundAtom) -> Option<usize> {
        self.node_index(&NodeId::Atom(atom.clone()))
    }

    pub fn parents_of(&self, index: usize) -> &[usize] {
        &self.parents[index]
    }

    pub fn cpt(&self, index: usize) -> &[f64] {
        &self.cpts[index]
    }

    pub fn kind(&self, index: usize) -> NodeKind {
        self.kinds[index]
    }

    /// All arcs as (parent, child) index pairs, in deterministic order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().enumerate().flat_map(move |(child, _)| {
            self.parents[child].iter().map(move |&p| (p, child))
        })
    }

    pub fn arc_origin(&self, parent: usize, child: usize) -> Option<&ArcOrigin> {
        self.provenance.get(&(parent, child))
    }

    pub fn children_of(&self, index: usize) -> Vec<usize> {
        self.arcs().filter(|&(p, _)| p == index).map(|(_, c)| c).collect()
    }

    /// P(node = true | parent assignment) where bit i of `mask` is parent i.
    pub fn prob_true(&self, index: usize, mask: usize) -> f64 {
        self.cpts[index][mask]
    }

    /// Deterministic Graphviz rendering. Quantifier nodes are diamonds with
    /// an `∃`/`∀` label prefix.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph g {\n");
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                NodeId::Atom(_) => {
                    out.push_str(&format!("  n{i} [label=\"{node}\"];\n"));
                }
                NodeId::Quantifier(q) => {
                    let sym = match q.kind {
                        QuantifierKind::Exists => "\u{2203}",
                        QuantifierKind::Forall => "\u{2200}",
                    };
                    out.push_str(&format!(
                        "  n{i} [label=\"{sym} {node}\", shape=diamond];\n"
                    ));
                }
            }
        }
        for (parent, child) in self.arcs() {
            out.push_str(&format!("  n{parent} -> n{child};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Enumerates the substitutions instantiating a schema's free parameters
/// from the global individual pool, in lexicographic order.
pub fn enumerate_substitutions(
    schema: &Schema,
    kb: &KnowledgeBase,
) -> Result<Vec<Substitution>, GroundError> {
    let params: Vec<Identifier> = schema.free_params().into_iter().collect();
    if params.is_empty() {
        return Ok(vec![Substitution::new()]);
    }
    let pool = kb.individual_pool();
    if pool.is_empty() {
        return Err(GroundError::EmptyIndividualPool { child: schema.child.to_string() });
    }
    let mut subs = Vec::new();
    let mut counters = vec![0usize; params.len()];
    loop {
        let sub: Substitution = params
            .iter()
            .zip(&counters)
            .map(|(p, &c)| (p.clone(), pool[c].clone()))
            .collect();
        subs.push(sub);
        // odometer over the pool, last parameter fastest
        let mut i = params.len();
        loop {
            if i == 0 {
                return Ok(subs);
            }
            i -= 1;
            counters[i] += 1;
            if counters[i] < pool.len() {
                break;
            }
            counters[i] = 0;
        }
    }
}

/// Expansion of a quantified parent: the combination node, its gathering
/// parents (one per type member, sorted), and the deterministic rule kind.
pub struct QuantifierExpansion {
    pub node: QuantifierNodeId,
    pub parents: Vec<GroundAtom>,
    pub det_kind: NodeKind,
}

/// Expands a quantified schema parent for one substitution of its free
/// parameters into a deterministic Or/And node over the type's members.
pub fn expand_quantifier(
    schema: &Schema,
    free_sub: &Substitution,
    kb: &KnowledgeBase,
) -> Result<QuantifierExpansion, GroundError> {
    let q = schema.quantifier().expect("schema is quantified");
    let decl = kb
        .type_decl(&q.type_name)
        .ok_or_else(|| GroundError::UndeclaredType(q.type_name.to_string()))?;

    // substitute the free parameters, keep the bound one
    let body = SchemaAtom::new(
        q.body.predicate.clone(),
        q.body
            .args
            .iter()
            .map(|a| {
                if a.is_parameter() && a != &q.bound {
                    free_sub.get(a).expect("free substitution covers body parameters").clone()
                } else {
                    a.clone()
                }
            })
            .collect(),
    );
    let node = QuantifierNodeId::from_body(q.kind, q.type_name.clone(), &body, &q.bound);

    let mut members: Vec<Identifier> = decl.members.clone();
    members.sort();
    members.dedup();
    let mut parents: Vec<GroundAtom> = members.iter().map(|m| node.body_instance(m)).collect();
    parents.dedup();

    let det_kind = match q.kind {
        QuantifierKind::Exists => NodeKind::DetOr,
        QuantifierKind::Forall => NodeKind::DetAnd,
    };
    Ok(QuantifierExpansion { node, parents, det_kind })
}

fn det_cpt(kind: NodeKind, parent_count: usize) -> Vec<f64> {
    let size = 1usize << parent_count;
    (0..size)
        .map(|mask| match kind {
            NodeKind::DetOr => {
                if mask != 0 {
                    1.0
                } else {
                    0.0
                }
            }
            NodeKind::DetAnd => {
                if mask == size - 1 {
                    1.0
                } else {
                    0.0
                }
            }
            NodeKind::Chance => unreachable!(),
        })
        .collect()
}

struct NodeDef {
    parents: Vec<NodeId>,
    cpt: Vec<f64>,
    kind: NodeKind,
    arc_origins: Vec<ArcOrigin>,
}

#[derive(Default)]
struct Builder {
    defs: BTreeMap<NodeId, NodeDef>,
    referenced: BTreeSet<NodeId>,
}

impl Builder {
    fn define(&mut self, id: NodeId, def: NodeDef) -> Result<(), GroundError> {
        for p in &def.parents {
            self.referenced.insert(p.clone());
        }
        match self.defs.get(&id) {
            None => {
                self.defs.insert(id, def);
                Ok(())
            }
            Some(existing) => {
                if existing.parents == def.parents
                    && existing.kind == def.kind
                    && existing.cpt == def.cpt
                {
                    Ok(()) // coincident instantiation, e.g. X = Y
                } else {
                    Err(GroundError::DuplicateNodeDefinition(id.to_string()))
                }
            }
        }
    }
}

/// Instantiates the child of a (plain or quantified) schema: computes the
/// deduplicated parent list and the CPT over it.
fn instantiate_child(
    schema_index: usize,
    schema: &Schema,
    sub: &Substitution,
    parent_nodes: Vec<NodeId>,
    child: NodeId,
    builder: &mut Builder,
    gather_origin: Option<&[(NodeId, ArcOrigin)]>,
) -> Result<(), GroundError> {
    // dedup coincident parents, keeping first occurrence; remember the
    // mapping so CPT rows can be collapsed consistently
    let mut unique: Vec<NodeId> = Vec::new();
    let mut position: Vec<usize> = Vec::with_capacity(parent_nodes.len());
    for p in &parent_nodes {
        if p == &child {
            return Err(GroundError::SelfArc(child.to_string()));
        }
        match unique.iter().position(|u| u == p) {
            Some(idx) => position.push(idx),
            None => {
                unique.push(p.clone());
                position.push(unique.len() - 1);
            }
        }
    }

    let rows = 1usize << unique.len();
    let mut cpt = Vec::with_capacity(rows);
    for mask in 0..rows {
        let key: Vec<bool> = position.iter().map(|&u| mask >> u & 1 == 1).collect();
        let p = schema
            .cpt
            .rows
            .get(&key)
            .copied()
            .expect("validated schema has a complete contingency table");
        cpt.push(p);
    }

    let arc_origins = unique
        .iter()
        .map(|u| {
            if let Some(gathers) = gather_origin {
                if let Some((_, origin)) = gathers.iter().find(|(n, _)| n == u) {
                    return origin.clone();
                }
            }
            ArcOrigin::Schema { schema_index, substitution: sub.clone() }
        })
        .collect();

    builder.define(
        child,
        NodeDef { parents: unique, cpt, kind: NodeKind::Chance, arc_origins },
    )
}

/// Grounds a validated knowledge base into a Bayesian network.
pub fn ground(kb: &KnowledgeBase) -> Result<GroundNetwork, GroundError> {
    let mut builder = Builder::default();

    for (schema_index, schema) in kb.schemata.iter().enumerate() {
        let subs = enumerate_substitutions(schema, kb)?;
        match classify(schema) {
            Classification::Quantified => {
                for sub in &subs {
                    let exp = expand_quantifier(schema, sub, kb)?;
                    let qnode = NodeId::Quantifier(exp.node.clone());
                    let gather: Vec<(NodeId, ArcOrigin)> = exp
                        .parents
                        .iter()
                        .map(|a| {
                            let member = a
                                .args
                                .iter()
                                .zip(&exp.node.fixed_args)
                                .find(|(_, fixed)| fixed.is_none())
                                .map(|(arg, _)| arg.clone())
                                .unwrap_or_else(|| a.predicate.clone());
                            (
                                NodeId::Atom(a.clone()),
                                ArcOrigin::QuantifierGather { schema_index, member },
                            )
                        })
                        .collect();
                    let qparents: Vec<NodeId> =
                        gather.iter().map(|(n, _)| n.clone()).collect();
                    let qdef = NodeDef {
                        cpt: det_cpt(exp.det_kind, qparents.len()),
                        arc_origins: gather.iter().map(|(_, o)| o.clone()).collect(),
                        parents: qparents,
                        kind: exp.det_kind,
                    };
                    builder.define(qnode.clone(), qdef)?;

                    let child = NodeId::Atom(schema.child.instantiate(sub));
                    instantiate_child(
                        schema_index,
                        schema,
                        sub,
                        vec![qnode],
                        child,
                        &mut builder,
                        None,
                    )?;
                }
            }
            _ => {
                for sub in &subs {
                    let parent_nodes: Vec<NodeId> = schema
                        .parents
                        .iter()
                        .map(|p| match p {
                            ParentRef::Atom(a) => NodeId::Atom(a.instantiate(sub)),
                            ParentRef::Quantifier(_) => unreachable!("not quantified"),
                        })
                        .collect();
                    let child = NodeId::Atom(schema.child.instantiate(sub));
                    instantiate_child(
                        schema_index,
                        schema,
                        sub,
                        parent_nodes,
                        child,
                        &mut builder,
                        None,
                    )?;
                }
            }
        }
    }

    // Ground priors always appear as nodes; parameterized priors are matched
    // on demand against referenced-but-undefined roots.
    for prior in &kb.priors {
        if prior.atom.is_ground() {
            let id = NodeId::Atom(GroundAtom::new(
                prior.atom.predicate.clone(),
                prior.atom.args.clone(),
            ));
            builder.define(
                id,
                NodeDef {
                    parents: Vec::new(),
                    cpt: vec![prior.p_true],
                    kind: NodeKind::Chance,
                    arc_origins: Vec::new(),
                },
            )?;
        }
    }
    let undefined: Vec<NodeId> = builder
        .referenced
        .iter()
        .filter(|n| !builder.defs.contains_key(*n))
        .cloned()
        .collect();
    for id in undefined {
        let NodeId::Atom(atom) = &id else {
            return Err(GroundError::UndefinedNode(id.to_string()));
        };
        let matched = kb.priors.iter().find(|prior| prior_matches(&prior.atom, atom));
        match matched {
            Some(prior) => builder.define(
                id,
                NodeDef {
                    parents: Vec::new(),
                    cpt: vec![prior.p_true],
                    kind: NodeKind::Chance,
                    arc_origins: Vec::new(),
                },
            )?,
            None => return Err(GroundError::UndefinedNode(id.to_string())),
        }
    }

    assemble(builder)
}

/// One-sided pattern match: the prior template covers the ground atom.
fn prior_matches(template: &SchemaAtom, atom: &GroundAtom) -> bool {
    if template.predicate != atom.predicate || template.arity() != atom.arity() {
        return false;
    }
    let mut binding: BTreeMap<&Identifier, &Identifier> = BTreeMap::new();
    for (t, a) in template.args.iter().zip(&atom.args) {
        if t.is_parameter() {
            match binding.get(t) {
                Some(&bound) if bound != a => return false,
                _ => {
                    binding.insert(t, a);
                }
            }
        } else if t != a {
            return false;
        }
    }
    true
}

fn assemble(builder: Builder) -> Result<GroundNetwork, GroundError> {
    let nodes: Vec<NodeId> = builder.defs.keys().cloned().collect();
    // BTreeMap keys come out in NodeId order, which is lexicographic on the
    // canonical text form already.
    let index: BTreeMap<&NodeId, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();

    let mut parents = vec![Vec::new(); nodes.len()];
    let mut cpts = vec![Vec::new(); nodes.len()];
    let mut kinds = vec![NodeKind::Chance; nodes.len()];
    let mut provenance = BTreeMap::new();
    for (id, def) in &builder.defs {
        let i = index[id];
        parents[i] = def.parents.iter().map(|p| index[p]).collect();
        cpts[i] = def.cpt.clone();
        kinds[i] = def.kind;
        for (p, origin) in def.parents.iter().zip(&def.arc_origins) {
            provenance.insert((index[p], i), origin.clone());
        }
    }

    let net = GroundNetwork { nodes, parents, cpts, kinds, provenance };
    if let Some(cycle) = find_cycle(&net) {
        return Err(GroundError::CycleDetected {
            cycle: cycle.iter().map(|&i| net.nodes[i].to_string()).collect(),
        });
    }
    Ok(net)
}

/// Kahn's algorithm; on failure, extracts a witness cycle from the residual
/// subgraph by following parents.
fn find_cycle(net: &GroundNetwork) -> Option<Vec<usize>> {
    let n = net.node_count();
    let mut indeg: Vec<usize> = net.parents.iter().map(|p| p.len()).collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, ps) in net.parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut done = 0;
    while let Some(i) = queue.pop() {
        done += 1;
        for &c in &children[i] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    if done == n {
        return None;
    }
    // walk parents inside the residual graph until a node repeats
    let start = (0..n).find(|&i| indeg[i] > 0).expect("residual graph is nonempty");
    let mut seen = vec![usize::MAX; n];
    let mut path = vec![start];
    seen[start] = 0;
    loop {
        let cur = *path.last().unwrap();
        let next = net.parents[cur]
            .iter()
            .copied()
            .find(|&p| indeg[p] > 0)
            .expect("residual node has a residual parent");
        if seen[next] != usize::MAX {
            let mut cycle: Vec<usize> = path[seen[next]..].to_vec();
            cycle.push(next);
            return Some(cycle);
        }
        seen[next] = path.len();
        path.push(next);
    }
}

/// Extends the named type with a constant and re-grounds. Extensionally equal
/// to `ground` on the extended knowledge base.
pub fn add_member(
    kb: &KnowledgeBase,
    type_name: &Identifier,
    constant: &Identifier,
) -> Result<(KnowledgeBase, GroundNetwork), GroundError> {
    let mut kb = kb.clone();
    match kb.types.iter_mut().find(|t| &t.name == type_name) {
        Some(t) => {
            if !t.members.contains(constant) {
                t.members.push(constant.clone());
            }
        }
        None => {
            kb.types.push(crate::model::TypeDecl {
                name: type_name.clone(),
                members: vec![constant.clone()],
            });
        }
    }
    let net = ground(&kb)?;
    Ok((kb, net))
}
