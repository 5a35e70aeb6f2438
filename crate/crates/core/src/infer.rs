//! Exact inference on a ground network: posterior probabilities under
//! evidence by variable elimination, plus a brute-force joint-enumeration
//! oracle for differential testing.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ground::{GroundNetwork, NodeId};

/// Observed truth values, keyed by node.
pub type Evidence = BTreeMap<NodeId, bool>;

/// P(evidence) below this is treated as impossible.
pub const IMPOSSIBLE_EVIDENCE_EPS: f64 = 1e-12;

/// Node-count guard for the enumeration oracle.
pub const ORACLE_NODE_LIMIT: usize = 25;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InferError {
    #[error("node `{0}` is not part of the network")]
    UnknownNode(String),
    #[error("evidence has probability below {IMPOSSIBLE_EVIDENCE_EPS}; it contradicts the network")]
    ImpossibleEvidence,
    #[error("network has {0} nodes; the enumeration oracle is limited to {ORACLE_NODE_LIMIT}")]
    TooLargeForOracle(usize),
    #[error("variable {0} occurs in no factor")]
    VarNotInScope(usize),
}

/// A nonnegative table over a subset of network variables. `scope` is sorted
/// ascending by node index; bit i of a value index is the truth of scope[i].
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub scope: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn constant(v: f64) -> Self {
        Factor { scope: Vec::new(), values: vec![v] }
    }

    fn position(&self, var: usize) -> Option<usize> {
        self.scope.iter().position(|&v| v == var)
    }

    /// Fixes one variable to a value, dropping it from the scope.
    pub fn restrict(&self, var: usize, value: bool) -> Factor {
        let Some(pos) = self.position(var) else {
            return self.clone();
        };
        let mut scope = self.scope.clone();
        scope.remove(pos);
        let n = scope.len();
        let mut values = Vec::with_capacity(1 << n);
        for idx in 0..1usize << n {
            let low = idx & ((1 << pos) - 1);
            let high = (idx >> pos) << (pos + 1);
            let full = low | high | ((value as usize) << pos);
            values.push(self.values[full]);
        }
        Factor { scope, values }
    }

    /// Pointwise product; scopes are merged.
    pub fn multiply(&self, other: &Factor) -> Factor {
        let scope: Vec<usize> = {
            let mut s: BTreeSet<usize> = self.scope.iter().copied().collect();
            s.extend(other.scope.iter().copied());
            s.into_iter().collect()
        };
        let pos_a: Vec<usize> = self.scope.iter().map(|v| scope.binary_search(v).unwrap()).collect();
        let pos_b: Vec<usize> = other.scope.iter().map(|v| scope.binary_search(v).unwrap()).collect();
        let mut values = Vec::with_capacity(1 << scope.len());
        for idx in 0..1usize << scope.len() {
            let ia: usize = pos_a.iter().enumerate().map(|(i, &p)| (idx >> p & 1) << i).sum();
            let ib: usize = pos_b.iter().enumerate().map(|(i, &p)| (idx >> p & 1) << i).sum();
            values.push(self.values[ia] * other.values[ib]);
        }
        Factor { scope, values }
    }

    /// Marginalizes one variable out of the scope.
    pub fn sum_out(&self, var: usize) -> Factor {
        let pos = self.position(var).expect("variable in scope");
        let mut scope = self.scope.clone();
        scope.remove(pos);
        let n = scope.len();
        let mut values = Vec::with_capacity(1 << n);
        for idx in 0..1usize << n {
            let low = idx & ((1 << pos) - 1);
            let high = (idx >> pos) << (pos + 1);
            values.push(self.values[low | high] + self.values[low | high | (1 << pos)]);
        }
        Factor { scope, values }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// The CPT of one node as a factor over the node and its parents.
pub fn cpt_factor(net: &GroundNetwork, node: usize) -> Factor {
    let parents = net.parents_of(node);
    let mut scope: Vec<usize> = parents.to_vec();
    scope.push(node);
    scope.sort_unstable();
    let node_pos = scope.binary_search(&node).unwrap();
    let parent_pos: Vec<usize> =
        parents.iter().map(|p| scope.binary_search(p).unwrap()).collect();
    let mut values = Vec::with_capacity(1 << scope.len());
    for idx in 0..1usize << scope.len() {
        let mask: usize = parent_pos
            .iter()
            .enumerate()
            .map(|(i, &p)| (idx >> p & 1) << i)
            .sum();
        let p_true = net.prob_true(node, mask);
        values.push(if idx >> node_pos & 1 == 1 { p_true } else { 1.0 - p_true });
    }
    Factor { scope, values }
}

/// Sum-product elimination step: multiplies every factor mentioning `var`
/// and sums `var` out, replacing them with the result.
pub fn eliminate(factors: Vec<Factor>, var: usize) -> Result<Vec<Factor>, InferError> {
    let (mentioning, mut rest): (Vec<Factor>, Vec<Factor>) =
        factors.into_iter().partition(|f| f.scope.contains(&var));
    if mentioning.is_empty() {
        return Err(InferError::VarNotInScope(var));
    }
    let product = mentioning
        .into_iter()
        .reduce(|a, b| a.multiply(&b))
        .expect("at least one factor mentions var");
    rest.push(product.sum_out(var));
    Ok(rest)
}

/// Greedy min-degree elimination order over the moralized graph, ties broken
/// lexicographically by canonical node name. Nodes in `keep` are excluded.
pub fn elimination_order(net: &GroundNetwork, keep: &BTreeSet<usize>) -> Vec<usize> {
    let n = net.node_count();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for child in 0..n {
        let ps = net.parents_of(child);
        for &p in ps {
            adj[p].insert(child);
            adj[child].insert(p);
        }
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    let mut remaining: BTreeSet<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let next = remaining
            .iter()
            .copied()
            .min_by(|&a, &b| {
                adj[a]
                    .len()
                    .cmp(&adj[b].len())
                    .then_with(|| net.node(a).canonical().cmp(&net.node(b).canonical()))
            })
            .unwrap();
        let neighbors: Vec<usize> = adj[next].iter().copied().collect();
        for (i, &a) in neighbors.iter().enumerate() {
            adj[a].remove(&next);
            for &b in &neighbors[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj[next].clear();
        remaining.remove(&next);
        order.push(next);
    }
    order
}

/// The full joint distribution as one factor over all nodes. Entries sum to
/// one; use only on small networks.
pub fn joint_enumerate(net: &GroundNetwork) -> Result<Factor, InferError> {
    let n = net.node_count();
    if n > ORACLE_NODE_LIMIT {
        return Err(InferError::TooLargeForOracle(n));
    }
    let scope: Vec<usize> = (0..n).collect();
    let mut values = Vec::with_capacity(1 << n);
    for omega in 0..1usize << n {
        let mut p = 1.0;
        for node in 0..n {
            let mask: usize = net
                .parents_of(node)
                .iter()
                .enumerate()
                .map(|(i, &parent)| (omega >> parent & 1) << i)
                .sum();
            let pt = net.prob_true(node, mask);
            p *= if omega >> node & 1 == 1 { pt } else { 1.0 - pt };
        }
        values.push(p);
    }
    Ok(Factor { scope, values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryResult {
    pub p_true: f64,
    pub evidence_probability: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PosteriorOptions {
    /// Iteratively drop unobserved non-query leaves before eliminating.
    pub prune_barren: bool,
}

fn resolve(net: &GroundNetwork, id: &NodeId) -> Result<usize, InferError> {
    net.node_index(id).ok_or_else(|| InferError::UnknownNode(id.to_string()))
}

/// P(evidence): restricts every CPT factor to the evidence and sums out all
/// remaining variables outside `active` (the nodes whose factors take part).
fn event_probability(
    net: &GroundNetwork,
    ev: &BTreeMap<usize, bool>,
    active: &BTreeSet<usize>,
) -> f64 {
    let mut constant = 1.0;
    let mut factors: Vec<Factor> = Vec::new();
    for &node in active {
        let mut f = cpt_factor(net, node);
        for (&var, &val) in ev {
            if f.scope.contains(&var) {
                f = f.restrict(var, val);
            }
        }
        if f.scope.is_empty() {
            constant *= f.values[0];
        } else {
            factors.push(f);
        }
    }
    let keep: BTreeSet<usize> = ev.keys().copied().collect();
    for var in elimination_order(net, &keep) {
        if factors.iter().any(|f| f.scope.contains(&var)) {
            factors = eliminate(factors, var).expect("var occurs in a factor");
        }
    }
    for f in factors {
        debug_assert!(f.scope.is_empty());
        constant *= f.values[0];
    }
    constant
}

/// Drops unobserved non-query leaves until a fixpoint; their CPT factors sum
/// to one, so posteriors are unchanged.
fn barren_free_nodes(net: &GroundNetwork, query: usize, ev_keys: &BTreeSet<usize>) -> BTreeSet<usize> {
    let n = net.node_count();
    let mut active: BTreeSet<usize> = (0..n).collect();
    loop {
        let mut child_count = vec![0usize; n];
        for &node in &active {
            for &p in net.parents_of(node) {
                if active.contains(&p) {
                    child_count[p] += 1;
                }
            }
        }
        let barren: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| child_count[i] == 0 && i != query && !ev_keys.contains(&i))
            .collect();
        if barren.is_empty() {
            return active;
        }
        for b in barren {
            active.remove(&b);
        }
    }
}

/// P(query = true | evidence) by variable elimination.
pub fn posterior(net: &GroundNetwork, query: &NodeId, ev: &Evidence) -> Result<QueryResult, InferError> {
    posterior_opts(net, query, ev, PosteriorOptions::default())
}

pub fn posterior_opts(
    net: &GroundNetwork,
    query: &NodeId,
    ev: &Evidence,
    opts: PosteriorOptions,
) -> Result<QueryResult, InferError> {
    let query_idx = resolve(net, query)?;
    let mut ev_idx: BTreeMap<usize, bool> = BTreeMap::new();
    for (id, &val) in ev {
        ev_idx.insert(resolve(net, id)?, val);
    }

    let ev_keys: BTreeSet<usize> = ev_idx.keys().copied().collect();
    let active = if opts.prune_barren {
        barren_free_nodes(net, query_idx, &ev_keys)
    } else {
        (0..net.node_count()).collect()
    };

    let p_ev = event_probability(net, &ev_idx, &active).min(1.0);
    if p_ev <= IMPOSSIBLE_EVIDENCE_EPS {
        return Err(InferError::ImpossibleEvidence);
    }

    let p_true = if let Some(&observed) = ev_idx.get(&query_idx) {
        if observed {
            1.0
        } else {
            0.0
        }
    } else {
        let mut with_query = ev_idx.clone();
        with_query.insert(query_idx, true);
        let p_joint = event_probability(net, &with_query, &active);
        (p_joint / p_ev).clamp(0.0, 1.0)
    };
    Ok(QueryResult { p_true, evidence_probability: p_ev })
}

/// Posterior by brute-force enumeration of the joint distribution. The
/// independent oracle for differential tests.
pub fn posterior_by_enumeration(
    net: &GroundNetwork,
    query: &NodeId,
    ev: &Evidence,
) -> Result<QueryResult, InferError> {
    let query_idx = resolve(net, query)?;
    let mut ev_idx: BTreeMap<usize, bool> = BTreeMap::new();
    for (id, &val) in ev {
        ev_idx.insert(resolve(net, id)?, val);
    }
    let joint = joint_enumerate(net)?;
    let mut p_ev = 0.0;
    let mut p_joint = 0.0;
    for (omega, &p) in joint.values.iter().enumerate() {
        if ev_idx.iter().all(|(&var, &val)| (omega >> var & 1 == 1) == val) {
            p_ev += p;
            if omega >> query_idx & 1 == 1 {
                p_joint += p;
            }
        }
    }
    if p_ev <= IMPOSSIBLE_EVIDENCE_EPS {
        return Err(InferError::ImpossibleEvidence);
    }
    Ok(QueryResult { p_true: p_joint / p_ev, evidence_probability: p_ev.min(1.0) })
}
