//! Exact graph edit distance for small graphs.
//!
//! Best-first search over node mappings: ground nodes map to prediction
//! nodes or get deleted, leftovers are inserted, and edge costs follow
//! from the node mapping. The label-mismatch assignment bound keeps the
//! search admissible, so the first goal popped is optimal. Inputs beyond
//! the size bound are rejected rather than approximated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::OrgGraph;

/// Node count bound for the exact search: |g1| + |g2| must not exceed it.
pub const EXACT_NODE_BOUND: usize = 12;

/// Costs of the edit operations. Substituting two nodes with identical
/// labels is always free; `node_substitute` applies to mismatched labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GedConfig {
    pub node_insert: f64,
    pub node_delete: f64,
    pub node_substitute: f64,
    pub edge_insert: f64,
    pub edge_delete: f64,
}

impl Default for GedConfig {
    fn default() -> Self {
        Self {
            node_insert: 1.0,
            node_delete: 1.0,
            node_substitute: 1.0,
            edge_insert: 1.0,
            edge_delete: 1.0,
        }
    }
}

impl GedConfig {
    fn validate(&self) -> Result<()> {
        let all = [
            self.node_insert,
            self.node_delete,
            self.node_substitute,
            self.edge_insert,
            self.edge_delete,
        ];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config("ged costs must be finite and >= 0".into()));
        }
        Ok(())
    }
}

pub(crate) struct LabeledGraph {
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
}

impl LabeledGraph {
    pub(crate) fn from_org(g: &OrgGraph) -> Self {
        let mut ids: Vec<u32> = g.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        let index = |id: u32| ids.binary_search(&id).expect("edge endpoints are nodes");
        let mut labels = vec![String::new(); ids.len()];
        for n in &g.nodes {
            labels[index(n.id)] = n.text.clone();
        }
        let mut edges: Vec<(usize, usize)> =
            g.edges.iter().map(|&(p, c)| (index(p), index(c))).collect();
        edges.sort_unstable();
        edges.dedup();
        Self { labels, edges }
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u, v)).is_ok()
    }
}

#[derive(Debug, Clone)]
struct State {
    /// Mapping for g1 nodes 0..k: Some(j) or None for deletion.
    assigned: Vec<Option<usize>>,
    used: u16,
    g: f64,
    f: f64,
    tie: u64,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.tie == other.tie
    }
}
impl Eq for State {}
impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap by f, then FIFO by insertion for determinism.
        other
            .f
            .total_cmp(&self.f)
            .then(other.tie.cmp(&self.tie))
    }
}

/// Exact minimum edit cost between the two graphs. Node labels are the
/// node texts; edges are the directed parent-child pairs.
pub fn graph_edit_distance(g1: &OrgGraph, g2: &OrgGraph, cfg: &GedConfig) -> Result<f64> {
    cfg.validate()?;
    let a = LabeledGraph::from_org(g1);
    let b = LabeledGraph::from_org(g2);
    let n1 = a.labels.len();
    let n2 = b.labels.len();
    if n1 + n2 > EXACT_NODE_BOUND {
        return Err(Error::GedBound {
            n1,
            n2,
            bound: EXACT_NODE_BOUND,
        });
    }
    Ok(search(&a, &b, cfg))
}

fn search(a: &LabeledGraph, b: &LabeledGraph, cfg: &GedConfig) -> f64 {
    let n1 = a.labels.len();
    let n2 = b.labels.len();
    let mut heap = BinaryHeap::new();
    let mut tie = 0u64;

    // Complete states carry their exact total cost as f, so the first one
    // popped is the optimum.
    let mut push = |heap: &mut BinaryHeap<State>,
                    assigned: Vec<Option<usize>>,
                    used: u16,
                    mut g: f64,
                    tie: u64| {
        let f = if assigned.len() == n1 {
            let done = State {
                assigned,
                used,
                g,
                f: 0.0,
                tie,
            };
            g = done.g + completion_cost(b, &done, cfg);
            heap.push(State { g, f: g, ..done });
            return;
        } else {
            g + lower_bound(a, b, &assigned, used, cfg)
        };
        heap.push(State {
            assigned,
            used,
            g,
            f,
            tie,
        });
    };
    if n1 == 0 {
        push(&mut heap, Vec::new(), 0, 0.0, tie);
    } else {
        heap.push(State {
            assigned: Vec::new(),
            used: 0,
            g: 0.0,
            f: lower_bound(a, b, &[], 0, cfg),
            tie,
        });
    }

    while let Some(state) = heap.pop() {
        let k = state.assigned.len();
        if k == n1 {
            return state.g;
        }
        // Branch: map g1 node k to every free g2 node, or delete it.
        for j in 0..n2 {
            if state.used & (1 << j) != 0 {
                continue;
            }
            let mut assigned = state.assigned.clone();
            assigned.push(Some(j));
            let node_cost = if a.labels[k] == b.labels[j] {
                0.0
            } else {
                cfg.node_substitute
            };
            let g = state.g + node_cost + edge_delta(a, b, &assigned, k, cfg);
            tie += 1;
            push(&mut heap, assigned, state.used | (1 << j), g, tie);
        }
        let mut assigned = state.assigned.clone();
        assigned.push(None);
        let g = state.g + cfg.node_delete + edge_delta(a, b, &assigned, k, cfg);
        tie += 1;
        push(&mut heap, assigned, state.used, g, tie);
    }
    unreachable!("the deletion branch always reaches a complete mapping")
}

/// Cost of the edges incident to g1 node `k` against nodes processed so
/// far (including k itself for self-loops, which the model forbids but
/// the search tolerates).
fn edge_delta(
    a: &LabeledGraph,
    b: &LabeledGraph,
    assigned: &[Option<usize>],
    k: usize,
    cfg: &GedConfig,
) -> f64 {
    let mut cost = 0.0;
    for w in 0..=k {
        for (u, v) in [(k, w), (w, k)] {
            if u == v && u != k {
                continue;
            }
            let in_a = a.has_edge(u, v);
            let mapped = match (assigned[u], assigned[v]) {
                (Some(mu), Some(mv)) => Some(b.has_edge(mu, mv)),
                _ => None,
            };
            match (in_a, mapped) {
                // Both endpoints survive: edge present on exactly one side
                // costs a delete or insert.
                (true, Some(true)) => {}
                (true, Some(false)) => cost += cfg.edge_delete,
                (false, Some(true)) => cost += cfg.edge_insert,
                (false, Some(false)) => {}
                // An endpoint was deleted: its g1 edges go with it.
                (true, None) => cost += cfg.edge_delete,
                (false, None) => {}
            }
            if u == v {
                break; // (k, k) only once
            }
        }
    }
    cost
}

/// Remaining cost once every g1 node is mapped or deleted: insert the
/// unused g2 nodes, plus every g2 edge touching an inserted node. Edges
/// between images of mapped nodes were already charged by [`edge_delta`].
fn completion_cost(b: &LabeledGraph, state: &State, cfg: &GedConfig) -> f64 {
    let n2 = b.labels.len();
    let unused = (0..n2).filter(|j| state.used & (1 << j) == 0).count();
    let mut cost = unused as f64 * cfg.node_insert;
    for &(u, v) in &b.edges {
        let u_mapped = state.assigned.iter().any(|&m| m == Some(u));
        let v_mapped = state.assigned.iter().any(|&m| m == Some(v));
        if !u_mapped || !v_mapped {
            cost += cfg.edge_insert;
        }
    }
    cost
}

/// Admissible lower bound from label multisets: unmatched labels cost at
/// least a substitution or a delete-insert pair, and the count imbalance
/// forces deletions or insertions.
fn lower_bound(
    a: &LabeledGraph,
    b: &LabeledGraph,
    assigned: &[Option<usize>],
    used: u16,
    cfg: &GedConfig,
) -> f64 {
    let rest1: Vec<&str> = (assigned.len()..a.labels.len())
        .map(|i| a.labels[i].as_str())
        .collect();
    let mut rest2: Vec<&str> = (0..b.labels.len())
        .filter(|j| used & (1 << j) == 0)
        .map(|j| b.labels[j].as_str())
        .collect();
    let r1 = rest1.len();
    let r2 = rest2.len();
    let mut common = 0usize;
    for l in &rest1 {
        if let Some(pos) = rest2.iter().position(|m| m == l) {
            rest2.swap_remove(pos);
            common += 1;
        }
    }
    let pairable = r1.min(r2);
    let mismatched = pairable.saturating_sub(common) as f64;
    let per_mismatch = cfg
        .node_substitute
        .min(cfg.node_delete + cfg.node_insert);
    let surplus1 = (r1 as f64 - r2 as f64).max(0.0);
    let surplus2 = (r2 as f64 - r1 as f64).max(0.0);
    mismatched * per_mismatch + surplus1 * cfg.node_delete + surplus2 * cfg.node_insert
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, OrgNode};

    pub(crate) fn graph(entries: &[(u32, Option<u32>, &str)]) -> OrgGraph {
        let mut levels = std::collections::BTreeMap::new();
        let nodes: Vec<OrgNode> = entries
            .iter()
            .map(|&(id, parent, text)| {
                let lvl = parent.map(|p| levels[&p] + 1).unwrap_or(0);
                levels.insert(id, lvl);
                OrgNode {
                    id,
                    bbox: BBox::new(id * 10, lvl * 20 + 1, id * 10 + 8, lvl * 20 + 9).unwrap(),
                    text: text.to_string(),
                    level: lvl,
                    parent_id: parent,
                }
            })
            .collect();
        OrgGraph::from_nodes(nodes, entries[0].0)
    }

    /// Brute force over every injective partial mapping.
    pub(crate) fn ged_brute_force(g1: &OrgGraph, g2: &OrgGraph, cfg: &GedConfig) -> f64 {
        let a = LabeledGraph::from_org(g1);
        let b = LabeledGraph::from_org(g2);
        let n1 = a.labels.len();
        let n2 = b.labels.len();
        let mut best = f64::INFINITY;
        let mut assignment: Vec<Option<usize>> = vec![None; n1];
        fn recurse(
            a: &LabeledGraph,
            b: &LabeledGraph,
            cfg: &GedConfig,
            assignment: &mut Vec<Option<usize>>,
            k: usize,
            used: &mut Vec<bool>,
            best: &mut f64,
        ) {
            let n1 = a.labels.len();
            if k == n1 {
                let mut cost = 0.0;
                for i in 0..n1 {
                    match assignment[i] {
                        None => cost += cfg.node_delete,
                        Some(j) => {
                            if a.labels[i] != b.labels[j] {
                                cost += cfg.node_substitute;
                            }
                        }
                    }
                }
                cost += used.iter().filter(|&&u| !u).count() as f64 * cfg.node_insert;
                for &(u, v) in &a.edges {
                    match (assignment[u], assignment[v]) {
                        (Some(mu), Some(mv)) if b.has_edge(mu, mv) => {}
                        _ => cost += cfg.edge_delete,
                    }
                }
                for &(u, v) in &b.edges {
                    let iu = assignment.iter().position(|&m| m == Some(u));
                    let iv = assignment.iter().position(|&m| m == Some(v));
                    match (iu, iv) {
                        (Some(i), Some(j)) if a.has_edge(i, j) => {}
                        _ => cost += cfg.edge_insert,
                    }
                }
                *best = best.min(cost);
                return;
            }
            assignment[k] = None;
            recurse(a, b, cfg, assignment, k + 1, used, best);
            for j in 0..b.labels.len() {
                if used[j] {
                    continue;
                }
                used[j] = true;
                assignment[k] = Some(j);
                recurse(a, b, cfg, assignment, k + 1, used, best);
                assignment[k] = None;
                used[j] = false;
            }
        }
        let mut used = vec![false; n2];
        recurse(&a, &b, cfg, &mut assignment, 0, &mut used, &mut best);
        best
    }

    #[test]
    fn identity_is_zero() {
        let g = graph(&[(1, None, "a"), (2, Some(1), "b"), (3, Some(2), "c")]);
        assert_eq!(graph_edit_distance(&g, &g, &GedConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn chain_vs_star_is_two() {
        let chain = graph(&[(1, None, "a"), (2, Some(1), "b"), (3, Some(2), "c")]);
        let star = graph(&[(1, None, "a"), (2, Some(1), "b"), (3, Some(1), "c")]);
        let d = graph_edit_distance(&chain, &star, &GedConfig::default()).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn extra_node_costs_one() {
        let g = graph(&[(1, None, "a"), (2, Some(1), "b")]);
        let mut h = g.clone();
        h.nodes.push(OrgNode {
            id: 9,
            bbox: BBox::new(90, 1, 98, 9).unwrap(),
            text: "extra".into(),
            level: 0,
            parent_id: None,
        });
        // Isolated extra node: one insertion.
        let d = graph_edit_distance(&g, &h, &GedConfig::default()).unwrap();
        assert_eq!(d, 1.0);
        let d = graph_edit_distance(&h, &g, &GedConfig::default()).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn size_bound_enforced() {
        let entries: Vec<(u32, Option<u32>, String)> = (1..=7u32)
            .map(|i| (i, if i == 1 { None } else { Some(1) }, format!("n{i}")))
            .collect();
        let borrowed: Vec<(u32, Option<u32>, &str)> = entries
            .iter()
            .map(|(i, p, t)| (*i, *p, t.as_str()))
            .collect();
        let g = graph(&borrowed);
        let err = graph_edit_distance(&g, &g, &GedConfig::default()).unwrap_err();
        assert!(matches!(err, Error::GedBound { .. }));
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let labels = ["a", "b", "c", "x"];
        for _ in 0..60 {
            let make = |rng: &mut rand_chacha::ChaCha8Rng| {
                let n = rng.gen_range(1..=4usize);
                let mut entries: Vec<(u32, Option<u32>, &str)> = Vec::new();
                for i in 0..n {
                    let parent = if i == 0 {
                        None
                    } else {
                        Some(rng.gen_range(1..=i) as u32)
                    };
                    entries.push((i as u32 + 1, parent, labels[rng.gen_range(0..labels.len())]));
                }
                graph(&entries)
            };
            let g1 = make(&mut rng);
            let g2 = make(&mut rng);
            let cfg = GedConfig::default();
            let fast = graph_edit_distance(&g1, &g2, &cfg).unwrap();
            let brute = ged_brute_force(&g1, &g2, &cfg);
            assert!(
                (fast - brute).abs() < 1e-9,
                "fast={fast} brute={brute} g1={g1:?} g2={g2:?}"
            );
        }
    }

    #[test]
    fn symmetric_under_symmetric_costs() {
        let g1 = graph(&[(1, None, "a"), (2, Some(1), "b"), (3, Some(1), "c")]);
        let g2 = graph(&[(1, None, "a"), (2, Some(1), "d")]);
        let cfg = GedConfig::default();
        let d12 = graph_edit_distance(&g1, &g2, &cfg).unwrap();
        let d21 = graph_edit_distance(&g2, &g1, &cfg).unwrap();
        assert_eq!(d12, d21);
    }
}
