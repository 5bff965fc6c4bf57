//! Evaluation of extracted charts against ground truth: cosine-similarity
//! node matching, node similarity, structural accuracy, their mean as the
//! total score, and an exact graph edit distance for small graphs.

mod ged;

pub use ged::{graph_edit_distance, GedConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OrgGraph;

/// Sparse term-frequency vector over lowercase tokens.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenVector {
    counts: BTreeMap<String, u32>,
}

impl TokenVector {
    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    pub fn norm(&self) -> f64 {
        self.counts
            .values()
            .map(|&c| f64::from(c) * f64::from(c))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Lowercases, maps punctuation to spaces, splits on whitespace, and
/// counts term frequencies.
pub fn tokenize(text: &str) -> TokenVector {
    let mut counts = BTreeMap::new();
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    for tok in cleaned.split_whitespace() {
        *counts.entry(tok.to_string()).or_insert(0) += 1;
    }
    TokenVector { counts }
}

/// `S_C(A, B) = A.B / (|A| |B|)`, defined as 0 when either norm is 0.
pub fn cosine_similarity(a: &TokenVector, b: &TokenVector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .counts
        .iter()
        .filter_map(|(t, &ca)| b.counts.get(t).map(|&cb| f64::from(ca) * f64::from(cb)))
        .sum();
    // Float products can land one ulp above 1 for identical vectors.
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// One-to-one assignment of ground-truth nodes to predicted nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMatching {
    /// (gt id, pred id, cosine similarity), every similarity above the
    /// matching threshold.
    pub pairs: Vec<(u32, u32, f64)>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_pred: Vec<u32>,
}

/// Greedy matching: all (gt, pred) pairs with similarity strictly above
/// `tau` are considered in descending similarity (ties by gt id, then
/// pred id); a pair is accepted when both sides are still free.
pub fn match_nodes(gt: &OrgGraph, pred: &OrgGraph, tau: f64) -> NodeMatching {
    let gt_vecs: Vec<(u32, TokenVector)> = gt
        .nodes
        .iter()
        .map(|n| (n.id, tokenize(&n.text)))
        .collect();
    let pred_vecs: Vec<(u32, TokenVector)> = pred
        .nodes
        .iter()
        .map(|n| (n.id, tokenize(&n.text)))
        .collect();

    let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
    for (gid, gv) in &gt_vecs {
        for (pid, pv) in &pred_vecs {
            let s = cosine_similarity(gv, pv);
            if s > tau {
                candidates.push((s, *gid, *pid));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("similarities are finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut pairs = Vec::new();
    let mut gt_used: Vec<u32> = Vec::new();
    let mut pred_used: Vec<u32> = Vec::new();
    for (s, gid, pid) in candidates {
        if gt_used.contains(&gid) || pred_used.contains(&pid) {
            continue;
        }
        gt_used.push(gid);
        pred_used.push(pid);
        pairs.push((gid, pid, s));
    }
    let unmatched_gt = gt_vecs
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| !gt_used.contains(id))
        .collect();
    let unmatched_pred = pred_vecs
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| !pred_used.contains(id))
        .collect();
    NodeMatching {
        pairs,
        unmatched_gt,
        unmatched_pred,
    }
}

/// Matched fraction of the `n` ground-truth nodes, in [0, 1].
pub fn node_similarity(matching: &NodeMatching, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(matching.pairs.len() as f64 / n as f64)
}

/// Fraction of non-root ground-truth nodes whose parent edge is
/// reproduced in the prediction under the matching. Single-node graphs
/// score 1 by definition.
pub fn structural_accuracy(gt: &OrgGraph, pred: &OrgGraph, matching: &NodeMatching) -> f64 {
    let n = gt.nodes.len();
    if n <= 1 {
        return 1.0;
    }
    let to_pred: BTreeMap<u32, u32> = matching.pairs.iter().map(|&(g, p, _)| (g, p)).collect();
    let mut correct = 0usize;
    let mut non_root = 0usize;
    for node in &gt.nodes {
        let Some(parent) = node.parent_id else {
            continue;
        };
        non_root += 1;
        let (Some(&pn), Some(&pp)) = (to_pred.get(&node.id), to_pred.get(&parent)) else {
            continue;
        };
        if pred.edges.contains(&(pp, pn)) {
            correct += 1;
        }
    }
    if non_root == 0 {
        return 1.0;
    }
    correct as f64 / (n - 1) as f64
}

/// `T_S = (N_S + S_A) / 2`.
pub fn total_score(node_similarity: f64, structural_accuracy: f64) -> f64 {
    (node_similarity + structural_accuracy) / 2.0
}

/// Evaluation summary for one (ground truth, prediction) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Number of ground-truth nodes.
    pub n: usize,
    pub node_similarity: f64,
    pub structural_accuracy: f64,
    pub total_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ged: Option<f64>,
}

/// Default matching threshold for node text similarity.
pub const MATCH_TAU: f64 = 0.95;

/// Runs the full metric set on a pair of graphs.
pub fn evaluate_graphs(gt: &OrgGraph, pred: &OrgGraph, with_ged: bool) -> Result<EvalReport> {
    let matching = match_nodes(gt, pred, MATCH_TAU);
    let n_s = node_similarity(&matching, gt.nodes.len())?;
    let s_a = structural_accuracy(gt, pred, &matching);
    let ged = if with_ged {
        Some(graph_edit_distance(gt, pred, &GedConfig::default())?)
    } else {
        None
    };
    Ok(EvalReport {
        n: gt.nodes.len(),
        node_similarity: n_s,
        structural_accuracy: s_a,
        total_score: total_score(n_s, s_a),
        ged,
    })
}

/// Canonical JSON for a report: sorted keys, LF, trailing newline.
pub fn report_to_json(report: &EvalReport) -> Result<String> {
    let value = serde_json::to_value(report)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, OrgGraph, OrgNode};

    fn graph(entries: &[(u32, Option<u32>, &str)]) -> OrgGraph {
        let mut level = BTreeMap::new();
        let nodes: Vec<OrgNode> = entries
            .iter()
            .map(|&(id, parent, text)| {
                let lvl = parent.map(|p| level[&p] + 1).unwrap_or(0);
                level.insert(id, lvl);
                OrgNode {
                    id,
                    bbox: BBox::new(id * 10, lvl * 30 + 1, id * 10 + 8, lvl * 30 + 9).unwrap(),
                    text: text.to_string(),
                    level: lvl,
                    parent_id: parent,
                }
            })
            .collect();
        OrgGraph::from_nodes(nodes, entries[0].0)
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("CEO").counts().get("ceo"), Some(&1));
        let v = tokenize("Chief Executive Officer");
        assert_eq!(v.counts().len(), 3);
        let v = tokenize("VP, Sales & VP, Ops");
        assert_eq!(v.counts().get("vp"), Some(&2));
        assert_eq!(v.counts().get("sales"), Some(&1));
        assert_eq!(v.counts().get("ops"), Some(&1));
        assert_eq!(v.counts().len(), 3);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn cosine_examples() {
        let a = tokenize("chief executive officer");
        let b = tokenize("chief officer");
        let expected = 2.0 / (3f64.sqrt() * 2f64.sqrt());
        assert!((cosine_similarity(&a, &b) - expected).abs() < 1e-12);
        assert!((expected - 0.8165).abs() < 1e-4);
        assert_eq!(cosine_similarity(&a, &a), 1.0);
        assert_eq!(cosine_similarity(&a, &tokenize("zebra")), 0.0);
        assert_eq!(cosine_similarity(&a, &tokenize("")), 0.0);
    }

    #[test]
    fn identical_graphs_match_fully() {
        let g = graph(&[(1, None, "ceo"), (2, Some(1), "vp"), (3, Some(1), "cto")]);
        let m = match_nodes(&g, &g, MATCH_TAU);
        assert_eq!(m.pairs.len(), 3);
        assert!(m.pairs.iter().all(|&(g, p, s)| g == p && s == 1.0));
        assert!(m.unmatched_gt.is_empty());
        assert!(m.unmatched_pred.is_empty());
    }

    #[test]
    fn missing_node_goes_unmatched() {
        let gt = graph(&[(1, None, "ceo"), (2, Some(1), "vp"), (3, Some(1), "cto")]);
        let pred = graph(&[(1, None, "ceo"), (2, Some(1), "vp")]);
        let m = match_nodes(&gt, &pred, MATCH_TAU);
        assert_eq!(m.pairs.len(), 2);
        assert_eq!(m.unmatched_gt, vec![3]);
    }

    #[test]
    fn duplicate_texts_tie_break_by_id() {
        let gt = graph(&[(1, None, "ceo"), (2, Some(1), "manager"), (3, Some(1), "manager")]);
        let pred = graph(&[(1, None, "ceo"), (2, Some(1), "manager")]);
        let m = match_nodes(&gt, &pred, MATCH_TAU);
        // Exactly one "manager" pair, and the smaller gt id got it.
        let manager_pairs: Vec<_> = m.pairs.iter().filter(|&&(g, _, _)| g >= 2).collect();
        assert_eq!(manager_pairs.len(), 1);
        assert_eq!(manager_pairs[0].0, 2);
        assert_eq!(m.unmatched_gt, vec![3]);
    }

    #[test]
    fn node_similarity_counts() {
        let gt = graph(&[(1, None, "a"), (2, Some(1), "b"), (3, Some(1), "c")]);
        let pred = graph(&[(1, None, "a"), (2, Some(1), "b")]);
        let m = match_nodes(&gt, &pred, MATCH_TAU);
        let ns = node_similarity(&m, 3).unwrap();
        assert!((ns - 2.0 / 3.0).abs() < 1e-12);
        assert!(node_similarity(&m, 0).is_err());
    }

    #[test]
    fn structural_accuracy_counts_parent_edges() {
        // GT: A -> B, A -> C. Pred: A -> B, B -> C.
        let gt = graph(&[(1, None, "a"), (2, Some(1), "b"), (3, Some(1), "c")]);
        let pred = graph(&[(1, None, "a"), (2, Some(1), "b"), (3, Some(2), "c")]);
        let m = match_nodes(&gt, &pred, MATCH_TAU);
        assert_eq!(m.pairs.len(), 3);
        let sa = structural_accuracy(&gt, &pred, &m);
        assert!((sa - 0.5).abs() < 1e-12);
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let g = graph(&[
            (1, None, "ceo"),
            (2, Some(1), "vp sales"),
            (3, Some(1), "vp ops"),
            (4, Some(2), "manager"),
        ]);
        let r = evaluate_graphs(&g, &g, true).unwrap();
        assert_eq!(r.node_similarity, 1.0);
        assert_eq!(r.structural_accuracy, 1.0);
        assert_eq!(r.total_score, 1.0);
        assert_eq!(r.ged, Some(0.0));
    }

    #[test]
    fn nothing_matched_scores_zero() {
        let gt = graph(&[(1, None, "aa"), (2, Some(1), "bb")]);
        let pred = graph(&[(1, None, "xx"), (2, Some(1), "yy")]);
        let r = evaluate_graphs(&gt, &pred, false).unwrap();
        assert_eq!(r.node_similarity, 0.0);
        assert_eq!(r.structural_accuracy, 0.0);
        assert_eq!(r.total_score, 0.0);
    }

    #[test]
    fn total_score_is_mean() {
        assert!((total_score(0.6667, 0.5) - 0.58335).abs() < 1e-9);
        assert_eq!(total_score(1.0, 1.0), 1.0);
        assert_eq!(total_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn single_node_structural_accuracy_is_one() {
        let g = graph(&[(1, None, "ceo")]);
        let r = evaluate_graphs(&g, &g, false).unwrap();
        assert_eq!(r.structural_accuracy, 1.0);
        assert_eq!(r.total_score, 1.0);
    }
}
