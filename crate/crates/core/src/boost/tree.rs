//! Single regression tree grown on second-order statistics.
//!
//! Splits are found by exact enumeration: every feature column is
//! presorted once per fit, and each level of the tree is grown with one
//! pass over each column, carrying running gradient/hessian prefixes per
//! node. Leaf values and split gains use the penalized Newton step
//!
//! ```text
//! value(G, H) = -T_a(G) / (H + lambda)
//! score(G, H) = T_a(G)^2 / (H + lambda)
//! gain        = (score_left + score_right - score_parent) / 2
//! ```
//!
//! where `T_a` soft-thresholds the gradient sum by the L1 penalty. A
//! split is kept only when its gain strictly exceeds the configured
//! minimum and both children carry at least `min_child_weight` of
//! hessian mass.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Matrix;

/// Subset of the learner config consumed by the grower.
#[derive(Debug, Clone)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub reg_lambda: f64,
    pub reg_alpha: f64,
    pub min_split_gain: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// One tree of the ensemble; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub(crate) nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                }
                Node::Leaf { value } => return *value,
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn sum_squared_leaves(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { value } => value * value,
                Node::Split { .. } => 0.0,
            })
            .sum()
    }

    /// Largest feature index referenced by any split.
    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

fn score(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = soft_threshold(g, alpha);
    t * t / denom
}

fn leaf_value(g: f64, h: f64, p: &GrowParams) -> f64 {
    let denom = h + p.reg_lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    -p.learning_rate * soft_threshold(g, p.reg_alpha) / denom
}

#[derive(Clone, Copy)]
struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    g_left: f64,
    h_left: f64,
}

#[derive(Clone, Copy)]
struct ActiveNode {
    id: usize,
    g: f64,
    h: f64,
}

/// Grow one tree on gradients `g` and hessians `h`; returns the tree and
/// each training row's leaf value (the prediction delta this tree adds).
///
/// `sorted[j]` lists all row indices ascending by feature `j`;
/// `features` restricts the split search (column subsampling). The
/// iteration order of `features` and of the sorted columns fixes every
/// tie, so the result is deterministic.
pub(crate) fn grow(
    x: &Matrix,
    sorted: &[Vec<u32>],
    features: &[usize],
    g: &[f64],
    h: &[f64],
    params: &GrowParams,
) -> (RegressionTree, Vec<f64>) {
    let n = g.len();
    let g_total: f64 = g.iter().sum();
    let h_total: f64 = h.iter().sum();

    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut pos: Vec<usize> = vec![0; n];
    let mut active = vec![ActiveNode { id: 0, g: g_total, h: h_total }];

    for _depth in 0..params.max_depth {
        if active.is_empty() {
            break;
        }
        let mut slot_of = vec![usize::MAX; nodes.len()];
        for (slot, a) in active.iter().enumerate() {
            slot_of[a.id] = slot;
        }

        let mut best: Vec<Option<BestSplit>> = vec![None; active.len()];
        let mut g_left = vec![0.0; active.len()];
        let mut h_left = vec![0.0; active.len()];
        let mut last_x = vec![0.0; active.len()];
        let mut seen = vec![false; active.len()];

        for &j in features {
            for v in g_left.iter_mut() {
                *v = 0.0;
            }
            for v in h_left.iter_mut() {
                *v = 0.0;
            }
            for v in seen.iter_mut() {
                *v = false;
            }
            for &row in &sorted[j] {
                let row = row as usize;
                let slot = slot_of[pos[row]];
                if slot == usize::MAX {
                    continue;
                }
                let xv = x.get(row, j);
                let node = &active[slot];
                if seen[slot] && xv > last_x[slot] {
                    let gl = g_left[slot];
                    let hl = h_left[slot];
                    let hr = node.h - hl;
                    if hl >= params.min_child_weight && hr >= params.min_child_weight {
                        let gain = 0.5
                            * (score(gl, hl, params.reg_lambda, params.reg_alpha)
                                + score(node.g - gl, hr, params.reg_lambda, params.reg_alpha)
                                - score(node.g, node.h, params.reg_lambda, params.reg_alpha));
                        if gain > params.min_split_gain
                            && best[slot].is_none_or(|b| gain > b.gain)
                        {
                            let mut threshold = 0.5 * (last_x[slot] + xv);
                            if !(threshold > last_x[slot]) {
                                threshold = xv;
                            }
                            best[slot] = Some(BestSplit {
                                gain,
                                feature: j,
                                threshold,
                                g_left: gl,
                                h_left: hl,
                            });
                        }
                    }
                }
                g_left[slot] += g[row];
                h_left[slot] += h[row];
                last_x[slot] = xv;
                seen[slot] = true;
            }
        }

        let mut next_active = Vec::new();
        for (slot, node) in active.iter().enumerate() {
            match best[slot] {
                Some(b) => {
                    let left = nodes.len();
                    let right = nodes.len() + 1;
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node.id] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left,
                        right,
                    };
                    next_active.push(ActiveNode { id: left, g: b.g_left, h: b.h_left });
                    next_active
                        .push(ActiveNode { id: right, g: node.g - b.g_left, h: node.h - b.h_left });
                }
                None => {
                    nodes[node.id] = Node::Leaf { value: leaf_value(node.g, node.h, params) };
                }
            }
        }

        for row in 0..n {
            if let Node::Split { feature, threshold, left, right } = &nodes[pos[row]] {
                pos[row] = if x.get(row, *feature) < *threshold { *left } else { *right };
            }
        }
        active = next_active;
    }

    for node in active {
        nodes[node.id] = Node::Leaf { value: leaf_value(node.g, node.h, params) };
    }
    let row_values = pos
        .iter()
        .map(|&id| match &nodes[id] {
            Node::Leaf { value } => *value,
            Node::Split { .. } => unreachable!("rows are rerouted below every split"),
        })
        .collect();
    (RegressionTree { nodes }, row_values)
}
