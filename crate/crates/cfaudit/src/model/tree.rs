//! Binary CART with Gini impurity. Trees consume raw (unstandardized)
//! values; one-hot columns split at 0.5, which is a membership test.

use serde::{Deserialize, Serialize};

use super::TrainView;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeHyper {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeHyper {
    fn default() -> Self {
        TreeHyper {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Positive-class fraction of the training rows that reached here.
        score: f64,
    },
    Split {
        col: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: Node,
    pub layout_hash: u64,
}

impl TreeModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { score } => return *score,
                Node::Split {
                    col,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*col] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

pub fn train_tree(view: &TrainView, hyper: &TreeHyper) -> Result<TreeModel> {
    let idx: Vec<usize> = (0..view.x.len()).collect();
    let min_leaf = hyper.min_leaf.max(1);
    let root = grow(view.x, view.labels, &idx, hyper.max_depth, min_leaf);
    Ok(TreeModel {
        root,
        layout_hash: view.layout.hash(),
    })
}

fn positive_fraction(labels: &[u8], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().map(|&i| labels[i] as usize).sum::<usize>() as f64 / idx.len() as f64
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn grow(x: &[Vec<f64>], labels: &[u8], idx: &[usize], depth_left: usize, min_leaf: usize) -> Node {
    let score = positive_fraction(labels, idx);
    if depth_left == 0 || idx.len() < 2 * min_leaf || score == 0.0 || score == 1.0 {
        return Node::Leaf { score };
    }
    match best_split(x, labels, idx, min_leaf) {
        None => Node::Leaf { score },
        Some((col, threshold)) => {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &i in idx {
                if x[i][col] < threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            Node::Split {
                col,
                threshold,
                left: Box::new(grow(x, labels, &left, depth_left - 1, min_leaf)),
                right: Box::new(grow(x, labels, &right, depth_left - 1, min_leaf)),
            }
        }
    }
}

/// Exhaustive scan: every column, every midpoint between adjacent distinct
/// values. First strictly-best gain wins, so ties resolve to the lower
/// column index and lower threshold.
fn best_split(
    x: &[Vec<f64>],
    labels: &[u8],
    idx: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let total = idx.len();
    let total_pos: usize = idx.iter().map(|&i| labels[i] as usize).sum();
    let parent = gini(total_pos, total);
    let cols = x[idx[0]].len();

    let mut best: Option<(usize, f64, f64)> = None;
    let mut order: Vec<usize> = idx.to_vec();
    for col in 0..cols {
        order.sort_by(|&a, &b| x[a][col].partial_cmp(&x[b][col]).unwrap());
        let mut left_n = 0usize;
        let mut left_pos = 0usize;
        for w in 0..total - 1 {
            let i = order[w];
            left_n += 1;
            left_pos += labels[i] as usize;
            let here = x[i][col];
            let next = x[order[w + 1]][col];
            if here == next {
                continue;
            }
            let right_n = total - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_pos = total_pos - left_pos;
            let weighted = (left_n as f64 * gini(left_pos, left_n)
                + right_n as f64 * gini(right_pos, right_n))
                / total as f64;
            let gain = parent - weighted;
            if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                best = Some((col, (here + next) / 2.0, gain));
            }
        }
    }
    best.map(|(col, thr, _)| (col, thr))
}
