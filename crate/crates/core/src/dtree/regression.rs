use serde::{Deserialize, Serialize};

use super::TreeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

/// Least-squares regression tree, nodes in pre-order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub max_depth: usize,
    pub n_features: usize,
    pub nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn constant(value: f64, n_features: usize) -> Self {
        RegressionTree {
            max_depth: 0,
            n_features,
            nodes: vec![RegNode::Leaf { value, samples: 0 }],
        }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { value, .. } => return *value,
                RegNode::Internal { feature, threshold, left, right } => {
                    at = if features[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[RegNode], at: usize) -> usize {
            match &nodes[at] {
                RegNode::Leaf { .. } => 0,
                RegNode::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (sum_sq - sum * sum / n as f64).max(0.0)
    }
}

fn best_split(x: &[&[f64]], y: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let n_features = x[idx[0]].len();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    let n = order.len();
    let mut pre = vec![(0.0, 0.0); n + 1];
    let mut suf = vec![(0.0, 0.0); n + 1];
    for f in 0..n_features {
        order.sort_unstable_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(y[a].total_cmp(&y[b])));
        for k in 0..n {
            let v = y[order[k]];
            pre[k + 1] = (pre[k].0 + v, pre[k].1 + v * v);
        }
        suf[n] = (0.0, 0.0);
        for k in (0..n).rev() {
            let v = y[order[k]];
            suf[k] = (suf[k + 1].0 + v, suf[k + 1].1 + v * v);
        }
        for k in 0..n - 1 {
            let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
            if lo == hi {
                continue;
            }
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold <= lo {
                threshold = hi;
            }
            let score = sse(pre[k + 1].0, pre[k + 1].1, k + 1) + sse(suf[k + 1].0, suf[k + 1].1, n - k - 1);
            if best.is_none_or(|(b, _, _)| score < b) {
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn grow(
    x: &[&[f64]],
    y: &[f64],
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    nodes: &mut Vec<RegNode>,
) -> usize {
    let slot = nodes.len();
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    let constant = idx.iter().all(|&i| y[i] == y[idx[0]]);
    let split = if depth >= max_depth || idx.len() < 2 || constant {
        None
    } else {
        best_split(x, y, &idx)
    };
    match split {
        None => nodes.push(RegNode::Leaf { value: mean, samples: idx.len() }),
        Some((feature, threshold)) => {
            nodes.push(RegNode::Leaf { value: 0.0, samples: 0 });
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] < threshold);
            let left = grow(x, y, l, depth + 1, max_depth, nodes);
            let right = grow(x, y, r, depth + 1, max_depth, nodes);
            nodes[slot] = RegNode::Internal { feature, threshold, left, right };
        }
    }
    slot
}

/// Variance-reduction tree; leaves hold the mean of their targets.
pub fn train_regression_tree(x: &[&[f64]], y: &[f64], max_depth: usize) -> Result<RegressionTree, TreeError> {
    if x.is_empty() {
        return Err(TreeError::EmptyDataset);
    }
    assert_eq!(x.len(), y.len(), "one target per row");
    let n_features = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != n_features) {
        return Err(TreeError::DimensionMismatch { expected: n_features, got: bad.len() });
    }
    let mut nodes = Vec::new();
    grow(x, y, (0..x.len()).collect(), 0, max_depth, &mut nodes);
    Ok(RegressionTree { max_depth, n_features, nodes })
}
