use super::{Criterion, Node, Row, TreeParams};

/// Weighted node impurity: total weight times per-unit impurity.
pub fn impurity(counts: &[f64], criterion: Criterion) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => total - counts.iter().map(|c| c * c).sum::<f64>() / total,
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                c * p.log2()
            })
            .sum::<f64>(),
    }
}

fn is_pure(counts: &[f64]) -> bool {
    counts.iter().filter(|&&c| c > 0.0).count() <= 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Summed weighted impurity of the two children.
    pub impurity: f64,
}

pub(crate) fn class_counts(rows: &[Row<'_>], idx: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for &i in idx {
        counts[rows[i].label] += rows[i].weight;
    }
    counts
}

/// Exhaustive search for the split with the lowest children impurity.
/// Ties go to the lowest feature index, then the lowest threshold.
pub fn best_split(
    rows: &[Row<'_>],
    idx: &[usize],
    n_classes: usize,
    criterion: Criterion,
) -> Option<SplitCandidate> {
    let n_features = rows.get(*idx.first()?)?.features.len();
    let mut best: Option<SplitCandidate> = None;
    let mut order = idx.to_vec();
    let mut prefix = vec![vec![0.0; n_classes]; idx.len() + 1];
    let mut suffix = vec![vec![0.0; n_classes]; idx.len() + 1];
    for f in 0..n_features {
        // canonical order makes the sums independent of input order
        order.sort_unstable_by(|&a, &b| {
            let (ra, rb) = (&rows[a], &rows[b]);
            ra.features[f]
                .total_cmp(&rb.features[f])
                .then(ra.label.cmp(&rb.label))
                .then(ra.weight.total_cmp(&rb.weight))
        });
        let n = order.len();
        for k in 0..n {
            let r = &rows[order[k]];
            let (head, tail) = prefix.split_at_mut(k + 1);
            tail[0].copy_from_slice(&head[k]);
            tail[0][r.label] += r.weight;
        }
        for k in (0..n).rev() {
            let r = &rows[order[k]];
            let (head, tail) = suffix.split_at_mut(k + 1);
            head[k].copy_from_slice(&tail[0]);
            head[k][r.label] += r.weight;
        }
        for k in 0..n - 1 {
            let lo = rows[order[k]].features[f];
            let hi = rows[order[k + 1]].features[f];
            if lo == hi {
                continue;
            }
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold <= lo {
                threshold = hi;
            }
            let score = impurity(&prefix[k + 1], criterion) + impurity(&suffix[k + 1], criterion);
            if best.is_none_or(|b| score < b.impurity) {
                best = Some(SplitCandidate { feature: f, threshold, impurity: score });
            }
        }
    }
    best
}

pub(crate) enum Decision {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: Vec<usize>,
        right: Vec<usize>,
    },
}

/// The node-local choice shared by recursive CART and level-wise growth.
pub(crate) fn decide(
    rows: &[Row<'_>],
    idx: &[usize],
    depth: usize,
    n_classes: usize,
    params: &TreeParams,
) -> (Vec<f64>, Decision) {
    let counts = class_counts(rows, idx, n_classes);
    if depth >= params.max_depth || is_pure(&counts) || idx.len() < params.min_samples_split.max(2) {
        return (counts, Decision::Leaf);
    }
    match best_split(rows, idx, n_classes, params.criterion) {
        None => (counts, Decision::Leaf),
        Some(s) => {
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| rows[i].features[s.feature] < s.threshold);
            (counts, Decision::Split { feature: s.feature, threshold: s.threshold, left, right })
        }
    }
}

/// Appends the subtree for `idx` to `arena` in pre-order and returns the
/// index of its root.
pub(crate) fn grow_recursive(
    rows: &[Row<'_>],
    idx: Vec<usize>,
    depth: usize,
    n_classes: usize,
    params: &TreeParams,
    arena: &mut Vec<Node>,
) -> usize {
    let slot = arena.len();
    let (counts, decision) = decide(rows, &idx, depth, n_classes, params);
    match decision {
        Decision::Leaf => arena.push(Node::leaf(counts)),
        Decision::Split { feature, threshold, left, right } => {
            arena.push(Node::leaf(Vec::new()));
            let l = grow_recursive(rows, left, depth + 1, n_classes, params, arena);
            let r = grow_recursive(rows, right, depth + 1, n_classes, params, arena);
            arena[slot] = Node::Internal { feature, threshold, left: l, right: r, counts };
        }
    }
    slot
}
