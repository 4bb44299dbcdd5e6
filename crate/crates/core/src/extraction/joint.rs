//! Level-wise joint growth of a team's trees with teammate-aware filtering.

use std::collections::HashMap;

use log::warn;
use rayon::prelude::*;

use super::dataset::DataPoint;
use super::ExtractError;
use crate::dtree::{
    argmax, class_counts, decide, train_rows, Decision, DecisionTreePolicy, Node, Row, TreeError, TreeParams,
    TreeSchema,
};

/// Trees grown jointly for one team.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrees {
    pub trees: Vec<DecisionTreePolicy>,
    /// `(agent, level)` for every level-growth call, in call order.
    pub growth_log: Vec<(usize, usize)>,
    /// Training points dropped by the filter, per team member.
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Status {
    Open,
    Leaf,
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct PartialNode {
    depth: usize,
    parent: Option<usize>,
    samples: Vec<usize>,
    counts: Vec<f64>,
    status: Status,
}

#[derive(Debug, Clone)]
struct PartialTree {
    nodes: Vec<PartialNode>,
}

impl PartialTree {
    fn route(&self, x: &[f64]) -> usize {
        let mut at = 0;
        while let Status::Split { feature, threshold, left, right } = self.nodes[at].status {
            at = if x[feature] < threshold { left } else { right };
        }
        at
    }
}

/// What a teammate's partial tree predicts below one of its current leaves.
#[derive(Debug, Clone)]
enum Projection {
    Action(usize),
    Tree(DecisionTreePolicy),
}

impl Projection {
    fn act(&self, x: &[f64]) -> usize {
        match self {
            Projection::Action(a) => *a,
            Projection::Tree(t) => t.act(x),
        }
    }
}

/// Whether a point survives filtering given each team member's prediction
/// outcome.
pub(crate) fn keep_point(correct: &[bool], threshold: usize) -> bool {
    correct.iter().filter(|&&c| c).count() >= threshold
}

struct Grower<'a> {
    agents: &'a [usize],
    data: &'a [Vec<DataPoint>],
    rows: Vec<Vec<Row<'a>>>,
    schemas: &'a [TreeSchema],
    params: &'a TreeParams,
    threshold: usize,
    filter: bool,
    trees: Vec<PartialTree>,
    memo: HashMap<(usize, usize), Projection>,
    dropped: Vec<usize>,
}

impl<'a> Grower<'a> {
    fn new(
        agents: &'a [usize],
        data: &'a [Vec<DataPoint>],
        schemas: &'a [TreeSchema],
        params: &'a TreeParams,
        threshold: usize,
        filter: bool,
    ) -> Self {
        let rows: Vec<Vec<Row<'a>>> = agents
            .iter()
            .zip(data)
            .map(|(&a, d)| d.iter().map(|p| p.row(a, 1.0)).collect())
            .collect();
        let trees = rows
            .iter()
            .zip(schemas)
            .map(|(r, s)| {
                let samples: Vec<usize> = (0..r.len()).collect();
                let counts = class_counts(r, &samples, s.n_actions());
                PartialTree {
                    nodes: vec![PartialNode { depth: 0, parent: None, samples, counts, status: Status::Open }],
                }
            })
            .collect();
        Grower {
            agents,
            data,
            rows,
            schemas,
            params,
            threshold,
            filter,
            trees,
            memo: HashMap::new(),
            dropped: vec![0; agents.len()],
        }
    }

    fn project(&self, slot: usize, node: usize) -> Projection {
        let tree = &self.trees[slot];
        let n = &tree.nodes[node];
        match n.status {
            Status::Leaf => Projection::Action(argmax(&n.counts)),
            Status::Split { .. } => unreachable!("projection below an internal node"),
            Status::Open if n.samples.is_empty() => {
                let parent = n.parent.map_or(&n.counts, |p| &tree.nodes[p].counts);
                Projection::Action(argmax(parent))
            }
            Status::Open => {
                let params = TreeParams { max_depth: self.params.max_depth - n.depth, ..*self.params };
                let rows: Vec<Row<'_>> = n.samples.iter().map(|&i| self.rows[slot][i]).collect();
                let t = train_rows(&rows, &self.schemas[slot], &params).expect("node rows are non-empty and well-formed");
                Projection::Tree(t)
            }
        }
    }

    /// Prediction of team member `slot` for observation `x`, bypassing the
    /// memo.
    #[cfg(test)]
    fn predict_uncached(&self, slot: usize, x: &[f64]) -> usize {
        self.project(slot, self.trees[slot].route(x)).act(x)
    }

    /// Fills the memo for every (member, leaf) pair reached by `points`.
    fn warm(&mut self, points: &[&DataPoint]) {
        let mut missing: Vec<(usize, usize)> = Vec::new();
        for p in points {
            for (slot, &agent) in self.agents.iter().enumerate() {
                let key = (slot, self.trees[slot].route(&p.context.observations[agent]));
                if !self.memo.contains_key(&key) && !missing.contains(&key) {
                    missing.push(key);
                }
            }
        }
        let built: Vec<((usize, usize), Projection)> =
            missing.par_iter().map(|&(s, n)| ((s, n), self.project(s, n))).collect();
        self.memo.extend(built);
    }

    fn predict(&self, slot: usize, x: &[f64]) -> usize {
        let node = self.trees[slot].route(x);
        self.memo[&(slot, node)].act(x)
    }

    fn correct(&self, point: &DataPoint) -> Vec<bool> {
        self.agents
            .iter()
            .enumerate()
            .map(|(slot, &agent)| {
                self.predict(slot, &point.context.observations[agent]) == point.context.expert_actions[agent]
            })
            .collect()
    }

    /// Grows one level of member `slot`'s tree. Returns the surviving sample
    /// indices of each frontier node.
    fn build_level(&mut self, slot: usize, level: usize) -> Vec<(usize, Vec<usize>)> {
        let frontier: Vec<usize> = self.trees[slot]
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.status, Status::Open) && n.depth == level)
            .map(|(i, _)| i)
            .collect();
        let filtering = self.filter && self.threshold > 0;
        if filtering {
            let data = self.data;
            let pts: Vec<&DataPoint> = frontier
                .iter()
                .flat_map(|&n| self.trees[slot].nodes[n].samples.iter().map(move |&i| &data[slot][i]))
                .collect();
            self.warm(&pts);
        }
        let n_classes = self.schemas[slot].n_actions();
        let mut kept_log = Vec::with_capacity(frontier.len());
        for node in frontier {
            let samples = self.trees[slot].nodes[node].samples.clone();
            let kept: Vec<usize> = if filtering {
                samples
                    .iter()
                    .copied()
                    .filter(|&i| keep_point(&self.correct(&self.data[slot][i]), self.threshold))
                    .collect()
            } else {
                samples.clone()
            };
            self.dropped[slot] += samples.len() - kept.len();
            kept_log.push((node, kept.clone()));
            if kept.is_empty() {
                warn!(
                    "agent {}: every point at node {node} was filtered out; keeping the unfiltered majority",
                    self.agents[slot]
                );
                self.trees[slot].nodes[node].status = Status::Leaf;
                continue;
            }
            let depth = self.trees[slot].nodes[node].depth;
            let (counts, decision) = decide(&self.rows[slot], &kept, depth, n_classes, self.params);
            let tree = &mut self.trees[slot];
            tree.nodes[node].counts = counts;
            match decision {
                Decision::Leaf => tree.nodes[node].status = Status::Leaf,
                Decision::Split { feature, threshold, left, right } => {
                    let mut child = |samples: Vec<usize>| {
                        let counts = class_counts(&self.rows[slot], &samples, n_classes);
                        tree.nodes.push(PartialNode {
                            depth: depth + 1,
                            parent: Some(node),
                            samples,
                            counts,
                            status: Status::Open,
                        });
                        tree.nodes.len() - 1
                    };
                    let l = child(left);
                    let r = child(right);
                    tree.nodes[node].status = Status::Split { feature, threshold, left: l, right: r };
                }
            }
            self.memo.remove(&(slot, node));
        }
        kept_log
    }

    fn finish(self) -> (Vec<DecisionTreePolicy>, Vec<usize>) {
        let trees = self
            .trees
            .iter()
            .zip(self.schemas)
            .map(|(t, schema)| {
                let arena: Vec<Node> = t
                    .nodes
                    .iter()
                    .map(|n| match n.status {
                        Status::Split { feature, threshold, left, right } => {
                            Node::Internal { feature, threshold, left, right, counts: n.counts.clone() }
                        }
                        Status::Open | Status::Leaf => Node::Leaf { action: argmax(&n.counts), counts: n.counts.clone() },
                    })
                    .collect();
                DecisionTreePolicy::from_arena(&arena, 0, schema, self.params)
            })
            .collect();
        (trees, self.dropped)
    }
}

/// Grows one tree per team member, one breadth-first level at a time in
/// round-robin order. With `filter` on, a point is kept at a node only if at
/// least `threshold` members' projected trees predict their expert action
/// for it.
///
/// `data[k]` is the (resampled) training set of `agents[k]`.
pub fn train_joint_trees(
    agents: &[usize],
    data: &[Vec<DataPoint>],
    schemas: &[TreeSchema],
    params: &TreeParams,
    threshold: usize,
    filter: bool,
) -> Result<JointTrees, ExtractError> {
    assert_eq!(agents.len(), data.len());
    assert_eq!(agents.len(), schemas.len());
    for ((&a, d), s) in agents.iter().zip(data).zip(schemas) {
        if d.is_empty() {
            return Err(TreeError::EmptyDataset.into());
        }
        if let Some(bad) = d.iter().find(|p| p.context.observations[a].len() != s.n_features()) {
            return Err(TreeError::DimensionMismatch {
                expected: s.n_features(),
                got: bad.context.observations[a].len(),
            }
            .into());
        }
    }
    let mut grower = Grower::new(agents, data, schemas, params, threshold, filter);
    let mut growth_log = Vec::new();
    for level in 0..params.max_depth {
        for slot in 0..agents.len() {
            grower.build_level(slot, level);
            growth_log.push((agents[slot], level + 1));
        }
    }
    let (trees, dropped) = grower.finish();
    Ok(JointTrees { trees, growth_log, dropped })
}

#[cfg(test)]
mod tests;
