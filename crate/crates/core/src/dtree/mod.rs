//! Axis-parallel decision trees.
//!
//! Classification trees ([`DecisionTreePolicy`]) map an observation to a
//! discrete action; regression trees ([`RegressionTree`]) back the fitted
//! Q-iteration baseline. Both are grown greedily with exhaustive split
//! search over midpoints of consecutive distinct feature values. Features
//! strictly below the threshold route left.

mod grow;
mod regression;
mod serialize;

pub use grow::{best_split, impurity, SplitCandidate};
pub(crate) use grow::{class_counts, decide, Decision};
pub use regression::{train_regression_tree, RegNode, RegressionTree};
pub use serialize::{parse_dot_topology, DotGraph};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("observation has {got} features, tree expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub criterion: Criterion,
}

impl TreeParams {
    pub fn with_depth(max_depth: usize) -> Self {
        TreeParams { max_depth, min_samples_split: 2, criterion: Criterion::Gini }
    }
}

/// Feature and action labels carried by a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSchema {
    pub feature_names: Vec<String>,
    pub action_names: Vec<String>,
}

impl TreeSchema {
    pub fn anonymous(n_features: usize, n_actions: usize) -> Self {
        TreeSchema {
            feature_names: (0..n_features).map(|f| format!("x{f}")).collect(),
            action_names: (0..n_actions).map(|a| format!("a{a}")).collect(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }
}

/// Borrowed training row.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub features: &'a [f64],
    pub label: usize,
    pub weight: f64,
}

/// Joint information recorded alongside a training point: the full state,
/// every agent's observation and every agent's expert action.
#[derive(Debug, Clone, PartialEq)]
pub struct JointContext {
    pub state: crate::env::JointState,
    pub observations: Vec<Vec<f64>>,
    pub expert_actions: Vec<usize>,
}

impl JointContext {
    pub fn row(&self, agent: usize) -> Row<'_> {
        Row {
            features: &self.observations[agent],
            label: self.expert_actions[agent],
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub weight: f64,
    pub joint_context: Option<Arc<JointContext>>,
}

impl WeightedSample {
    pub fn new(features: Vec<f64>, label: usize, weight: f64) -> Self {
        assert!(weight >= 0.0, "sample weights are non-negative");
        WeightedSample { features, label, weight, joint_context: None }
    }

    pub fn row(&self) -> Row<'_> {
        Row { features: &self.features, label: self.label, weight: self.weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: Vec<f64>,
    },
    Leaf {
        action: usize,
        counts: Vec<f64>,
    },
}

impl Node {
    pub fn counts(&self) -> &[f64] {
        match self {
            Node::Internal { counts, .. } | Node::Leaf { counts, .. } => counts,
        }
    }

    pub(crate) fn leaf(counts: Vec<f64>) -> Node {
        Node::Leaf { action: argmax(&counts), counts }
    }
}

/// Index of the largest count, lowest index on ties.
pub fn argmax(counts: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// A decision-tree policy. Node 0 is the root; nodes are stored in
/// pre-order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreePolicy {
    pub max_depth: usize,
    pub criterion: Criterion,
    pub feature_names: Vec<String>,
    pub action_names: Vec<String>,
    pub nodes: Vec<Node>,
}

impl DecisionTreePolicy {
    /// Builds a tree from an arbitrary arena rooted at `root`, renumbering
    /// nodes in pre-order.
    pub fn from_arena(arena: &[Node], root: usize, schema: &TreeSchema, params: &TreeParams) -> Self {
        let mut nodes = Vec::with_capacity(arena.len());
        fn visit(arena: &[Node], at: usize, out: &mut Vec<Node>) -> usize {
            let slot = out.len();
            match &arena[at] {
                Node::Leaf { .. } => out.push(arena[at].clone()),
                Node::Internal { feature, threshold, left, right, counts } => {
                    out.push(Node::Leaf { action: 0, counts: Vec::new() });
                    let l = visit(arena, *left, out);
                    let r = visit(arena, *right, out);
                    out[slot] = Node::Internal {
                        feature: *feature,
                        threshold: *threshold,
                        left: l,
                        right: r,
                        counts: counts.clone(),
                    };
                }
            }
            slot
        }
        visit(arena, root, &mut nodes);
        DecisionTreePolicy {
            max_depth: params.max_depth,
            criterion: params.criterion,
            feature_names: schema.feature_names.clone(),
            action_names: schema.action_names.clone(),
            nodes,
        }
    }

    /// A single-leaf tree that always plays `action`.
    pub fn constant(action: usize, schema: &TreeSchema) -> Self {
        let mut counts = vec![0.0; schema.n_actions()];
        counts[action] = 1.0;
        DecisionTreePolicy {
            max_depth: 0,
            criterion: Criterion::Gini,
            feature_names: schema.feature_names.clone(),
            action_names: schema.action_names.clone(),
            nodes: vec![Node::Leaf { action, counts }],
        }
    }

    pub fn schema(&self) -> TreeSchema {
        TreeSchema {
            feature_names: self.feature_names.clone(),
            action_names: self.action_names.clone(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    /// Index of the leaf reached by `features`.
    pub fn leaf_index(&self, features: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Internal { feature, threshold, left, right, .. } => {
                    at = if features[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Traversal without a length check (indexing still panics on short input).
    pub fn act(&self, features: &[f64]) -> usize {
        match &self.nodes[self.leaf_index(features)] {
            Node::Leaf { action, .. } => *action,
            Node::Internal { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize, TreeError> {
        if features.len() != self.n_features() {
            return Err(TreeError::DimensionMismatch {
                expected: self.n_features(),
                got: features.len(),
            });
        }
        Ok(self.act(features))
    }

    /// Depth of the deepest leaf (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Total weighted impurity decrease per feature, normalized to sum to 1
    /// (uniform when the tree has no informative split).
    pub fn feature_importance(&self) -> Vec<f64> {
        let n = self.n_features();
        let mut imp = vec![0.0; n];
        for node in &self.nodes {
            if let Node::Internal { feature, left, right, counts, .. } = node {
                let decrease = impurity(counts, self.criterion)
                    - impurity(self.nodes[*left].counts(), self.criterion)
                    - impurity(self.nodes[*right].counts(), self.criterion);
                imp[*feature] += decrease.max(0.0);
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            imp.iter_mut().for_each(|v| *v /= total);
        } else if n > 0 {
            imp.fill(1.0 / n as f64);
        }
        imp
    }
}

/// Greedy CART on weighted samples.
pub fn train_decision_tree(
    data: &[WeightedSample],
    schema: &TreeSchema,
    params: &TreeParams,
) -> Result<DecisionTreePolicy, TreeError> {
    let rows: Vec<Row<'_>> = data.iter().map(WeightedSample::row).collect();
    train_rows(&rows, schema, params)
}

/// [`train_decision_tree`] over borrowed rows.
pub fn train_rows(rows: &[Row<'_>], schema: &TreeSchema, params: &TreeParams) -> Result<DecisionTreePolicy, TreeError> {
    if rows.is_empty() {
        return Err(TreeError::EmptyDataset);
    }
    if let Some(bad) = rows.iter().find(|r| r.features.len() != schema.n_features()) {
        return Err(TreeError::DimensionMismatch {
            expected: schema.n_features(),
            got: bad.features.len(),
        });
    }
    let mut arena = Vec::new();
    let all: Vec<usize> = (0..rows.len()).collect();
    grow::grow_recursive(rows, all, 0, schema.n_actions(), params, &mut arena);
    Ok(DecisionTreePolicy::from_arena(&arena, 0, schema, params))
}
