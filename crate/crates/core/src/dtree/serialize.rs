//! JSON node-array and Graphviz DOT renderings of a policy tree.

use std::collections::BTreeMap;

use super::{DecisionTreePolicy, Node, TreeError};

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> TreeError {
    TreeError::Parse { location: location.into(), message: message.into() }
}

impl DecisionTreePolicy {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trees serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let tree: DecisionTreePolicy = serde_json::from_str(text).map_err(|e| {
            parse_err(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        tree.validate()?;
        Ok(tree)
    }

    /// Structural checks: in-range children that appear after their parent,
    /// every non-root node referenced exactly once, labels within schema.
    pub fn validate(&self) -> Result<(), TreeError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(parse_err("nodes", "tree has no nodes"));
        }
        let mut parents = vec![0usize; n];
        for (i, node) in self.nodes.iter().enumerate() {
            let at = |field: &str| format!("nodes[{i}].{field}");
            if node.counts().len() != self.n_actions() {
                return Err(parse_err(
                    at("counts"),
                    format!("expected {} counts, found {}", self.n_actions(), node.counts().len()),
                ));
            }
            match node {
                Node::Leaf { action, .. } => {
                    if *action >= self.n_actions() {
                        return Err(parse_err(at("action"), format!("action {action} out of range")));
                    }
                }
                Node::Internal { feature, threshold, left, right, .. } => {
                    if *feature >= self.n_features() {
                        return Err(parse_err(at("feature"), format!("feature {feature} out of range")));
                    }
                    if !threshold.is_finite() {
                        return Err(parse_err(at("threshold"), "threshold must be finite"));
                    }
                    for (name, child) in [("left", *left), ("right", *right)] {
                        if child >= n || child <= i {
                            return Err(parse_err(at(name), format!("invalid child index {child}")));
                        }
                        parents[child] += 1;
                    }
                }
            }
        }
        if let Some(bad) = (1..n).find(|&i| parents[i] != 1) {
            return Err(parse_err(
                format!("nodes[{bad}]"),
                format!("node referenced {} times", parents[bad]),
            ));
        }
        if parents[0] != 0 {
            return Err(parse_err("nodes[0]", "root must not be a child"));
        }
        Ok(())
    }

    /// Graphviz rendering: internal nodes show their feature, edges carry
    /// the `feature < threshold` / `feature ≥ threshold` test, leaves show
    /// the action name.
    pub fn to_dot(&self) -> String {
        let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
        let mut out = String::from("digraph tree {\n");
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Internal { feature, .. } => {
                    out.push_str(&format!("  n{i} [label=\"{}\"];\n", esc(&self.feature_names[*feature])));
                }
                Node::Leaf { action, .. } => {
                    out.push_str(&format!(
                        "  n{i} [shape=box, label=\"{}\"];\n",
                        esc(&self.action_names[*action])
                    ));
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Internal { feature, threshold, left, right, .. } = node {
                let name = esc(&self.feature_names[*feature]);
                out.push_str(&format!("  n{i} -> n{left} [label=\"{name} < {threshold}\"];\n"));
                out.push_str(&format!("  n{i} -> n{right} [label=\"{name} ≥ {threshold}\"];\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Node labels and labelled edges recovered from a DOT document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DotGraph {
    pub nodes: BTreeMap<usize, String>,
    pub edges: Vec<(usize, usize, String)>,
}

fn node_id(token: &str, line: usize) -> Result<usize, TreeError> {
    token
        .trim()
        .strip_prefix('n')
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| parse_err(format!("line {line}"), format!("bad node id {token:?}")))
}

fn label_of(attrs: &str, line: usize) -> Result<String, TreeError> {
    let start = attrs
        .find("label=\"")
        .ok_or_else(|| parse_err(format!("line {line}"), "missing label"))?
        + "label=\"".len();
    let mut out = String::new();
    let mut chars = attrs[start..].chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.extend(chars.next()),
            '"' => return Ok(out),
            c => out.push(c),
        }
    }
    Err(parse_err(format!("line {line}"), "unterminated label"))
}

/// Reads back the node and edge statements written by [`DecisionTreePolicy::to_dot`].
pub fn parse_dot_topology(text: &str) -> Result<DotGraph, TreeError> {
    let mut graph = DotGraph::default();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let stmt = raw.trim();
        if stmt.is_empty() || stmt.starts_with("digraph") || stmt == "}" {
            continue;
        }
        let (head, attrs) = stmt
            .split_once('[')
            .ok_or_else(|| parse_err(format!("line {line}"), "expected attribute list"))?;
        if let Some((from, to)) = head.split_once("->") {
            graph.edges.push((node_id(from, line)?, node_id(to, line)?, label_of(attrs, line)?));
        } else {
            graph.nodes.insert(node_id(head, line)?, label_of(attrs, line)?);
        }
    }
    Ok(graph)
}
