//! Interpretable decision-tree policies extracted from multi-agent experts.
//!
//! The crate bundles deterministic grid-world Markov games, scripted experts
//! with exact value oracles, a CART learner, the IVIPER and MAVIPER
//! extraction algorithms with their baselines, and the evaluation harness
//! (performance ratios, cross-play, exploitability, feature importances).

pub mod config;
pub mod dtree;
pub mod env;
pub mod eval;
pub mod experts;
pub mod extraction;
pub mod oracle;
pub mod pipeline;
pub mod policy;
pub mod rng;

pub use dtree::{
    train_decision_tree, train_regression_tree, Criterion, DecisionTreePolicy, JointContext, RegressionTree,
    TreeError, TreeParams, TreeSchema, WeightedSample,
};
pub use env::{
    team_metric, Cell, Env, EnvConfig, EnvError, EnvKind, Episode, Event, JointAction, JointState,
    Observation, Role, StepOutcome, Team,
};
pub use experts::{expert_act, expert_joint_action, ExpertProfile};
pub use oracle::{OracleConfig, Others, QOracle};
pub use policy::{AgentPolicy, PolicyProfile};
