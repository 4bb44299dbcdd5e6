//! Behavior cloning and fitted Q-iteration baselines.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::viper::agent_schema;
use super::ExtractError;
use crate::dtree::{train_regression_tree, train_rows, DecisionTreePolicy, RegressionTree, Row, TreeParams};
use crate::env::{Env, JointAction};
use crate::experts::expert_joint_action;
use crate::rng::{derive_seed, rng_for, TAG_BEHAVIOR, TAG_ROLLOUT};

/// Inner bin edges. Bin `k` holds values at or above edge `k - 1` and
/// below edge `k`; bin 0 is everything below -1 and bin 9 everything from
/// 1 up.
pub const FQI_BIN_EDGES: [f64; 9] = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0];

pub fn bin_index(x: f64) -> usize {
    FQI_BIN_EDGES.iter().take_while(|&&e| x >= e).count()
}

/// Trains a tree per agent in `agents` on `n_samples` expert state-action
/// pairs, without any reweighting.
pub fn imitation_dt_train(
    env: &Env,
    agents: &[usize],
    n_samples: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<Vec<DecisionTreePolicy>, ExtractError> {
    let mut observations: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n_samples); agents.len()];
    let mut labels: Vec<Vec<usize>> = vec![Vec::with_capacity(n_samples); agents.len()];
    let mut collected = 0;
    let mut k = 0u64;
    while collected < n_samples {
        let mut s = env.reset(derive_seed(seed, &[TAG_ROLLOUT, u64::MAX, 0, k]))?;
        while s.timestep < env.horizon() && collected < n_samples {
            let action = expert_joint_action(env, &s);
            for (slot, &a) in agents.iter().enumerate() {
                observations[slot].push(env.features(&s, a));
                labels[slot].push(action.0[a]);
            }
            collected += 1;
            s = env.step(&s, &action)?.next_state;
        }
        k += 1;
    }
    agents
        .iter()
        .enumerate()
        .map(|(slot, &a)| {
            let rows: Vec<Row<'_>> = observations[slot]
                .iter()
                .zip(&labels[slot])
                .map(|(f, &label)| Row { features: f, label, weight: 1.0 })
                .collect();
            Ok(train_rows(&rows, &agent_schema(env, a), params)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedQConfig {
    pub n_samples: usize,
    pub n_q_iterations: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for FittedQConfig {
    fn default() -> Self {
        FittedQConfig { n_samples: 10_000, n_q_iterations: 10, max_depth: 6, seed: 0 }
    }
}

/// Greedy policy over per-action regression trees on binned observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedQPolicy {
    /// Multiplier applied to raw features before binning.
    pub scale: f64,
    pub feature_names: Vec<String>,
    pub action_names: Vec<String>,
    pub q_trees: Vec<RegressionTree>,
}

impl FittedQPolicy {
    pub fn binned(&self, features: &[f64]) -> Vec<f64> {
        features.iter().map(|&f| bin_index(f * self.scale) as f64).collect()
    }

    pub fn q_values(&self, features: &[f64]) -> Vec<f64> {
        let x = self.binned(features);
        self.q_trees.iter().map(|t| t.predict(&x)).collect()
    }

    /// Highest-valued action, lowest index on ties.
    pub fn act(&self, features: &[f64]) -> usize {
        greedy(&self.q_values(features))
    }
}

fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = a;
        }
    }
    best
}

/// One binned transition of a single agent.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BinnedTransition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next: Vec<f64>,
    pub terminal: bool,
}

/// Fitted Q-iteration over fixed transitions; returns one tree per action.
pub(crate) fn fit_q_trees(
    data: &[BinnedTransition],
    n_features: usize,
    n_actions: usize,
    n_iterations: usize,
    max_depth: usize,
    discount: f64,
) -> Result<Vec<RegressionTree>, ExtractError> {
    let mut trees: Vec<RegressionTree> = (0..n_actions).map(|_| RegressionTree::constant(0.0, n_features)).collect();
    for _ in 0..n_iterations {
        let targets: Vec<f64> = data
            .iter()
            .map(|t| {
                let future = if t.terminal {
                    0.0
                } else {
                    trees.iter().map(|q| q.predict(&t.next)).fold(f64::NEG_INFINITY, f64::max)
                };
                t.reward + discount * future
            })
            .collect();
        trees = (0..n_actions)
            .map(|a| {
                let idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].action == a).collect();
                if idx.is_empty() {
                    return Ok(RegressionTree::constant(0.0, n_features));
                }
                let x: Vec<&[f64]> = idx.iter().map(|&i| data[i].obs.as_slice()).collect();
                let y: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                Ok(train_regression_tree(&x, &y, max_depth)?)
            })
            .collect::<Result<_, ExtractError>>()?;
    }
    Ok(trees)
}

/// Fitted Q-iteration from uniformly random joint play, one greedy policy
/// per agent in `agents`. Features are scaled by `1 / (grid_size - 1)`
/// before binning.
pub fn fitted_q_iteration_train(
    env: &Env,
    agents: &[usize],
    cfg: &FittedQConfig,
) -> Result<Vec<FittedQPolicy>, ExtractError> {
    let scale = 1.0 / (env.config().grid_size.max(2) - 1) as f64;
    let mut rng = rng_for(cfg.seed, &[TAG_BEHAVIOR]);
    let mut per_agent: Vec<Vec<BinnedTransition>> = vec![Vec::with_capacity(cfg.n_samples); agents.len()];
    let bin = |f: Vec<f64>| -> Vec<f64> { f.into_iter().map(|v| bin_index(v * scale) as f64).collect() };
    let mut collected = 0;
    let mut k = 0u64;
    while collected < cfg.n_samples {
        let mut s = env.reset(derive_seed(cfg.seed, &[TAG_BEHAVIOR, k]))?;
        while s.timestep < env.horizon() && collected < cfg.n_samples {
            let action = JointAction((0..env.n_agents()).map(|a| rng.gen_range(0..env.n_actions(a))).collect());
            let out = env.step(&s, &action)?;
            let terminal = out.next_state.timestep >= env.horizon();
            for (slot, &a) in agents.iter().enumerate() {
                per_agent[slot].push(BinnedTransition {
                    obs: bin(env.features(&s, a)),
                    action: action.0[a],
                    reward: out.rewards[a],
                    next: bin(env.features(&out.next_state, a)),
                    terminal,
                });
            }
            collected += 1;
            s = out.next_state;
        }
        k += 1;
    }
    agents
        .par_iter()
        .zip(per_agent.par_iter())
        .map(|(&a, data)| {
            let schema = agent_schema(env, a);
            let q_trees = fit_q_trees(
                data,
                schema.n_features(),
                schema.n_actions(),
                cfg.n_q_iterations,
                cfg.max_depth,
                env.discount(),
            )?;
            Ok(FittedQPolicy {
                scale,
                feature_names: schema.feature_names,
                action_names: schema.action_names,
                q_trees,
            })
        })
        .collect()
}
