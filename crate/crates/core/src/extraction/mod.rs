//! Policy extraction: VIPER-style imitation for single agents (IVIPER),
//! coordinated joint extraction for teams (MAVIPER) and the imitation and
//! fitted-Q baselines.

mod baselines;
mod dataset;
mod joint;
mod rollout;
mod viper;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtree::{Criterion, DecisionTreePolicy, TreeError, TreeParams};
use crate::env::{Env, EnvError};
use crate::oracle::{OracleConfig, Others, QOracle};
use crate::policy::PolicyProfile;
use crate::rng::{derive_seed, TAG_SELECT};

pub use baselines::{
    bin_index, fitted_q_iteration_train, imitation_dt_train, FittedQConfig, FittedQPolicy, FQI_BIN_EDGES,
};
pub use dataset::{resample_indices, AggregatedDataset, DataPoint};
pub use joint::{train_joint_trees, JointTrees};
pub use rollout::collect_rollouts;
pub use viper::{iviper_train, maviper_train, viper_train, AgentRun, TeamRun};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("invalid extraction config: {0}")]
    Config(String),
}

/// How training points are weighted before resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Q-gap of the agent with every other agent at its expert action.
    ViperSingle,
    /// Same weight as `ViperSingle`; named separately for team extraction.
    IviperCentralized,
    /// Q-gap averaged over the actions of agents outside the team (or all
    /// other agents when the whole game is one team).
    MaviperExpected,
    Uniform,
}

impl Resampling {
    pub fn name(self) -> &'static str {
        match self {
            Resampling::ViperSingle => "viper_single",
            Resampling::IviperCentralized => "iviper_centralized",
            Resampling::MaviperExpected => "maviper_expected",
            Resampling::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Resampling::ViperSingle,
            Resampling::IviperCentralized,
            Resampling::MaviperExpected,
            Resampling::Uniform,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub n_iterations: usize,
    pub n_rollouts: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub criterion: Criterion,
    /// Minimum number of teammates predicted to act like the expert for a
    /// point to be kept. `None` means team size minus one.
    pub threshold: Option<usize>,
    pub resampling: Resampling,
    pub prediction_module: bool,
    /// FIFO cap on the aggregated dataset.
    pub max_samples: usize,
    /// Points drawn per resample; `None` draws as many as the dataset holds.
    pub resample_size: Option<usize>,
    pub eval_episodes_for_selection: usize,
    /// Stop after this many iterations without a better selection score.
    pub early_stop_patience: Option<usize>,
    pub seed: u64,
    pub oracle: OracleConfig,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            n_iterations: 30,
            n_rollouts: 25,
            max_depth: 4,
            min_samples_split: 2,
            criterion: Criterion::Gini,
            threshold: None,
            resampling: Resampling::MaviperExpected,
            prediction_module: true,
            max_samples: 30_000,
            resample_size: None,
            eval_episodes_for_selection: 30,
            early_stop_patience: None,
            seed: 0,
            oracle: OracleConfig::default(),
        }
    }
}

impl ExtractionConfig {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            criterion: self.criterion,
        }
    }

    pub fn validate(&self) -> Result<(), ExtractError> {
        let bad = |m: &str| Err(ExtractError::Config(m.to_string()));
        if self.n_iterations == 0 {
            return bad("n_iterations must be at least 1");
        }
        if self.n_rollouts == 0 {
            return bad("n_rollouts must be at least 1");
        }
        if self.max_samples < self.n_rollouts {
            return bad("max_samples must be at least n_rollouts");
        }
        if self.eval_episodes_for_selection == 0 {
            return bad("eval_episodes_for_selection must be at least 1");
        }
        if self.resample_size == Some(0) {
            return bad("resample_size must be positive");
        }
        Ok(())
    }

    /// Threshold used for a team of `team_size` agents.
    pub fn effective_threshold(&self, team_size: usize) -> Result<usize, ExtractError> {
        let t = self.threshold.unwrap_or(team_size.saturating_sub(1));
        if t > team_size {
            return Err(ExtractError::Config(format!(
                "threshold {t} exceeds team size {team_size}"
            )));
        }
        Ok(t)
    }
}

/// Per-iteration bookkeeping of an extraction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dataset_size: usize,
    pub zero_weight_fraction: f64,
    pub mean_weight: f64,
    pub selection_score: f64,
    pub tree_depths: Vec<usize>,
    pub tree_leaves: Vec<usize>,
}

/// Loss weight of one point for `agent` under `mode`.
pub fn compute_loss_weight(
    oracle: &QOracle,
    state: &crate::env::JointState,
    agent: usize,
    mode: Resampling,
) -> Result<f64, EnvError> {
    match mode {
        Resampling::Uniform => Ok(1.0),
        Resampling::ViperSingle | Resampling::IviperCentralized => oracle.fixed_others_gap(state, agent),
        Resampling::MaviperExpected => {
            let env = oracle.env();
            let others = if env.teams().len() == 1 {
                Others::AllOthers
            } else {
                Others::OutsideTeam(env.team_of(agent).name.clone())
            };
            oracle.expected_q_gap(state, agent, &others)
        }
    }
}

/// Mean higher-is-better score of `team` under `profile` over the shared
/// selection episodes.
pub fn selection_score(
    env: &Env,
    profile: &PolicyProfile,
    team: &str,
    episodes: usize,
    seed: u64,
) -> Result<f64, EnvError> {
    let orientation = env.metric_orientation(team)?;
    let mut total = 0.0;
    for e in 0..episodes {
        let episode = profile.run_episode(env, derive_seed(seed, &[TAG_SELECT, e as u64]))?;
        total += orientation.score(episode.metric(env, team)?);
    }
    Ok(total / episodes as f64)
}

pub(crate) fn tree_stats(trees: &[&DecisionTreePolicy]) -> (Vec<usize>, Vec<usize>) {
    (trees.iter().map(|t| t.depth()).collect(), trees.iter().map(|t| t.n_leaves()).collect())
}
