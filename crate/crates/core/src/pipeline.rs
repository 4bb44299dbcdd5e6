//! Training entry point shared by the CLI and the experiment harness: runs
//! one algorithm for one seed and assembles the resulting policy profile.

use serde::{Deserialize, Serialize};

use crate::dtree::TreeParams;
use crate::env::Env;
use crate::extraction::{
    fitted_q_iteration_train, imitation_dt_train, iviper_train, maviper_train, viper_train, ExtractError,
    ExtractionConfig, FittedQConfig, IterationRecord, Resampling,
};
use crate::oracle::QOracle;
use crate::policy::{AgentPolicy, PolicyProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Viper,
    Iviper,
    Maviper,
    MaviperNoPrediction,
    MaviperIviperResampling,
    ImitationDt,
    FittedQ,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Viper,
        Algorithm::Iviper,
        Algorithm::Maviper,
        Algorithm::MaviperNoPrediction,
        Algorithm::MaviperIviperResampling,
        Algorithm::ImitationDt,
        Algorithm::FittedQ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Viper => "viper",
            Algorithm::Iviper => "iviper",
            Algorithm::Maviper => "maviper",
            Algorithm::MaviperNoPrediction => "maviper_no_prediction",
            Algorithm::MaviperIviperResampling => "maviper_iviper_resampling",
            Algorithm::ImitationDt => "imitation_dt",
            Algorithm::FittedQ => "fitted_q",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Viper => "VIPER",
            Algorithm::Iviper => "IVIPER",
            Algorithm::Maviper => "MAVIPER",
            Algorithm::MaviperNoPrediction => "MAVIPER (No Prediction)",
            Algorithm::MaviperIviperResampling => "MAVIPER (IVIPER Resampling)",
            Algorithm::ImitationDt => "Imitation DT",
            Algorithm::FittedQ => "Fitted Q-Iteration",
        }
    }

    fn default_resampling(self) -> Resampling {
        match self {
            Algorithm::Viper => Resampling::ViperSingle,
            Algorithm::Iviper | Algorithm::MaviperIviperResampling => Resampling::IviperCentralized,
            _ => Resampling::MaviperExpected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub extraction: ExtractionConfig,
    /// Overrides the algorithm's own loss weighting when set. Ignored by the
    /// ablation that is defined by its weighting.
    pub resampling: Option<Resampling>,
    pub imitation_samples: usize,
    pub fitted_q: FittedQConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            extraction: ExtractionConfig::default(),
            resampling: None,
            imitation_samples: 10_000,
            fitted_q: FittedQConfig::default(),
        }
    }
}

impl TrainSettings {
    /// The extraction config `algorithm` actually runs with for `seed`.
    pub fn resolved(&self, algorithm: Algorithm, seed: u64) -> ExtractionConfig {
        let mut cfg = self.extraction.clone();
        cfg.seed = seed;
        cfg.oracle.seed = seed;
        cfg.resampling = match algorithm {
            Algorithm::MaviperIviperResampling => Resampling::IviperCentralized,
            _ => self.resampling.unwrap_or(algorithm.default_resampling()),
        };
        if algorithm == Algorithm::MaviperNoPrediction {
            cfg.prediction_module = false;
        }
        cfg
    }
}

/// Trees (or Q-policies) for the extracted agents plus training records.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedProfile {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Extracted agents, ascending.
    pub agents: Vec<usize>,
    /// Extracted agents use their learned policy, everyone else the expert.
    pub profile: PolicyProfile,
    /// Per-run progress, labelled by agent or team.
    pub records: Vec<(String, Vec<IterationRecord>)>,
}

/// Trains `algorithm` for the agents of `teams` (all teams when empty).
pub fn train_algorithm(
    env: &Env,
    algorithm: Algorithm,
    settings: &TrainSettings,
    teams: &[String],
    seed: u64,
) -> Result<TrainedProfile, ExtractError> {
    let team_names: Vec<String> = if teams.is_empty() {
        env.teams().iter().map(|t| t.name.clone()).collect()
    } else {
        teams.to_vec()
    };
    let mut agents = Vec::new();
    for name in &team_names {
        agents.extend(env.team(name)?.agents.iter().copied());
    }
    agents.sort_unstable();
    agents.dedup();
    let cfg = settings.resolved(algorithm, seed);
    let mut profile = PolicyProfile::experts(env);
    let mut records = Vec::new();
    match algorithm {
        Algorithm::Viper | Algorithm::Iviper => {
            if algorithm == Algorithm::Viper && agents.len() != 1 {
                return Err(ExtractError::Config(format!(
                    "viper extracts a single agent, got {}",
                    agents.len()
                )));
            }
            let oracle = QOracle::new(env, cfg.oracle.clone());
            let runs = if algorithm == Algorithm::Viper {
                vec![viper_train(env, &oracle, agents[0], &cfg)?]
            } else {
                iviper_train(env, &oracle, &agents, &cfg)?
            };
            for run in runs {
                profile.policies[run.agent] = run.tree.into();
                records.push((format!("agent{}", run.agent), run.iterations));
            }
        }
        Algorithm::Maviper | Algorithm::MaviperNoPrediction | Algorithm::MaviperIviperResampling => {
            let oracle = QOracle::new(env, cfg.oracle.clone());
            for name in &team_names {
                let run = maviper_train(env, &oracle, name, &cfg)?;
                for (&a, t) in run.agents.iter().zip(run.trees) {
                    profile.policies[a] = t.into();
                }
                records.push((run.team, run.iterations));
            }
        }
        Algorithm::ImitationDt => {
            let params = TreeParams {
                max_depth: cfg.max_depth,
                min_samples_split: cfg.min_samples_split,
                criterion: cfg.criterion,
            };
            let trees = imitation_dt_train(env, &agents, settings.imitation_samples, &params, seed)?;
            for (&a, t) in agents.iter().zip(trees) {
                profile.policies[a] = t.into();
            }
        }
        Algorithm::FittedQ => {
            let fq = FittedQConfig { seed, max_depth: cfg.max_depth, ..settings.fitted_q.clone() };
            let policies = fitted_q_iteration_train(env, &agents, &fq)?;
            for (&a, p) in agents.iter().zip(policies) {
                profile.policies[a] = AgentPolicy::from(p);
            }
        }
    }
    Ok(TrainedProfile { algorithm, seed, agents, profile, records })
}
