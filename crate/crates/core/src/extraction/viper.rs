use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{AggregatedDataset, DataPoint};
use super::joint::train_joint_trees;
use super::rollout::collect_rollouts;
use super::{compute_loss_weight, selection_score, tree_stats, ExtractError, ExtractionConfig, IterationRecord};
use crate::dtree::{train_rows, DecisionTreePolicy, JointContext, Row, TreeSchema};
use crate::env::Env;
use crate::oracle::QOracle;
use crate::policy::PolicyProfile;
use crate::rng::{derive_seed, rng_for, TAG_RESAMPLE, TAG_ROLLOUT};
use std::sync::Arc;

/// Result of extracting one agent's tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRun {
    pub agent: usize,
    pub tree: DecisionTreePolicy,
    pub best_iteration: usize,
    pub selection_score: f64,
    pub iterations: Vec<IterationRecord>,
}

/// Result of jointly extracting one team's trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRun {
    pub team: String,
    pub agents: Vec<usize>,
    pub trees: Vec<DecisionTreePolicy>,
    pub best_iteration: usize,
    pub selection_score: f64,
    pub iterations: Vec<IterationRecord>,
}

pub(crate) fn agent_schema(env: &Env, agent: usize) -> TreeSchema {
    TreeSchema {
        feature_names: env.feature_names(agent).to_vec(),
        action_names: env.action_names(agent),
    }
}

fn weigh(
    oracle: &QOracle,
    contexts: Vec<Arc<JointContext>>,
    agents: &[usize],
    cfg: &ExtractionConfig,
) -> Result<Vec<DataPoint>, ExtractError> {
    let n = oracle.env().n_agents();
    contexts
        .into_par_iter()
        .map(|context| {
            let mut weights = vec![0.0; n];
            for &a in agents {
                weights[a] = compute_loss_weight(oracle, &context.state, a, cfg.resampling)?;
            }
            Ok(DataPoint { context, weights })
        })
        .collect()
}

fn weight_summary(points: &[DataPoint], agents: &[usize]) -> (f64, f64) {
    let all: Vec<f64> = points.iter().flat_map(|p| agents.iter().map(|&a| p.weights[a])).collect();
    if all.is_empty() {
        return (0.0, 0.0);
    }
    let zeros = all.iter().filter(|&&w| w == 0.0).count() as f64 / all.len() as f64;
    (zeros, all.iter().sum::<f64>() / all.len() as f64)
}

struct Selection {
    best: Option<(f64, usize)>,
    stale: usize,
}

impl Selection {
    /// Records a candidate score; returns true if it is the new best.
    fn offer(&mut self, score: f64, iteration: usize) -> bool {
        match self.best {
            Some((b, _)) if score <= b => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((score, iteration));
                self.stale = 0;
                true
            }
        }
    }

    fn should_stop(&self, patience: Option<usize>) -> bool {
        patience.is_some_and(|p| self.stale >= p)
    }
}

/// Single-agent VIPER for `agent`, treating every other agent as part of the
/// environment (they follow their experts).
pub fn viper_train(env: &Env, oracle: &QOracle, agent: usize, cfg: &ExtractionConfig) -> Result<AgentRun, ExtractError> {
    cfg.validate()?;
    let experts = PolicyProfile::experts(env);
    let schema = agent_schema(env, agent);
    let params = cfg.tree_params();
    let team = env.team_of(agent).name.clone();
    let mut data = AggregatedDataset::new(cfg.max_samples);
    let mut current: Option<DecisionTreePolicy> = None;
    let mut best_tree: Option<DecisionTreePolicy> = None;
    let mut selection = Selection { best: None, stale: 0 };
    let mut iterations = Vec::new();
    for m in 0..cfg.n_iterations {
        let actors = match &current {
            None => experts.clone(),
            Some(t) => experts.clone().with(agent, t.clone()),
        };
        let contexts = collect_rollouts(env, &actors, cfg.n_rollouts, |k| {
            derive_seed(cfg.seed, &[TAG_ROLLOUT, agent as u64, m as u64, k as u64])
        })?;
        let batch = weigh(oracle, contexts, &[agent], cfg)?;
        let (zero_weight_fraction, mean_weight) = weight_summary(&batch, &[agent]);
        data.extend(batch);
        let size = cfg.resample_size.unwrap_or(data.len());
        let mut rng = rng_for(cfg.seed, &[TAG_RESAMPLE, agent as u64, m as u64]);
        let drawn = data.resample(agent, size, &mut rng);
        let rows: Vec<Row<'_>> = drawn.iter().map(|p| p.row(agent, 1.0)).collect();
        let tree = train_rows(&rows, &schema, &params)?;
        let score = selection_score(
            env,
            &experts.clone().with(agent, tree.clone()),
            &team,
            cfg.eval_episodes_for_selection,
            cfg.seed,
        )?;
        let (tree_depths, tree_leaves) = tree_stats(&[&tree]);
        iterations.push(IterationRecord {
            iteration: m,
            dataset_size: data.len(),
            zero_weight_fraction,
            mean_weight,
            selection_score: score,
            tree_depths,
            tree_leaves,
        });
        info!("agent {agent} iteration {m}: dataset {} score {score:.4}", data.len());
        if selection.offer(score, m) {
            best_tree = Some(tree.clone());
        }
        current = Some(tree);
        if selection.should_stop(cfg.early_stop_patience) {
            break;
        }
    }
    let (selection_score, best_iteration) = selection.best.expect("at least one iteration");
    Ok(AgentRun {
        agent,
        tree: best_tree.expect("at least one iteration"),
        best_iteration,
        selection_score,
        iterations,
    })
}

/// Independent extraction: one VIPER run per agent in `agents`, each with
/// every other agent following its expert.
pub fn iviper_train(
    env: &Env,
    oracle: &QOracle,
    agents: &[usize],
    cfg: &ExtractionConfig,
) -> Result<Vec<AgentRun>, ExtractError> {
    agents.par_iter().map(|&a| viper_train(env, oracle, a, cfg)).collect()
}

/// Joint extraction of `team` against expert opponents.
pub fn maviper_train(env: &Env, oracle: &QOracle, team: &str, cfg: &ExtractionConfig) -> Result<TeamRun, ExtractError> {
    cfg.validate()?;
    let agents = env.team(team)?.agents.clone();
    let threshold = cfg.effective_threshold(agents.len())?;
    let experts = PolicyProfile::experts(env);
    let schemas: Vec<TreeSchema> = agents.iter().map(|&a| agent_schema(env, a)).collect();
    let params = cfg.tree_params();
    let unit = agents[0] as u64;
    let mut data = AggregatedDataset::new(cfg.max_samples);
    let mut current: Option<Vec<DecisionTreePolicy>> = None;
    let mut best_trees: Option<Vec<DecisionTreePolicy>> = None;
    let mut selection = Selection { best: None, stale: 0 };
    let mut iterations = Vec::new();
    let with_trees = |trees: &[DecisionTreePolicy]| {
        agents
            .iter()
            .zip(trees)
            .fold(experts.clone(), |p, (&a, t)| p.with(a, t.clone()))
    };
    for m in 0..cfg.n_iterations {
        let actors = match &current {
            None => experts.clone(),
            Some(trees) => with_trees(trees),
        };
        let contexts = collect_rollouts(env, &actors, cfg.n_rollouts, |k| {
            derive_seed(cfg.seed, &[TAG_ROLLOUT, unit, m as u64, k as u64])
        })?;
        let batch = weigh(oracle, contexts, &agents, cfg)?;
        let (zero_weight_fraction, mean_weight) = weight_summary(&batch, &agents);
        data.extend(batch);
        let size = cfg.resample_size.unwrap_or(data.len());
        let drawn: Vec<Vec<DataPoint>> = agents
            .iter()
            .map(|&a| data.resample(a, size, &mut rng_for(cfg.seed, &[TAG_RESAMPLE, a as u64, m as u64])))
            .collect();
        let joint = train_joint_trees(&agents, &drawn, &schemas, &params, threshold, cfg.prediction_module)?;
        let score = selection_score(env, &with_trees(&joint.trees), team, cfg.eval_episodes_for_selection, cfg.seed)?;
        let refs: Vec<&DecisionTreePolicy> = joint.trees.iter().collect();
        let (tree_depths, tree_leaves) = tree_stats(&refs);
        iterations.push(IterationRecord {
            iteration: m,
            dataset_size: data.len(),
            zero_weight_fraction,
            mean_weight,
            selection_score: score,
            tree_depths,
            tree_leaves,
        });
        info!("team {team} iteration {m}: dataset {} score {score:.4}", data.len());
        if selection.offer(score, m) {
            best_trees = Some(joint.trees.clone());
        }
        current = Some(joint.trees);
        if selection.should_stop(cfg.early_stop_patience) {
            break;
        }
    }
    let (selection_score, best_iteration) = selection.best.expect("at least one iteration");
    Ok(TeamRun {
        team: team.to_string(),
        agents,
        trees: best_trees.expect("at least one iteration"),
        best_iteration,
        selection_score,
        iterations,
    })
}
