//! Exact finite-horizon value oracles for the expert profile.
//!
//! Environments and experts are deterministic, so a single rollout gives
//! the exact value. `Q_i(x, a)` executes `a` once and then follows the
//! experts to the horizon, summing agent `i`'s discounted rewards.

use std::sync::Arc;

use dashmap::DashMap;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvError, JointAction, JointState};
use crate::experts::{expert_joint_action, ExpertProfile};
use crate::rng::{rng_for, TAG_MC};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Joint actions drawn when the product of other agents' actions exceeds
    /// `enumeration_cap`.
    pub mc_samples: usize,
    pub enumeration_cap: usize,
    pub use_cache: bool,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { mc_samples: 16, enumeration_cap: 64, use_cache: true, seed: 0 }
    }
}

/// Which agents' actions are averaged over in [`QOracle::expected_q_gap`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Others {
    AllOthers,
    OutsideTeam(String),
}

type CacheKey = (JointState, JointAction);

pub struct QOracle {
    env: Env,
    experts: ExpertProfile,
    config: OracleConfig,
    cache: DashMap<CacheKey, Arc<[f64]>>,
}

impl QOracle {
    pub fn new(env: &Env, config: OracleConfig) -> Self {
        QOracle {
            env: env.clone(),
            experts: ExpertProfile::new(env),
            config,
            cache: DashMap::new(),
        }
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn experts(&self) -> &ExpertProfile {
        &self.experts
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    fn check_live(&self, state: &JointState) -> Result<(), EnvError> {
        if state.timestep >= self.env.horizon() {
            return Err(EnvError::EpisodeOver {
                timestep: state.timestep,
                horizon: self.env.horizon(),
            });
        }
        Ok(())
    }

    fn rollout_returns(&self, state: &JointState, joint_action: &JointAction) -> Result<Vec<f64>, EnvError> {
        let gamma = self.env.discount();
        let first = self.env.step(state, joint_action)?;
        let mut totals = first.rewards;
        let mut s = first.next_state;
        let mut scale = 1.0;
        while s.timestep < self.env.horizon() {
            scale *= gamma;
            let a = expert_joint_action(&self.env, &s);
            let out = self.env.step(&s, &a)?;
            for (t, r) in totals.iter_mut().zip(&out.rewards) {
                *t += scale * r;
            }
            s = out.next_state;
        }
        Ok(totals)
    }

    /// Discounted returns of every agent after `joint_action` at `state`.
    pub fn returns(&self, state: &JointState, joint_action: &JointAction) -> Result<Arc<[f64]>, EnvError> {
        self.check_live(state)?;
        if !self.config.use_cache {
            return Ok(self.rollout_returns(state, joint_action)?.into());
        }
        let key = (state.clone(), joint_action.clone());
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let value: Arc<[f64]> = self.rollout_returns(state, joint_action)?.into();
        self.cache.insert(key, value.clone());
        Ok(value)
    }

    pub fn q_value(&self, state: &JointState, agent: usize, joint_action: &JointAction) -> Result<f64, EnvError> {
        Ok(self.returns(state, joint_action)?[agent])
    }

    /// Expert value; zero once the horizon is reached.
    pub fn v_value(&self, state: &JointState, agent: usize) -> Result<f64, EnvError> {
        let horizon = self.env.horizon();
        if state.timestep == horizon {
            return Ok(0.0);
        }
        self.check_live(state)?;
        let a = expert_joint_action(&self.env, state);
        self.q_value(state, agent, &a)
    }

    /// `Q_i(x, a*) - min_{a_i} Q_i(x, a_i, a*_{-i})` with every other agent
    /// held at its expert action.
    pub fn fixed_others_gap(&self, state: &JointState, agent: usize) -> Result<f64, EnvError> {
        let expert = expert_joint_action(&self.env, state);
        self.gap_against(state, agent, &expert)
    }

    fn gap_against(&self, state: &JointState, agent: usize, base: &JointAction) -> Result<f64, EnvError> {
        let on_policy = self.q_value(state, agent, base)?;
        let mut worst = on_policy;
        let mut probe = base.clone();
        for a in 0..self.env.n_actions(agent) {
            if a == base.0[agent] {
                continue;
            }
            probe.0[agent] = a;
            worst = worst.min(self.q_value(state, agent, &probe)?);
        }
        Ok(on_policy - worst)
    }

    /// Mean over the other agents' joint actions of
    /// `Q_i(x, a*_i, a_o) - min_{a_i} Q_i(x, a_i, a_o)`.
    ///
    /// Agents outside `others` follow their expert action in every term.
    /// Joint actions are enumerated when there are at most
    /// `enumeration_cap` of them, otherwise `mc_samples` distinct ones are
    /// drawn (seeded by the state digest).
    pub fn expected_q_gap(&self, state: &JointState, agent: usize, others: &Others) -> Result<f64, EnvError> {
        self.check_live(state)?;
        let others: Vec<usize> = match others {
            Others::AllOthers => (0..self.env.n_agents()).filter(|&a| a != agent).collect(),
            Others::OutsideTeam(name) => {
                let team = self.env.team(name)?;
                assert!(team.agents.contains(&agent), "agent {agent} is not in team {name}");
                (0..self.env.n_agents()).filter(|a| !team.agents.contains(a)).collect()
            }
        };
        let radices: Vec<usize> = others.iter().map(|&o| self.env.n_actions(o)).collect();
        let total: usize = radices.iter().product();
        let picks: Vec<usize> = if total <= self.config.enumeration_cap {
            (0..total).collect()
        } else {
            let mut rng = rng_for(self.config.seed, &[TAG_MC, state.digest(), agent as u64]);
            let amount = self.config.mc_samples.clamp(1, total);
            let mut drawn = index::sample(&mut rng, total, amount).into_vec();
            drawn.sort_unstable();
            drawn
        };
        let expert = expert_joint_action(&self.env, state);
        let mut sum = 0.0;
        for &code in &picks {
            let mut joint = expert.clone();
            let mut rest = code;
            for (slot, &o) in others.iter().enumerate().rev() {
                joint.0[o] = rest % radices[slot];
                rest /= radices[slot];
            }
            sum += self.gap_against(state, agent, &joint)?;
        }
        Ok(sum / picks.len() as f64)
    }
}
