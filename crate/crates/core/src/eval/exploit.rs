//! Exact best responses against a frozen team by backward induction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode_seed;
use crate::env::{Env, EnvError, JointAction, JointState};
use crate::policy::PolicyProfile;

#[derive(Debug, Error)]
pub enum ExploitError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("opponent search space of about {size} state-actions exceeds the limit of {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitabilityReport {
    pub team: String,
    /// `(best response value, incumbent value)` per start state.
    pub per_episode: Vec<(f64, f64)>,
    pub best_response_value: f64,
    pub incumbent_value: f64,
    pub exploitability: f64,
}

struct Search<'a> {
    env: &'a Env,
    profile: &'a PolicyProfile,
    opponents: Vec<usize>,
    radices: Vec<usize>,
    memo: HashMap<JointState, f64>,
}

impl Search<'_> {
    fn opponent_reward(&self, rewards: &[f64]) -> f64 {
        self.opponents.iter().map(|&o| rewards[o]).sum()
    }

    fn best(&mut self, s: &JointState) -> Result<f64, EnvError> {
        if s.timestep >= self.env.horizon() {
            return Ok(0.0);
        }
        if let Some(&v) = self.memo.get(s) {
            return Ok(v);
        }
        let base = self.profile.joint_action(self.env, s);
        let total: usize = self.radices.iter().product();
        let mut best = f64::NEG_INFINITY;
        for code in 0..total {
            let joint = decode(&base, &self.opponents, &self.radices, code);
            let out = self.env.step(s, &joint)?;
            let v = self.opponent_reward(&out.rewards) + self.env.discount() * self.best(&out.next_state)?;
            best = best.max(v);
        }
        self.memo.insert(s.clone(), best);
        Ok(best)
    }

    fn incumbent(&self, s: &JointState) -> Result<f64, EnvError> {
        let episode = self.env.rollout(s.clone(), |x| self.profile.joint_action(self.env, x))?;
        Ok(episode
            .steps
            .iter()
            .rev()
            .fold(0.0, |v, (_, out)| self.opponent_reward(&out.rewards) + self.env.discount() * v))
    }
}

/// `base` with the opponents' actions replaced by the mixed-radix digits of
/// `code` (last opponent least significant).
fn decode(base: &JointAction, opponents: &[usize], radices: &[usize], code: usize) -> JointAction {
    let mut joint = base.clone();
    let mut rest = code;
    for (slot, &o) in opponents.iter().enumerate().rev() {
        joint.0[o] = rest % radices[slot];
        rest /= radices[slot];
    }
    joint
}

fn search<'a>(env: &'a Env, profile: &'a PolicyProfile, team: &str) -> Result<Search<'a>, EnvError> {
    let members = &env.team(team)?.agents;
    let opponents: Vec<usize> = (0..env.n_agents()).filter(|a| !members.contains(a)).collect();
    let radices = opponents.iter().map(|&o| env.n_actions(o)).collect();
    Ok(Search { env, profile, opponents, radices, memo: HashMap::new() })
}

/// Best-response and incumbent opponent returns from `start` with `team`
/// frozen at `profile` and the opponents' incumbent also taken from
/// `profile`.
pub fn opponent_values(env: &Env, profile: &PolicyProfile, team: &str, start: &JointState) -> Result<(f64, f64), EnvError> {
    let mut s = search(env, profile, team)?;
    Ok((s.best(start)?, s.incumbent(start)?))
}

/// Upper bound on the state-action pairs the search may visit.
fn search_size(env: &Env, team: &str) -> Result<u128, EnvError> {
    let members = &env.team(team)?.agents;
    let cells = (env.config().grid_size * env.config().grid_size) as u128;
    let states = cells.saturating_pow(env.n_agents() as u32).saturating_mul(env.horizon() as u128);
    let actions: u128 = (0..env.n_agents())
        .filter(|a| !members.contains(a))
        .map(|o| env.n_actions(o) as u128)
        .product();
    Ok(states.saturating_mul(actions))
}

/// Mean over `episodes` start states of the opponents' best-response return
/// minus their incumbent return, against `team` frozen at `profile`.
pub fn exploitability(
    env: &Env,
    profile: &PolicyProfile,
    team: &str,
    episodes: usize,
    seed: u64,
    limit: u128,
) -> Result<ExploitabilityReport, ExploitError> {
    let size = search_size(env, team)?;
    if size > limit {
        return Err(ExploitError::StateSpaceTooLarge { size, limit });
    }
    let mut s = search(env, profile, team)?;
    let mut per_episode = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let start = env.reset(episode_seed(seed, e))?;
        per_episode.push((s.best(&start)?, s.incumbent(&start)?));
    }
    let n = episodes.max(1) as f64;
    let best_response_value = per_episode.iter().map(|p| p.0).sum::<f64>() / n;
    let incumbent_value = per_episode.iter().map(|p| p.1).sum::<f64>() / n;
    let exploitability = per_episode.iter().map(|p| p.0 - p.1).sum::<f64>() / n;
    Ok(ExploitabilityReport {
        team: team.to_string(),
        per_episode,
        best_response_value,
        incumbent_value,
        exploitability,
    })
}
