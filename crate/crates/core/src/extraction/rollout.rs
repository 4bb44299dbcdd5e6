use std::sync::Arc;

use rayon::prelude::*;

use crate::dtree::JointContext;
use crate::env::{Env, EnvError};
use crate::experts::expert_joint_action;
use crate::policy::PolicyProfile;

/// Runs `n_rollouts` episodes of `actors` and records every visited
/// pre-terminal state with all observations and expert labels.
///
/// Episode `k` starts from `env.reset(episode_seed(k))`.
pub fn collect_rollouts(
    env: &Env,
    actors: &PolicyProfile,
    n_rollouts: usize,
    episode_seed: impl Fn(usize) -> u64 + Sync,
) -> Result<Vec<Arc<JointContext>>, EnvError> {
    let per_episode: Vec<Result<Vec<Arc<JointContext>>, EnvError>> = (0..n_rollouts)
        .into_par_iter()
        .map(|k| {
            let mut s = env.reset(episode_seed(k))?;
            let mut out = Vec::with_capacity(env.horizon());
            while s.timestep < env.horizon() {
                let expert = expert_joint_action(env, &s);
                let action = actors.joint_action(env, &s);
                let observations = (0..env.n_agents()).map(|i| env.features(&s, i)).collect();
                let next = env.step(&s, &action)?.next_state;
                out.push(Arc::new(JointContext { state: s, observations, expert_actions: expert.0 }));
                s = next;
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for episode in per_episode {
        all.extend(episode?);
    }
    Ok(all)
}
