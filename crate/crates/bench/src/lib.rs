//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use maviper_core::env::{Env, EnvConfig};
use maviper_core::extraction::collect_rollouts;
use maviper_core::{JointContext, PolicyProfile};

pub fn physical_deception() -> Env {
    Env::new(EnvConfig::physical_deception(2)).expect("valid preset")
}

/// Expert rollouts on the default physical deception preset.
pub fn expert_contexts(env: &Env, episodes: usize) -> Vec<Arc<JointContext>> {
    collect_rollouts(env, &PolicyProfile::experts(env), episodes, |k| k as u64).expect("expert rollouts succeed")
}
