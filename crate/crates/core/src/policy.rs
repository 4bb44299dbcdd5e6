//! Per-agent policies and joint policy profiles.

use std::sync::Arc;

use crate::dtree::DecisionTreePolicy;
use crate::env::{Env, EnvError, Episode, JointAction, JointState};
use crate::experts::expert_joint_action;
use crate::extraction::FittedQPolicy;

#[derive(Debug, Clone, PartialEq)]
pub enum AgentPolicy {
    Expert,
    Tree(Arc<DecisionTreePolicy>),
    FittedQ(Arc<FittedQPolicy>),
}

impl From<DecisionTreePolicy> for AgentPolicy {
    fn from(t: DecisionTreePolicy) -> Self {
        AgentPolicy::Tree(Arc::new(t))
    }
}

impl From<FittedQPolicy> for AgentPolicy {
    fn from(p: FittedQPolicy) -> Self {
        AgentPolicy::FittedQ(Arc::new(p))
    }
}

/// One policy per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProfile {
    pub policies: Vec<AgentPolicy>,
}

impl PolicyProfile {
    pub fn experts(env: &Env) -> Self {
        PolicyProfile { policies: vec![AgentPolicy::Expert; env.n_agents()] }
    }

    /// Replaces agent `agent`'s policy.
    pub fn with(mut self, agent: usize, policy: impl Into<AgentPolicy>) -> Self {
        self.policies[agent] = policy.into();
        self
    }

    pub fn joint_action(&self, env: &Env, state: &JointState) -> JointAction {
        let needs_expert = self.policies.iter().any(|p| matches!(p, AgentPolicy::Expert));
        let expert = needs_expert.then(|| expert_joint_action(env, state));
        let actions = self
            .policies
            .iter()
            .enumerate()
            .map(|(agent, p)| match p {
                AgentPolicy::Expert => expert.as_ref().expect("computed above").0[agent],
                AgentPolicy::Tree(t) => t.act(&env.features(state, agent)),
                AgentPolicy::FittedQ(q) => q.act(&env.features(state, agent)),
            })
            .collect();
        JointAction(actions)
    }

    pub fn run_episode(&self, env: &Env, episode_seed: u64) -> Result<Episode, EnvError> {
        let s0 = env.reset(episode_seed)?;
        env.rollout(s0, |s| self.joint_action(env, s))
    }
}
