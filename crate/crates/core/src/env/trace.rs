use serde::{Deserialize, Serialize};

use super::{Cell, Env, EnvError, Event, JointAction, JointState, StepOutcome};

/// A finished (or partial) episode: the start state plus every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub initial: JointState,
    pub steps: Vec<(JointAction, StepOutcome)>,
}

/// One line of an exported trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub timestep: usize,
    pub positions: Vec<Cell>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
}

impl Episode {
    pub fn outcomes(&self) -> Vec<StepOutcome> {
        self.steps.iter().map(|(_, o)| o.clone()).collect()
    }

    pub fn final_state(&self) -> &JointState {
        self.steps.last().map_or(&self.initial, |(_, o)| &o.next_state)
    }

    pub fn metric(&self, env: &Env, team: &str) -> Result<f64, EnvError> {
        super::team_metric(env, &self.outcomes(), team)
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.steps
            .iter()
            .map(|(action, o)| TraceRecord {
                timestep: o.next_state.timestep,
                positions: o.next_state.agents.clone(),
                actions: action.0.clone(),
                rewards: o.rewards.clone(),
                events: o.events.clone(),
            })
            .collect()
    }

    /// Line-delimited JSON, one record per step.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            out.push_str(&serde_json::to_string(&r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}
