use serde::{Deserialize, Serialize};

use super::{Env, EnvError, EnvKind, Event, JointState, StepOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricOrientation {
    HigherIsBetter,
    LowerIsBetter,
}

impl MetricOrientation {
    /// Maps a raw metric onto a higher-is-better scale.
    pub fn score(self, raw: f64) -> f64 {
        match self {
            MetricOrientation::HigherIsBetter => raw,
            MetricOrientation::LowerIsBetter => -raw,
        }
    }
}

/// Sum over targets of the distance from the closest agent.
pub(super) fn coverage_distance(s: &JointState) -> u32 {
    s.fixtures
        .iter()
        .map(|&t| s.agents.iter().map(|&a| a.manhattan(t)).min().unwrap_or(0))
        .sum()
}

impl Env {
    pub fn metric_orientation(&self, team: &str) -> Result<MetricOrientation, EnvError> {
        self.team(team)?;
        Ok(match (self.kind(), team) {
            (EnvKind::CooperativeNavigation, _) | (EnvKind::PredatorPrey, "prey") => {
                MetricOrientation::LowerIsBetter
            }
            _ => MetricOrientation::HigherIsBetter,
        })
    }

    pub fn metric_name(&self, team: &str) -> &'static str {
        match (self.kind(), team) {
            (EnvKind::PhysicalDeception, _) => "success",
            (EnvKind::CooperativeNavigation, _) => "target_distance",
            (EnvKind::PredatorPrey, _) => "touches",
        }
    }
}

/// The primary performance metric of `team` over a finished episode.
///
/// Physical deception: 1 if the team succeeded at any timestep (defenders:
/// all targets covered at once; adversary: reached the true target).
/// Cooperative navigation: summed closest-agent distance to each target at
/// the final step. Predator-prey: number of predator-prey touches.
pub fn team_metric(env: &Env, trace: &[StepOutcome], team: &str) -> Result<f64, EnvError> {
    env.team(team)?;
    let horizon = env.horizon();
    match trace.last() {
        Some(last) if last.next_state.timestep >= horizon => {}
        _ => {
            return Err(EnvError::IncompleteTrace { len: trace.len(), horizon });
        }
    }
    let metric = match env.kind() {
        EnvKind::PhysicalDeception => {
            let n_targets = env.n_fixtures();
            let success = if team == "adversary" {
                trace
                    .iter()
                    .any(|o| o.events.contains(&Event::AdversaryReachedTrue))
            } else {
                trace.iter().any(|o| {
                    o.events
                        .iter()
                        .filter(|e| matches!(e, Event::TargetCovered { .. }))
                        .count()
                        == n_targets
                })
            };
            if success {
                1.0
            } else {
                0.0
            }
        }
        EnvKind::CooperativeNavigation => {
            coverage_distance(&trace.last().expect("checked above").next_state) as f64
        }
        EnvKind::PredatorPrey => trace
            .iter()
            .flat_map(|o| &o.events)
            .filter(|e| matches!(e, Event::PredatorTouch { .. }))
            .count() as f64,
    };
    Ok(metric)
}
