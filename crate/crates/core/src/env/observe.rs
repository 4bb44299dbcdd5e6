use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Cell, Env, EnvKind, JointState, Role};

/// One agent's feature vector with parallel labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub features: Vec<f64>,
    pub feature_names: Arc<[String]>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone)]
pub(super) struct Layout {
    pub names: Arc<[String]>,
    pub binarized: Arc<[bool]>,
}

fn agent_label(env: &Env, agent: usize) -> String {
    let role = env.role(agent);
    let same_role = (0..agent).filter(|&a| env.role(a) == role).count();
    let total = env.roles().iter().filter(|&&r| r == role).count();
    if total == 1 {
        role.name().to_string()
    } else {
        format!("{}{}", role.name(), same_role)
    }
}

fn pairs(members: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    members
        .iter()
        .enumerate()
        .flat_map(move |(i, &a)| members[i + 1..].iter().map(move |&b| (a, b)))
}

/// Whether agent `other` exposes its velocity to observer `agent`
/// (predator-prey: only prey velocities are visible).
fn shows_velocity(env: &Env, other: usize) -> bool {
    env.role(other) == Role::Prey
}

impl Layout {
    pub fn build(env: &Env, agent: usize) -> Layout {
        let mut names = Vec::new();
        let mut binarized = Vec::new();
        let mut push = |name: String, bin: bool| {
            names.push(name);
            binarized.push(bin);
        };
        match env.kind() {
            EnvKind::PhysicalDeception | EnvKind::CooperativeNavigation => {
                for t in 0..env.n_fixtures() {
                    push(format!("target{t}_drow"), false);
                    push(format!("target{t}_dcol"), false);
                }
                for other in (0..env.n_agents()).filter(|&o| o != agent) {
                    let label = agent_label(env, other);
                    push(format!("{label}_drow"), false);
                    push(format!("{label}_dcol"), false);
                }
                if env.role(agent) == Role::Defender {
                    push("true_target_drow".into(), false);
                    push("true_target_dcol".into(), false);
                }
            }
            EnvKind::PredatorPrey => {
                for n in ["self_row", "self_col", "self_vrow", "self_vcol"] {
                    push(n.into(), false);
                }
                for l in 0..env.n_fixtures() {
                    push(format!("landmark{l}_sgn_drow"), true);
                    push(format!("landmark{l}_sgn_dcol"), true);
                }
                for other in (0..env.n_agents()).filter(|&o| o != agent) {
                    let label = agent_label(env, other);
                    push(format!("{label}_sgn_drow"), true);
                    push(format!("{label}_sgn_dcol"), true);
                    if shows_velocity(env, other) {
                        push(format!("{label}_sgn_dvrow"), true);
                        push(format!("{label}_sgn_dvcol"), true);
                    }
                }
                let own = &env.team_of(agent).agents;
                let opponents: Vec<usize> = env
                    .teams()
                    .iter()
                    .filter(|t| !t.agents.contains(&agent))
                    .flat_map(|t| t.agents.iter().copied())
                    .collect();
                for members in [&opponents, own] {
                    for (a, b) in pairs(members) {
                        let (la, lb) = (agent_label(env, a), agent_label(env, b));
                        push(format!("sgn_{la}_{lb}_drow"), true);
                        push(format!("sgn_{la}_{lb}_dcol"), true);
                    }
                }
            }
        }
        Layout { names: names.into(), binarized: binarized.into() }
    }
}

fn rel(from: Cell, to: Cell) -> (f64, f64) {
    ((to.row - from.row) as f64, (to.col - from.col) as f64)
}

fn sgn(v: i32) -> f64 {
    v.signum() as f64
}

pub(super) fn encode(env: &Env, s: &JointState, agent: usize, out: &mut Vec<f64>) {
    let me = s.agents[agent];
    match env.kind() {
        EnvKind::PhysicalDeception | EnvKind::CooperativeNavigation => {
            for &t in &s.fixtures {
                let (dr, dc) = rel(me, t);
                out.extend([dr, dc]);
            }
            for other in (0..env.n_agents()).filter(|&o| o != agent) {
                let (dr, dc) = rel(me, s.agents[other]);
                out.extend([dr, dc]);
            }
            if env.role(agent) == Role::Defender {
                let truth = s.fixtures[s.true_target.expect("deception has a true target")];
                let (dr, dc) = rel(me, truth);
                out.extend([dr, dc]);
            }
        }
        EnvKind::PredatorPrey => {
            let (vr, vc) = s.velocities[agent];
            out.extend([me.row as f64, me.col as f64, vr as f64, vc as f64]);
            for &l in &s.fixtures {
                out.extend([sgn(l.row - me.row), sgn(l.col - me.col)]);
            }
            for other in (0..env.n_agents()).filter(|&o| o != agent) {
                let o = s.agents[other];
                out.extend([sgn(o.row - me.row), sgn(o.col - me.col)]);
                if shows_velocity(env, other) {
                    let (ovr, ovc) = s.velocities[other];
                    out.extend([sgn(ovr - vr), sgn(ovc - vc)]);
                }
            }
            let own = &env.team_of(agent).agents;
            let opponents: Vec<usize> = env
                .teams()
                .iter()
                .filter(|t| !t.agents.contains(&agent))
                .flat_map(|t| t.agents.iter().copied())
                .collect();
            for members in [&opponents, own] {
                for (a, b) in pairs(members) {
                    let (ca, cb) = (s.agents[a], s.agents[b]);
                    out.extend([sgn(ca.row - cb.row), sgn(ca.col - cb.col)]);
                }
            }
        }
    }
}
