//! Scripted expert policies.
//!
//! Defenders, navigators and predators solve a brute-force minimum-cost
//! assignment to targets (or prey) and step greedily toward their
//! assignment. The deception adversary heads for the nearest target. Prey
//! pick the move that maximizes the distance to the closest predator.

use crate::env::{Cell, Env, EnvKind, JointAction, JointState, Role, ACTION_DELTAS, STAY};
use crate::env::{DOWN, LEFT, RIGHT, UP};

/// Lexicographically first assignment of rows to distinct columns that
/// minimizes total cost. Requires `costs.len() <= costs[0].len()`.
pub fn min_cost_assignment(costs: &[Vec<u32>]) -> Vec<usize> {
    fn search(
        costs: &[Vec<u32>],
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<usize>,
        acc: u32,
        best: &mut Option<(u32, Vec<usize>)>,
    ) {
        if row == costs.len() {
            if best.as_ref().is_none_or(|(c, _)| acc < *c) {
                *best = Some((acc, current.clone()));
            }
            return;
        }
        for col in 0..costs[row].len() {
            if used[col] {
                continue;
            }
            used[col] = true;
            current.push(col);
            search(costs, row + 1, used, current, acc + costs[row][col], best);
            current.pop();
            used[col] = false;
        }
    }
    if costs.is_empty() {
        return Vec::new();
    }
    let mut best = None;
    let mut used = vec![false; costs[0].len()];
    search(costs, 0, &mut used, &mut Vec::new(), 0, &mut best);
    best.map(|(_, a)| a).unwrap_or_default()
}

/// One-cell step toward `goal` along the axis with the larger gap (rows
/// win ties), falling back to the other axis when blocked.
pub fn greedy_step(env: &Env, state: &JointState, agent: usize, goal: Cell) -> usize {
    let me = state.agents[agent];
    let (dr, dc) = (goal.row - me.row, goal.col - me.col);
    let row_move = match dr.signum() {
        -1 => Some(UP),
        1 => Some(DOWN),
        _ => None,
    };
    let col_move = match dc.signum() {
        -1 => Some(LEFT),
        1 => Some(RIGHT),
        _ => None,
    };
    let order = if dr.abs() >= dc.abs() {
        [row_move, col_move]
    } else {
        [col_move, row_move]
    };
    order
        .into_iter()
        .flatten()
        .find(|&a| env.move_is_legal(state, agent, a))
        .unwrap_or(STAY)
}

fn assigned_goals(state: &JointState, members: &[usize], goals: &[Cell]) -> Vec<Cell> {
    let costs: Vec<Vec<u32>> = members
        .iter()
        .map(|&a| goals.iter().map(|&g| state.agents[a].manhattan(g)).collect())
        .collect();
    if members.len() <= goals.len() {
        min_cost_assignment(&costs).into_iter().map(|g| goals[g]).collect()
    } else {
        // More chasers than quarry: everyone takes the nearest.
        costs.iter().map(|row| goals[argmin(row)]).collect()
    }
}

fn argmin(values: &[u32]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by_key(|&(i, &v)| (v, i))
        .map_or(0, |(i, _)| i)
}

fn prey_escape(env: &Env, state: &JointState, agent: usize) -> usize {
    let predators: Vec<Cell> = (0..env.n_agents())
        .filter(|&a| env.role(a) == Role::Predator)
        .map(|a| state.agents[a])
        .collect();
    let mut best = (0u32, 0i32, STAY);
    let mut first = true;
    for action in 0..env.n_actions(agent) {
        if action != STAY && !env.move_is_legal(state, agent, action) {
            continue;
        }
        let dest = env.destination(state, agent, action);
        let safety = predators.iter().map(|&p| p.manhattan(dest)).min().unwrap_or(u32::MAX);
        let (dr, dc) = ACTION_DELTAS[action];
        let length = dr.abs() + dc.abs();
        // max safety, then longer move, then lower action index
        if first || (safety, length) > (best.0, best.1) {
            best = (safety, length, action);
            first = false;
        }
    }
    best.2
}

/// The scripted expert for every agent of an environment.
#[derive(Debug, Clone)]
pub struct ExpertProfile {
    env: Env,
}

impl ExpertProfile {
    pub fn new(env: &Env) -> Self {
        ExpertProfile { env: env.clone() }
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn roles(&self) -> &[Role] {
        self.env.roles()
    }

    pub fn act(&self, state: &JointState, agent: usize) -> usize {
        expert_act(&self.env, state, agent)
    }

    pub fn joint_action(&self, state: &JointState) -> JointAction {
        expert_joint_action(&self.env, state)
    }
}

/// Expert action of a single agent.
pub fn expert_act(env: &Env, state: &JointState, agent: usize) -> usize {
    match env.role(agent) {
        Role::Adversary => {
            let me = state.agents[agent];
            let costs: Vec<u32> = state.fixtures.iter().map(|&t| me.manhattan(t)).collect();
            greedy_step(env, state, agent, state.fixtures[argmin(&costs)])
        }
        Role::Prey => prey_escape(env, state, agent),
        Role::Defender | Role::Navigator | Role::Predator => {
            let team = env.team_of(agent).agents.clone();
            let goals = chase_goals(env, state);
            let goal = assigned_goals(state, &team, &goals);
            let slot = team.iter().position(|&a| a == agent).expect("agent in own team");
            greedy_step(env, state, agent, goal[slot])
        }
    }
}

fn chase_goals(env: &Env, state: &JointState) -> Vec<Cell> {
    match env.kind() {
        EnvKind::PredatorPrey => (0..env.n_agents())
            .filter(|&a| env.role(a) == Role::Prey)
            .map(|a| state.agents[a])
            .collect(),
        _ => state.fixtures.clone(),
    }
}

/// Expert actions of all agents; the team assignment is solved once.
pub fn expert_joint_action(env: &Env, state: &JointState) -> JointAction {
    let mut actions = vec![STAY; env.n_agents()];
    for team in env.teams() {
        let role = env.role(team.agents[0]);
        if matches!(role, Role::Defender | Role::Navigator | Role::Predator) {
            let goals = chase_goals(env, state);
            let assigned = assigned_goals(state, &team.agents, &goals);
            for (&agent, goal) in team.agents.iter().zip(assigned) {
                actions[agent] = greedy_step(env, state, agent, goal);
            }
        } else {
            for &agent in &team.agents {
                actions[agent] = expert_act(env, state, agent);
            }
        }
    }
    JointAction(actions)
}
