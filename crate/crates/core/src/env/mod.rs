//! Deterministic finite-horizon grid worlds.
//!
//! Three environments are provided: physical deception (defenders cover
//! targets while an adversary hunts the hidden true target), cooperative
//! navigation (agents spread over targets without colliding) and
//! predator-prey (slow predators chase fast prey around landmarks).
//!
//! Moves are simultaneous. A move that would leave the grid or enter a
//! landmark becomes a no-op. Co-occupation is allowed and reported as an
//! event.

mod metric;
mod observe;
mod trace;

pub use metric::{team_metric, MetricOrientation};
pub use trace::{Episode, TraceRecord};

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_for, TAG_RESET};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("episode is over (timestep {timestep} >= horizon {horizon})")]
    EpisodeOver { timestep: usize, horizon: usize },
    #[error("agent {agent}: action {action} out of range (action space {size})")]
    InvalidAction {
        agent: usize,
        action: usize,
        size: usize,
    },
    #[error("expected {expected} actions, got {got}")]
    JointActionLength { expected: usize, got: usize },
    #[error("trace has {len} steps but the episode needs {horizon}")]
    IncompleteTrace { len: usize, horizon: usize },
    #[error("no team named {0:?}")]
    UnknownTeam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    PhysicalDeception,
    CooperativeNavigation,
    PredatorPrey,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::PhysicalDeception => "physical_deception",
            EnvKind::CooperativeNavigation => "cooperative_navigation",
            EnvKind::PredatorPrey => "predator_prey",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "physical_deception" => Some(EnvKind::PhysicalDeception),
            "cooperative_navigation" => Some(EnvKind::CooperativeNavigation),
            "predator_prey" => Some(EnvKind::PredatorPrey),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Defender,
    Adversary,
    Navigator,
    Predator,
    Prey,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Defender => "defender",
            Role::Adversary => "adversary",
            Role::Navigator => "navigator",
            Role::Predator => "predator",
            Role::Prey => "prey",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub grid_size: usize,
    pub horizon: usize,
    pub n_agents_per_role: BTreeMap<Role, usize>,
    /// Landmarks (predator-prey only).
    pub n_landmarks: usize,
    pub seed: u64,
    /// Manhattan radius within which a target counts as covered.
    pub epsilon_cells: u32,
    pub discount: f64,
}

impl EnvConfig {
    fn base(kind: EnvKind, roles: &[(Role, usize)], n_landmarks: usize) -> Self {
        EnvConfig {
            kind,
            grid_size: 5,
            horizon: 25,
            n_agents_per_role: roles.iter().copied().collect(),
            n_landmarks,
            seed: 0,
            epsilon_cells: 0,
            discount: 1.0,
        }
    }

    /// `n_defenders` defenders and targets, one adversary.
    pub fn physical_deception(n_defenders: usize) -> Self {
        Self::base(
            EnvKind::PhysicalDeception,
            &[(Role::Defender, n_defenders), (Role::Adversary, 1)],
            0,
        )
    }

    pub fn cooperative_navigation(n_agents: usize) -> Self {
        Self::base(EnvKind::CooperativeNavigation, &[(Role::Navigator, n_agents)], 0)
    }

    pub fn predator_prey(n_predators: usize, n_prey: usize) -> Self {
        Self::base(
            EnvKind::PredatorPrey,
            &[(Role::Predator, n_predators), (Role::Prey, n_prey)],
            2,
        )
    }

    pub fn with_grid(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn count(&self, role: Role) -> usize {
        self.n_agents_per_role.get(&role).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let err = |m: String| Err(EnvError::Config(m));
        if self.grid_size < 3 {
            return err(format!("grid_size must be >= 3, got {}", self.grid_size));
        }
        if self.horizon < 1 {
            return err("horizon must be >= 1".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return err(format!("discount must lie in (0, 1], got {}", self.discount));
        }
        let allowed: &[Role] = match self.kind {
            EnvKind::PhysicalDeception => &[Role::Defender, Role::Adversary],
            EnvKind::CooperativeNavigation => &[Role::Navigator],
            EnvKind::PredatorPrey => &[Role::Predator, Role::Prey],
        };
        for (role, &n) in &self.n_agents_per_role {
            if n > 0 && !allowed.contains(role) {
                return err(format!("role {} not used by {}", role.name(), self.kind.name()));
            }
        }
        for &role in allowed {
            if self.count(role) == 0 {
                return err(format!("{} needs at least one {}", self.kind.name(), role.name()));
            }
        }
        match self.kind {
            EnvKind::PhysicalDeception if self.count(Role::Adversary) != 1 => {
                return err("physical_deception has exactly one adversary".into())
            }
            EnvKind::PredatorPrey => {}
            _ if self.n_landmarks != 0 => {
                return err(format!("{} has no landmarks", self.kind.name()))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Cell { row, col }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn offset(self, drow: i32, dcol: i32) -> Cell {
        Cell::new(self.row + drow, self.col + dcol)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Full environment configuration at one timestep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointState {
    pub agents: Vec<Cell>,
    /// Targets (physical deception, cooperative navigation) or landmarks
    /// (predator-prey).
    pub fixtures: Vec<Cell>,
    pub true_target: Option<usize>,
    /// Last displacement of each agent.
    pub velocities: Vec<(i32, i32)>,
    pub timestep: usize,
}

impl JointState {
    /// FNV-1a over the canonical field encoding.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: i64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.timestep as i64);
        eat(self.true_target.map_or(-1, |t| t as i64));
        for c in self.agents.iter().chain(&self.fixtures) {
            eat(c.row as i64);
            eat(c.col as i64);
        }
        for &(dr, dc) in &self.velocities {
            eat(dr as i64);
            eat(dc as i64);
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn stay(n_agents: usize) -> Self {
        JointAction(vec![STAY; n_agents])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    TargetCovered { target: usize },
    AdversaryReachedTrue,
    Collision { a: usize, b: usize },
    PredatorTouch { predator: usize, prey: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: JointState,
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
}

pub use observe::Observation;

pub const STAY: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;
pub const RIGHT: usize = 4;

/// Displacements indexed by action. Movers use the first five; prey also
/// use the two-cell moves.
pub const ACTION_DELTAS: [(i32, i32); 9] = [
    (0, 0),
    (-1, 0),
    (1, 0),
    (0, -1),
    (0, 1),
    (-2, 0),
    (2, 0),
    (0, -2),
    (0, 2),
];

pub const ACTION_NAMES: [&str; 9] = [
    "stay", "up", "down", "left", "right", "up2", "down2", "left2", "right2",
];

/// A group of agents sharing a goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Team {
    pub name: String,
    pub agents: Vec<usize>,
}

/// An environment instance: a validated config plus its agent layout.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    roles: Vec<Role>,
    teams: Vec<Team>,
    layouts: Vec<observe::Layout>,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let (roles, teams) = match config.kind {
            EnvKind::PhysicalDeception => {
                let n = config.count(Role::Defender);
                let mut roles = vec![Role::Defender; n];
                roles.push(Role::Adversary);
                let teams = vec![
                    Team { name: "defenders".into(), agents: (0..n).collect() },
                    Team { name: "adversary".into(), agents: vec![n] },
                ];
                (roles, teams)
            }
            EnvKind::CooperativeNavigation => {
                let n = config.count(Role::Navigator);
                (
                    vec![Role::Navigator; n],
                    vec![Team { name: "agents".into(), agents: (0..n).collect() }],
                )
            }
            EnvKind::PredatorPrey => {
                let k = config.count(Role::Predator);
                let m = config.count(Role::Prey);
                let mut roles = vec![Role::Predator; k];
                roles.extend(std::iter::repeat_n(Role::Prey, m));
                let teams = vec![
                    Team { name: "predators".into(), agents: (0..k).collect() },
                    Team { name: "prey".into(), agents: (k..k + m).collect() },
                ];
                (roles, teams)
            }
        };
        let mut env = Env { config, roles, teams, layouts: Vec::new() };
        env.layouts = (0..env.n_agents()).map(|i| observe::Layout::build(&env, i)).collect();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn kind(&self) -> EnvKind {
        self.config.kind
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn discount(&self) -> f64 {
        self.config.discount
    }

    pub fn n_agents(&self) -> usize {
        self.roles.len()
    }

    pub fn n_fixtures(&self) -> usize {
        match self.config.kind {
            EnvKind::PhysicalDeception => self.config.count(Role::Defender),
            EnvKind::CooperativeNavigation => self.config.count(Role::Navigator),
            EnvKind::PredatorPrey => self.config.n_landmarks,
        }
    }

    pub fn role(&self, agent: usize) -> Role {
        self.roles[agent]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn teams(&self) -> &[Team] {
        &self.teams
    }

    pub fn team(&self, name: &str) -> Result<&Team, EnvError> {
        self.teams
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| EnvError::UnknownTeam(name.to_string()))
    }

    pub fn team_of(&self, agent: usize) -> &Team {
        self.teams
            .iter()
            .find(|t| t.agents.contains(&agent))
            .expect("teams partition the agents")
    }

    pub fn n_actions(&self, agent: usize) -> usize {
        match self.roles[agent] {
            Role::Prey => 9,
            _ => 5,
        }
    }

    pub fn action_names(&self, agent: usize) -> Vec<String> {
        ACTION_NAMES[..self.n_actions(agent)].iter().map(|s| s.to_string()).collect()
    }

    fn in_grid(&self, c: Cell) -> bool {
        let g = self.config.grid_size as i32;
        (0..g).contains(&c.row) && (0..g).contains(&c.col)
    }

    fn is_landmark(&self, state: &JointState, c: Cell) -> bool {
        self.config.kind == EnvKind::PredatorPrey && state.fixtures.contains(&c)
    }

    /// Whether `action` actually moves `agent` (otherwise it is clamped to a no-op).
    pub fn move_is_legal(&self, state: &JointState, agent: usize, action: usize) -> bool {
        let (dr, dc) = ACTION_DELTAS[action];
        let from = state.agents[agent];
        let dest = from.offset(dr, dc);
        if !self.in_grid(dest) || self.is_landmark(state, dest) {
            return false;
        }
        if dr.abs() == 2 || dc.abs() == 2 {
            let mid = from.offset(dr / 2, dc / 2);
            if self.is_landmark(state, mid) {
                return false;
            }
        }
        true
    }

    /// Cell reached by `agent` under `action` after clamping.
    pub fn destination(&self, state: &JointState, agent: usize, action: usize) -> Cell {
        let from = state.agents[agent];
        if action != STAY && self.move_is_legal(state, agent, action) {
            let (dr, dc) = ACTION_DELTAS[action];
            from.offset(dr, dc)
        } else {
            from
        }
    }

    /// Draws an initial state. Entities occupy distinct cells; landmarks
    /// avoid the border.
    pub fn reset(&self, episode_seed: u64) -> Result<JointState, EnvError> {
        let g = self.config.grid_size as i32;
        let n_agents = self.n_agents();
        let n_fixtures = self.n_fixtures();
        let mut rng = rng_for(self.config.seed, &[TAG_RESET, episode_seed]);
        let mut cells: Vec<Cell> = (0..g)
            .flat_map(|r| (0..g).map(move |c| Cell::new(r, c)))
            .collect();
        let (fixtures, agents, true_target) = match self.config.kind {
            EnvKind::PredatorPrey => {
                let mut interior: Vec<Cell> = cells
                    .iter()
                    .copied()
                    .filter(|c| c.row > 0 && c.col > 0 && c.row < g - 1 && c.col < g - 1)
                    .collect();
                if interior.len() < n_fixtures {
                    return Err(EnvError::Config(format!(
                        "{} landmarks need non-border cells but the grid has {}",
                        n_fixtures,
                        interior.len()
                    )));
                }
                interior.shuffle(&mut rng);
                let landmarks: Vec<Cell> = interior[..n_fixtures].to_vec();
                cells.retain(|c| !landmarks.contains(c));
                if cells.len() < n_agents {
                    return Err(EnvError::Config(format!(
                        "{} agents do not fit in {} free cells",
                        n_agents,
                        cells.len()
                    )));
                }
                cells.shuffle(&mut rng);
                (landmarks, cells[..n_agents].to_vec(), None)
            }
            _ => {
                let needed = n_agents + n_fixtures;
                if cells.len() < needed {
                    return Err(EnvError::Config(format!(
                        "{} entities do not fit in {} cells",
                        needed,
                        cells.len()
                    )));
                }
                cells.shuffle(&mut rng);
                let agents = cells[..n_agents].to_vec();
                let fixtures = cells[n_agents..needed].to_vec();
                let true_target = (self.config.kind == EnvKind::PhysicalDeception)
                    .then(|| rng.gen_range(0..n_fixtures));
                (fixtures, agents, true_target)
            }
        };
        Ok(JointState {
            velocities: vec![(0, 0); agents.len()],
            agents,
            fixtures,
            true_target,
            timestep: 0,
        })
    }

    pub fn step(&self, state: &JointState, joint_action: &JointAction) -> Result<StepOutcome, EnvError> {
        if state.timestep >= self.config.horizon {
            return Err(EnvError::EpisodeOver {
                timestep: state.timestep,
                horizon: self.config.horizon,
            });
        }
        let n = self.n_agents();
        if joint_action.0.len() != n {
            return Err(EnvError::JointActionLength { expected: n, got: joint_action.0.len() });
        }
        for (agent, &action) in joint_action.0.iter().enumerate() {
            let size = self.n_actions(agent);
            if action >= size {
                return Err(EnvError::InvalidAction { agent, action, size });
            }
        }
        let mut next = state.clone();
        for (agent, &action) in joint_action.0.iter().enumerate() {
            let dest = self.destination(state, agent, action);
            let from = state.agents[agent];
            next.agents[agent] = dest;
            next.velocities[agent] = (dest.row - from.row, dest.col - from.col);
        }
        next.timestep += 1;
        let (rewards, events) = self.score(&next);
        Ok(StepOutcome { next_state: next, rewards, events })
    }

    fn covered(&self, state: &JointState, target: Cell, agents: impl Iterator<Item = usize>) -> bool {
        let eps = self.config.epsilon_cells;
        agents.map(|a| state.agents[a]).any(|c| c.manhattan(target) <= eps)
    }

    /// Rewards and events of a post-move state.
    fn score(&self, s: &JointState) -> (Vec<f64>, Vec<Event>) {
        let n = self.n_agents();
        let eps = self.config.epsilon_cells;
        let mut events = Vec::new();
        let mut rewards = vec![0.0; n];
        match self.config.kind {
            EnvKind::PhysicalDeception => {
                let n_def = n - 1;
                let adversary = n_def;
                for (t, &target) in s.fixtures.iter().enumerate() {
                    if self.covered(s, target, 0..n_def) {
                        events.push(Event::TargetCovered { target: t });
                    }
                }
                let all_covered = events.len() == s.fixtures.len();
                let true_cell = s.fixtures[s.true_target.expect("deception has a true target")];
                let adv_dist = s.agents[adversary].manhattan(true_cell);
                let reached = adv_dist <= eps;
                if reached {
                    events.push(Event::AdversaryReachedTrue);
                }
                let defender_reward = adv_dist as f64 + if all_covered { 1.0 } else { 0.0 };
                rewards[..n_def].fill(defender_reward);
                rewards[adversary] = -(adv_dist as f64) + if reached { 5.0 } else { 0.0 };
            }
            EnvKind::CooperativeNavigation => {
                let mut collisions = 0.0;
                for a in 0..n {
                    for b in a + 1..n {
                        if s.agents[a] == s.agents[b] {
                            events.push(Event::Collision { a, b });
                            collisions += 1.0;
                        }
                    }
                }
                for (t, &target) in s.fixtures.iter().enumerate() {
                    if self.covered(s, target, 0..n) {
                        events.push(Event::TargetCovered { target: t });
                    }
                }
                let reward = -(metric::coverage_distance(s) as f64) - collisions;
                rewards.fill(reward);
            }
            EnvKind::PredatorPrey => {
                let k = self.config.count(Role::Predator);
                let mut touches = 0.0;
                for pred in 0..k {
                    for prey in k..n {
                        if s.agents[pred] == s.agents[prey] {
                            events.push(Event::PredatorTouch { predator: pred, prey });
                            touches += 1.0;
                            rewards[prey] -= 10.0;
                        }
                    }
                }
                rewards[..k].fill(10.0 * touches);
            }
        }
        (rewards, events)
    }

    pub fn observe(&self, state: &JointState, agent: usize) -> Observation {
        Observation {
            features: self.features(state, agent),
            feature_names: self.layouts[agent].names.clone(),
        }
    }

    pub fn features(&self, state: &JointState, agent: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layouts[agent].names.len());
        observe::encode(self, state, agent, &mut out);
        out
    }

    pub fn feature_names(&self, agent: usize) -> &[String] {
        &self.layouts[agent].names
    }

    /// Marks features that only take values in {-1, 0, +1}.
    pub fn binarized_mask(&self, agent: usize) -> &[bool] {
        &self.layouts[agent].binarized
    }

    /// Runs `policy` from `state` to the horizon.
    pub fn rollout<F>(&self, state: JointState, mut policy: F) -> Result<Episode, EnvError>
    where
        F: FnMut(&JointState) -> JointAction,
    {
        let mut episode = Episode { initial: state.clone(), steps: Vec::new() };
        let mut s = state;
        while s.timestep < self.config.horizon {
            let action = policy(&s);
            let outcome = self.step(&s, &action)?;
            s = outcome.next_state.clone();
            episode.steps.push((action, outcome));
        }
        Ok(episode)
    }
}

#[cfg(test)]
mod tests;
