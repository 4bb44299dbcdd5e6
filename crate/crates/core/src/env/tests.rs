use proptest::prelude::*;

use super::*;
use crate::experts::expert_joint_action;

fn env(cfg: EnvConfig) -> Env {
    Env::new(cfg).unwrap()
}

#[test]
fn reset_is_deterministic() {
    let e = env(EnvConfig::physical_deception(2).with_seed(7));
    assert_eq!(e.reset(7).unwrap(), e.reset(7).unwrap());
    assert_ne!(e.reset(7).unwrap(), e.reset(8).unwrap());
}

#[test]
fn deception_places_five_distinct_cells() {
    let e = env(EnvConfig::physical_deception(2));
    for seed in 0..50 {
        let s = e.reset(seed).unwrap();
        assert_eq!(s.agents.len(), 3);
        assert_eq!(s.fixtures.len(), 2);
        let mut all: Vec<Cell> = s.agents.iter().chain(&s.fixtures).copied().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 5);
        assert!(s.true_target.unwrap() < 2);
        assert_eq!(s.timestep, 0);
    }
}

#[test]
fn tiny_predator_prey_grid_is_infeasible() {
    // A 3x3 grid has a single non-border cell, so two landmarks cannot be
    // placed even though 4 agents + 2 landmarks <= 9 cells.
    let interior = (3usize - 2).pow(2);
    assert!(interior < 2);
    let e = env(EnvConfig::predator_prey(2, 2).with_grid(3));
    assert!(matches!(e.reset(0), Err(EnvError::Config(_))));
    // one landmark fits
    let mut cfg = EnvConfig::predator_prey(2, 2).with_grid(3);
    cfg.n_landmarks = 1;
    assert!(env(cfg).reset(0).is_ok());
}

#[test]
fn config_validation() {
    assert!(Env::new(EnvConfig::physical_deception(2).with_grid(2)).is_err());
    assert!(Env::new(EnvConfig::physical_deception(2).with_horizon(0)).is_err());
    let mut cfg = EnvConfig::physical_deception(2);
    cfg.n_agents_per_role.insert(Role::Adversary, 2);
    assert!(Env::new(cfg).is_err());
    let mut cfg = EnvConfig::cooperative_navigation(3);
    cfg.discount = 0.0;
    assert!(Env::new(cfg).is_err());
}

#[test]
fn staying_keeps_positions() {
    let e = env(EnvConfig::predator_prey(2, 2));
    let s = e.reset(1).unwrap();
    let out = e.step(&s, &JointAction::stay(4)).unwrap();
    assert_eq!(out.next_state.agents, s.agents);
    assert_eq!(out.next_state.timestep, 1);
}

#[test]
fn step_past_horizon_fails() {
    let e = env(EnvConfig::cooperative_navigation(3).with_horizon(1));
    let s = e.reset(0).unwrap();
    let s1 = e.step(&s, &JointAction::stay(3)).unwrap().next_state;
    assert!(matches!(e.step(&s1, &JointAction::stay(3)), Err(EnvError::EpisodeOver { .. })));
    assert!(matches!(
        e.step(&s, &JointAction(vec![0, 0, 5])),
        Err(EnvError::InvalidAction { agent: 2, .. })
    ));
}

#[test]
fn navigation_collision_penalizes_everyone() {
    let e = env(EnvConfig::cooperative_navigation(3));
    let s = JointState {
        agents: vec![Cell::new(1, 0), Cell::new(1, 2), Cell::new(4, 4)],
        fixtures: vec![Cell::new(0, 0), Cell::new(0, 4), Cell::new(3, 3)],
        true_target: None,
        velocities: vec![(0, 0); 3],
        timestep: 0,
    };
    let out = e.step(&s, &JointAction(vec![RIGHT, LEFT, STAY])).unwrap();
    assert!(out.events.contains(&Event::Collision { a: 0, b: 1 }));
    // distances after the move: target (0,0) <- 2, (0,4) <- 4, (3,3) <- 2
    assert_eq!(out.rewards, vec![-9.0; 3]);
}

#[test]
fn defender_on_true_target_covers_it() {
    let e = env(EnvConfig::physical_deception(2));
    let s = JointState {
        agents: vec![Cell::new(2, 1), Cell::new(4, 4), Cell::new(0, 0)],
        fixtures: vec![Cell::new(2, 2), Cell::new(4, 0)],
        true_target: Some(0),
        velocities: vec![(0, 0); 3],
        timestep: 0,
    };
    let out = e.step(&s, &JointAction(vec![RIGHT, STAY, STAY])).unwrap();
    assert!(out.events.contains(&Event::TargetCovered { target: 0 }));
    assert!(!out.events.contains(&Event::TargetCovered { target: 1 }));
    assert_eq!(out.rewards[0], 4.0);
    assert_eq!(out.rewards[2], -4.0);
}

#[test]
fn moves_are_clamped_at_walls_and_landmarks() {
    let e = env(EnvConfig::predator_prey(1, 1));
    let s = JointState {
        agents: vec![Cell::new(0, 0), Cell::new(2, 3)],
        fixtures: vec![Cell::new(2, 2), Cell::new(3, 3)],
        true_target: None,
        velocities: vec![(0, 0); 2],
        timestep: 0,
    };
    // predator walks into the wall, prey tries to jump over a landmark
    let out = e.step(&s, &JointAction(vec![UP, 7])).unwrap();
    assert_eq!(out.next_state.agents, s.agents);
    assert_eq!(out.next_state.velocities, vec![(0, 0), (0, 0)]);
    let out = e.step(&s, &JointAction(vec![RIGHT, 5])).unwrap();
    assert_eq!(out.next_state.agents, vec![Cell::new(0, 1), Cell::new(0, 3)]);
    assert_eq!(out.next_state.velocities, vec![(0, 1), (-2, 0)]);
}

#[test]
fn touch_rewards() {
    let e = env(EnvConfig::predator_prey(2, 2));
    let s = JointState {
        agents: vec![Cell::new(0, 0), Cell::new(4, 4), Cell::new(0, 1), Cell::new(4, 3)],
        fixtures: vec![Cell::new(2, 2), Cell::new(3, 3)],
        true_target: None,
        velocities: vec![(0, 0); 4],
        timestep: 0,
    };
    let out = e.step(&s, &JointAction(vec![RIGHT, LEFT, STAY, STAY])).unwrap();
    assert_eq!(out.events.len(), 2);
    assert_eq!(out.rewards, vec![20.0, 20.0, -10.0, -10.0]);
}

#[test]
fn coincident_positions_give_zero_features() {
    let e = env(EnvConfig::physical_deception(1));
    let s = JointState {
        agents: vec![Cell::new(2, 2), Cell::new(0, 4)],
        fixtures: vec![Cell::new(2, 2)],
        true_target: Some(0),
        velocities: vec![(0, 0); 2],
        timestep: 0,
    };
    let o = e.observe(&s, 0);
    assert_eq!(&o.features[..2], &[0.0, 0.0]);
    assert_eq!(o.feature_names[0], "target0_drow");
    // defender sees the true target, the adversary does not
    assert_eq!(o.len(), 6);
    assert_eq!(e.observe(&s, 1).len(), 4);
}

#[test]
fn predator_sees_prey_sign() {
    let e = env(EnvConfig::predator_prey(1, 1));
    let s = JointState {
        agents: vec![Cell::new(0, 0), Cell::new(3, 1)],
        fixtures: vec![Cell::new(2, 2), Cell::new(1, 3)],
        true_target: None,
        velocities: vec![(0, 0); 2],
        timestep: 0,
    };
    let o = e.observe(&s, 0);
    let at = o.feature_names.iter().position(|n| n == "prey_sgn_drow").unwrap();
    assert_eq!(&o.features[at..at + 2], &[1.0, 1.0]);
}

#[test]
fn predator_prey_observation_lengths() {
    // predator: 4 own + 2*2 landmarks + other predator 2 + 2 prey * 4
    //           + 1 prey pair * 2 + 1 predator pair * 2 = 22
    // prey:     4 own + 4 landmarks + 2 predators * 2 + other prey 4
    //           + 1 predator pair * 2 + 1 prey pair * 2 = 20
    let e = env(EnvConfig::predator_prey(2, 2));
    for seed in 0..10 {
        let s = e.reset(seed).unwrap();
        assert_eq!(e.observe(&s, 0).len(), 22);
        assert_eq!(e.observe(&s, 1).len(), 22);
        assert_eq!(e.observe(&s, 2).len(), 20);
        assert_eq!(e.observe(&s, 3).len(), 20);
    }
    assert_eq!(e.feature_names(0).len(), 22);
}

#[test]
fn navigation_metric_zero_when_all_covered() {
    let e = env(EnvConfig::cooperative_navigation(2).with_horizon(1));
    let s = JointState {
        agents: vec![Cell::new(0, 1), Cell::new(3, 3)],
        fixtures: vec![Cell::new(0, 0), Cell::new(3, 3)],
        true_target: None,
        velocities: vec![(0, 0); 2],
        timestep: 0,
    };
    let ep = e.rollout(s, |_| JointAction(vec![LEFT, STAY])).unwrap();
    assert_eq!(ep.metric(&e, "agents").unwrap(), 0.0);
}

#[test]
fn defenders_covering_both_targets_succeed() {
    let e = env(EnvConfig::physical_deception(2));
    let s = e.reset(3).unwrap();
    let ep = e.rollout(s, |s| expert_joint_action(&e, s)).unwrap();
    let covered_at = ep
        .steps
        .iter()
        .position(|(_, o)| o.events.iter().filter(|e| matches!(e, Event::TargetCovered { .. })).count() == 2);
    assert!(covered_at.is_some());
    assert_eq!(ep.metric(&e, "defenders").unwrap(), 1.0);
}

#[test]
fn touch_count_metric_and_incomplete_trace() {
    let e = env(EnvConfig::predator_prey(2, 2).with_horizon(3));
    let s = JointState {
        agents: vec![Cell::new(0, 0), Cell::new(4, 4), Cell::new(0, 0), Cell::new(4, 4)],
        fixtures: vec![Cell::new(2, 2), Cell::new(3, 1)],
        true_target: None,
        velocities: vec![(0, 0); 4],
        timestep: 0,
    };
    let ep = e.rollout(s.clone(), |_| JointAction::stay(4)).unwrap();
    // two touching pairs per step; one step of it should count 2
    assert_eq!(ep.metric(&e, "predators").unwrap(), 6.0);
    let partial = &ep.outcomes()[..2];
    assert!(matches!(team_metric(&e, partial, "predators"), Err(EnvError::IncompleteTrace { .. })));
    assert!(matches!(team_metric(&e, &ep.outcomes(), "wolves"), Err(EnvError::UnknownTeam(_))));
}

#[test]
fn three_touch_events_count_three() {
    let e = env(EnvConfig::predator_prey(1, 1).with_horizon(3));
    let s = JointState {
        agents: vec![Cell::new(0, 0), Cell::new(0, 0)],
        fixtures: vec![Cell::new(2, 2), Cell::new(3, 1)],
        true_target: None,
        velocities: vec![(0, 0); 2],
        timestep: 0,
    };
    let ep = e.rollout(s, |_| JointAction::stay(2)).unwrap();
    assert_eq!(ep.metric(&e, "predators").unwrap(), 3.0);
}

#[test]
fn trace_lines_are_one_per_step() {
    let e = env(EnvConfig::physical_deception(2));
    let ep = e.rollout(e.reset(0).unwrap(), |s| expert_joint_action(&e, s)).unwrap();
    let text = ep.to_jsonl();
    assert_eq!(text.lines().count(), 25);
    let first: TraceRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first.timestep, 1);
    assert_eq!(first.actions.len(), 3);
}

fn any_env() -> impl Strategy<Value = EnvConfig> {
    prop_oneof![
        Just(EnvConfig::physical_deception(2)),
        Just(EnvConfig::cooperative_navigation(3)),
        Just(EnvConfig::predator_prey(2, 2)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_rollouts_respect_invariants(cfg in any_env(), seed in any::<u64>(), actions in prop::collection::vec(0usize..9, 25 * 4)) {
        let e = env(cfg);
        let s0 = e.reset(seed).unwrap();
        let mut k = 0;
        let policy = |s: &JointState| {
            let a = JointAction((0..e.n_agents()).map(|i| actions[(k + i) % actions.len()] % e.n_actions(i)).collect());
            k += e.n_agents();
            let _ = s;
            a
        };
        let ep = e.rollout(s0.clone(), policy).unwrap();
        let g = e.config().grid_size as i32;
        for (t, (_, out)) in ep.steps.iter().enumerate() {
            let s = &out.next_state;
            prop_assert_eq!(s.timestep, t + 1);
            for c in &s.agents {
                prop_assert!((0..g).contains(&c.row) && (0..g).contains(&c.col));
                if e.kind() == EnvKind::PredatorPrey {
                    prop_assert!(!s.fixtures.contains(c));
                }
            }
            for agent in 0..e.n_agents() {
                let obs = e.observe(s, agent);
                prop_assert_eq!(obs.len(), e.feature_names(agent).len());
                for (v, &bin) in obs.features.iter().zip(e.binarized_mask(agent)) {
                    if bin {
                        prop_assert!(*v == -1.0 || *v == 0.0 || *v == 1.0);
                    }
                }
            }
        }
        // replaying the recorded actions reproduces the trace exactly
        let mut replay = ep.steps.iter().map(|(a, _)| a.clone());
        let again = e.rollout(s0, |_| replay.next().unwrap()).unwrap();
        prop_assert_eq!(&again, &ep);
        for team in e.teams() {
            let m = ep.metric(&e, &team.name).unwrap();
            prop_assert!(m >= 0.0);
            if e.kind() == EnvKind::PhysicalDeception {
                prop_assert!(m == 0.0 || m == 1.0);
            }
        }
    }
}
