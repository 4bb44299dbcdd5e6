use std::sync::Arc;

use rand::Rng as _;

use super::*;
use crate::dtree::{JointContext, TreeParams};
use crate::env::JointState;
use crate::rng::rng_for;

fn point(observations: Vec<Vec<f64>>, expert_actions: Vec<usize>) -> DataPoint {
    let n = observations.len();
    DataPoint {
        context: Arc::new(JointContext {
            state: JointState {
                agents: vec![],
                fixtures: vec![],
                true_target: None,
                velocities: vec![],
                timestep: 0,
            },
            observations,
            expert_actions,
        }),
        weights: vec![1.0; n],
    }
}

/// Random team data where each member's label depends on its own features
/// and, noisily, on a teammate's.
fn random_team(n_agents: usize, n_points: usize, seed: u64) -> Vec<Vec<DataPoint>> {
    let mut rng = rng_for(seed, &[]);
    (0..n_agents)
        .map(|_| {
            (0..n_points)
                .map(|_| {
                    let obs: Vec<Vec<f64>> = (0..n_agents)
                        .map(|_| (0..3).map(|_| rng.gen_range(-2..=2) as f64).collect())
                        .collect();
                    let labels = obs
                        .iter()
                        .map(|o| {
                            let base = if o[0] + o[1] > 0.0 { 1 } else { 0 };
                            if rng.gen_bool(0.15) {
                                2
                            } else {
                                base
                            }
                        })
                        .collect();
                    point(obs, labels)
                })
                .collect()
        })
        .collect()
}

fn schemas(n: usize) -> Vec<TreeSchema> {
    vec![TreeSchema::anonymous(3, 3); n]
}

#[test]
fn unfiltered_growth_matches_recursive_cart() {
    let data = random_team(2, 120, 7);
    let params = TreeParams::with_depth(3);
    let agents = [0, 1];
    let joint = train_joint_trees(&agents, &data, &schemas(2), &params, 0, true).unwrap();
    let off = train_joint_trees(&agents, &data, &schemas(2), &params, 5, false).unwrap();
    for (slot, &a) in agents.iter().enumerate() {
        let rows: Vec<Row<'_>> = data[slot].iter().map(|p| p.row(a, 1.0)).collect();
        let cart = train_rows(&rows, &schemas(2)[slot], &params).unwrap();
        assert_eq!(joint.trees[slot].to_json(), cart.to_json());
        assert_eq!(off.trees[slot].to_json(), cart.to_json());
    }
    assert_eq!(joint.dropped, vec![0, 0]);
}

#[test]
fn growth_is_round_robin_by_level() {
    let data = random_team(2, 60, 1);
    let joint = train_joint_trees(&[3, 4], &data_for(&data, &[3, 4]), &schemas(2), &TreeParams::with_depth(2), 1, true)
        .unwrap();
    assert_eq!(joint.growth_log, vec![(3, 1), (4, 1), (3, 2), (4, 2)]);
}

/// Re-indexes observations so the team members are agents `ids`.
fn data_for(data: &[Vec<DataPoint>], ids: &[usize]) -> Vec<Vec<DataPoint>> {
    let width = ids.iter().max().unwrap() + 1;
    data.iter()
        .map(|d| {
            d.iter()
                .map(|p| {
                    let mut obs = vec![vec![0.0; 3]; width];
                    let mut acts = vec![0; width];
                    for (slot, &id) in ids.iter().enumerate() {
                        obs[id] = p.context.observations[slot].clone();
                        acts[id] = p.context.expert_actions[slot];
                    }
                    point(obs, acts)
                })
                .collect()
        })
        .collect()
}

#[test]
fn depth_zero_gives_majority_leaves() {
    let data = random_team(2, 50, 3);
    let joint = train_joint_trees(&[0, 1], &data, &schemas(2), &TreeParams::with_depth(0), 1, true).unwrap();
    assert!(joint.growth_log.is_empty());
    for (slot, t) in joint.trees.iter().enumerate() {
        assert_eq!(t.nodes.len(), 1);
        let rows: Vec<Row<'_>> = data[slot].iter().map(|p| p.row(slot, 1.0)).collect();
        let all: Vec<usize> = (0..rows.len()).collect();
        assert_eq!(t.act(&[0.0; 3]), argmax(&class_counts(&rows, &all, 3)));
    }
}

#[test]
fn trees_have_equal_depth_after_full_rounds() {
    let data = random_team(3, 150, 11);
    let params = TreeParams::with_depth(3);
    let agents = [0, 1, 2];
    let sch = schemas(3);
    let mut g = Grower::new(&agents, &data, &sch, &params, 2, true);
    for level in 0..3 {
        for slot in 0..3 {
            g.build_level(slot, level);
        }
        let levels: Vec<usize> = g
            .trees
            .iter()
            .map(|t| t.nodes.iter().map(|n| n.depth).max().unwrap())
            .collect();
        assert!(levels.iter().all(|&d| d <= level + 1));
        // nodes that stopped early are closed, never left open above the grown level
        for t in &g.trees {
            assert!(t
                .nodes
                .iter()
                .all(|n| !matches!(n.status, Status::Open) || n.depth == level + 1));
        }
    }
}

#[test]
fn memoized_predictions_match_direct_projection() {
    let data = random_team(2, 200, 5);
    let params = TreeParams::with_depth(4);
    let agents = [0, 1];
    let sch = schemas(2);
    let mut g = Grower::new(&agents, &data, &sch, &params, 1, true);
    g.build_level(0, 0);
    g.build_level(1, 0);
    g.build_level(0, 1);
    let queries = random_team(2, 500, 99);
    let pts: Vec<&DataPoint> = queries[0].iter().chain(&queries[1]).collect();
    g.warm(&pts);
    for p in &pts {
        for slot in 0..2 {
            let x = &p.context.observations[slot];
            assert_eq!(g.predict(slot, x), g.predict_uncached(slot, x));
        }
    }
}

#[test]
fn root_projection_is_plain_cart() {
    let data = random_team(2, 120, 8);
    let params = TreeParams::with_depth(3);
    let agents = [0, 1];
    let sch = schemas(2);
    let g = Grower::new(&agents, &data, &sch, &params, 1, true);
    let rows: Vec<Row<'_>> = data[1].iter().map(|p| p.row(1, 1.0)).collect();
    let cart = train_rows(&rows, &sch[1], &params).unwrap();
    match g.project(1, 0) {
        Projection::Tree(t) => assert_eq!(t, cart),
        other => panic!("expected a projected tree, got {other:?}"),
    }
}

#[test]
fn full_depth_leaf_projects_to_its_action() {
    let data = random_team(1, 80, 2);
    let params = TreeParams::with_depth(1);
    let sch = schemas(1);
    let mut g = Grower::new(&[0], &data, &sch, &params, 0, true);
    g.build_level(0, 0);
    for i in 1..g.trees[0].nodes.len() {
        let samples = g.trees[0].nodes[i].samples.clone();
        g.trees[0].nodes[i].status = Status::Leaf;
        let expected = argmax(&class_counts(&g.rows[0], &samples, 3));
        match g.project(0, i) {
            Projection::Action(a) => assert_eq!(a, expected),
            other => panic!("expected a leaf action, got {other:?}"),
        }
    }
}

/// Every member's projection predicts action 0 (constant features, majority
/// label 0). The probe point's expert actions make exactly `correct` of the
/// `n` members right.
fn probe_kept(n: usize, correct: usize) -> bool {
    let background = |n: usize| point(vec![vec![0.0; 3]; n], vec![0; n]);
    let mut data: Vec<Vec<DataPoint>> = (0..n).map(|_| (0..10).map(|_| background(n)).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|j| if j < correct { 0 } else { 1 }).collect();
    data[0].push(point(vec![vec![0.0; 3]; n], labels));
    let agents: Vec<usize> = (0..n).collect();
    let params = TreeParams::with_depth(1);
    let sch = schemas(n);
    let mut g = Grower::new(&agents, &data, &sch, &params, n - 1, true);
    let kept = g.build_level(0, 0);
    assert_eq!(kept.len(), 1);
    kept[0].1.contains(&10)
}

#[test]
fn threshold_drops_points_with_too_few_correct_members() {
    for n in [2, 3] {
        assert!(!probe_kept(n, n - 2), "N={n}: N-2 correct must be dropped");
        assert!(probe_kept(n, n - 1), "N={n}: N-1 correct must be kept");
    }
}

#[test]
fn team_of_three_threshold_two_drops_single_correct() {
    assert!(!probe_kept(3, 1));
    assert!(probe_kept(3, 3));
}

#[test]
fn filtered_sets_shrink_as_threshold_grows() {
    let data = random_team(3, 150, 21);
    let params = TreeParams::with_depth(2);
    let agents = [0, 1, 2];
    let sch = schemas(3);
    let mut previous: Option<Vec<usize>> = None;
    for threshold in 0..=3 {
        let mut g = Grower::new(&agents, &data, &sch, &params, threshold, true);
        let kept = g.build_level(0, 0);
        let root = &kept[0].1;
        assert!(root.iter().all(|i| *i < data[0].len()));
        if let Some(prev) = &previous {
            assert!(root.iter().all(|i| prev.contains(i)), "threshold {threshold} kept a point dropped earlier");
        }
        previous = Some(root.clone());
    }
}

#[test]
fn empty_after_filter_keeps_unfiltered_majority() {
    // every member mispredicts the only points
    let n = 2;
    let data: Vec<Vec<DataPoint>> = (0..n)
        .map(|_| {
            let mut d: Vec<DataPoint> = (0..4).map(|_| point(vec![vec![0.0; 3]; n], vec![0; n])).collect();
            d.extend((0..3).map(|_| point(vec![vec![0.0; 3]; n], vec![1; n])));
            d
        })
        .collect();
    let agents = [0, 1];
    let sch = schemas(2);
    let params = TreeParams::with_depth(2);
    let mut g = Grower::new(&agents, &data, &sch, &params, 2, true);
    // projections predict 0; a threshold of 2 keeps only all-zero points
    let kept = g.build_level(0, 0);
    assert_eq!(kept[0].1, vec![0, 1, 2, 3]);
    let data = vec![data[0].clone(), data[1][4..].to_vec()];
    let mut g = Grower::new(&agents, &data, &sch, &params, 2, true);
    let kept = g.build_level(1, 0);
    assert!(kept[0].1.is_empty());
    let (trees, dropped) = g.finish();
    assert_eq!(dropped[1], 3);
    assert_eq!(trees[1].nodes.len(), 1);
    assert_eq!(trees[1].act(&[0.0; 3]), 1);
}
