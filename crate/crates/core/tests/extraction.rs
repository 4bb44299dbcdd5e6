use maviper_core::env::{Cell, Env, EnvConfig, JointState};
use maviper_core::extraction::{
    collect_rollouts, compute_loss_weight, iviper_train, maviper_train, resample_indices, selection_score,
    viper_train, ExtractionConfig, Resampling,
};
use maviper_core::dtree::{train_rows, Row, TreeSchema};
use maviper_core::pipeline::{train_algorithm, Algorithm, TrainSettings};
use maviper_core::rng::{derive_seed, rng_for};
use maviper_core::{OracleConfig, PolicyProfile, QOracle};

fn small_cfg(resampling: Resampling) -> ExtractionConfig {
    ExtractionConfig {
        n_iterations: 3,
        n_rollouts: 4,
        max_depth: 3,
        eval_episodes_for_selection: 6,
        resampling,
        seed: 11,
        ..ExtractionConfig::default()
    }
}

#[test]
fn iviper_with_one_agent_is_viper() {
    let env = Env::new(EnvConfig::cooperative_navigation(1)).unwrap();
    let cfg = small_cfg(Resampling::ViperSingle);
    let oracle = QOracle::new(&env, OracleConfig::default());
    let single = viper_train(&env, &oracle, 0, &cfg).unwrap();
    let fresh = QOracle::new(&env, OracleConfig::default());
    let independent = iviper_train(&env, &fresh, &[0], &cfg).unwrap();
    assert_eq!(single.tree.to_json(), independent[0].tree.to_json());
    assert_eq!(single.iterations, independent[0].iterations);
}

#[test]
fn team_of_one_without_prediction_is_iviper() {
    let env = Env::new(EnvConfig::physical_deception(2)).unwrap();
    let mut cfg = small_cfg(Resampling::IviperCentralized);
    cfg.prediction_module = false;
    let oracle = QOracle::new(&env, OracleConfig::default());
    let team = maviper_train(&env, &oracle, "adversary", &cfg).unwrap();
    let solo = iviper_train(&env, &oracle, &[2], &cfg).unwrap();
    assert_eq!(team.trees[0].to_json(), solo[0].tree.to_json());
    assert_eq!(team.iterations, solo[0].iterations);
}

#[test]
fn team_of_one_threshold_zero_keeps_everything() {
    // with the default threshold (team size - 1 = 0) prediction on changes nothing
    let env = Env::new(EnvConfig::cooperative_navigation(1)).unwrap();
    let mut cfg = small_cfg(Resampling::IviperCentralized);
    let oracle = QOracle::new(&env, OracleConfig::default());
    cfg.prediction_module = true;
    let on = maviper_train(&env, &oracle, "agents", &cfg).unwrap();
    cfg.prediction_module = false;
    let off = maviper_train(&env, &oracle, "agents", &cfg).unwrap();
    assert_eq!(on.trees, off.trees);
}

#[test]
fn agent_order_does_not_matter() {
    let env = Env::new(EnvConfig::physical_deception(2)).unwrap();
    let cfg = small_cfg(Resampling::IviperCentralized);
    let oracle = QOracle::new(&env, OracleConfig::default());
    let forward = iviper_train(&env, &oracle, &[0, 1], &cfg).unwrap();
    let backward = iviper_train(&env, &QOracle::new(&env, OracleConfig::default()), &[1, 0], &cfg).unwrap();
    assert_eq!(forward[0].tree.to_json(), backward[1].tree.to_json());
    assert_eq!(forward[1].tree.to_json(), backward[0].tree.to_json());
}

#[test]
fn every_entry_point_is_seed_deterministic() {
    let env = Env::new(EnvConfig::physical_deception(2)).unwrap();
    let mut settings = TrainSettings {
        extraction: small_cfg(Resampling::MaviperExpected),
        imitation_samples: 300,
        ..TrainSettings::default()
    };
    settings.fitted_q.n_samples = 300;
    settings.fitted_q.n_q_iterations = 3;
    for algorithm in [
        Algorithm::Iviper,
        Algorithm::Maviper,
        Algorithm::MaviperNoPrediction,
        Algorithm::MaviperIviperResampling,
        Algorithm::ImitationDt,
        Algorithm::FittedQ,
    ] {
        let a = train_algorithm(&env, algorithm, &settings, &[], 5).unwrap();
        let b = train_algorithm(&env, algorithm, &settings, &[], 5).unwrap();
        assert_eq!(a.profile, b.profile, "{}", algorithm.name());
        assert_eq!(a.records, b.records);
    }
    let teams = vec!["adversary".to_string()];
    let a = train_algorithm(&env, Algorithm::Viper, &settings, &teams, 2).unwrap();
    let b = train_algorithm(&env, Algorithm::Viper, &settings, &teams, 2).unwrap();
    assert_eq!(a.profile, b.profile);
}

#[test]
fn dataset_grows_by_one_batch_per_iteration_until_capped() {
    let env = Env::new(EnvConfig::physical_deception(2)).unwrap();
    let mut cfg = small_cfg(Resampling::IviperCentralized);
    cfg.n_iterations = 4;
    cfg.max_samples = 250;
    let oracle = QOracle::new(&env, OracleConfig::default());
    let run = viper_train(&env, &oracle, 0, &cfg).unwrap();
    let sizes: Vec<usize> = run.iterations.iter().map(|r| r.dataset_size).collect();
    assert_eq!(sizes, vec![100, 200, 250, 250]);
}

#[test]
fn returned_policy_has_the_best_selection_score() {
    let env = Env::new(EnvConfig::physical_deception(2)).unwrap();
    let mut cfg = small_cfg(Resampling::MaviperExpected);
    cfg.n_iterations = 4;
    let oracle = QOracle::new(&env, OracleConfig::default());
    let run = maviper_train(&env, &oracle, "defenders", &cfg).unwrap();
    let best = run.iterations.iter().map(|r| r.selection_score).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(run.selection_score, best);
    let profile = run
        .agents
        .iter()
        .zip(&run.trees)
        .fold(PolicyProfile::experts(&env), |p, (&a, t)| p.with(a, t.clone()));
    let again = selection_score(&env, &profile, "defenders", cfg.eval_episodes_for_selection, cfg.seed).unwrap();
    assert_eq!(again, best);
}

#[test]
fn one_iteration_is_a_tree_on_resampled_expert_data() {
    let env = Env::new(EnvConfig::physical_deception(2)).unwrap();
    let mut cfg = small_cfg(Resampling::IviperCentralized);
    cfg.n_iterations = 1;
    let oracle = QOracle::new(&env, OracleConfig::default());
    let run = viper_train(&env, &oracle, 1, &cfg).unwrap();

    let experts = PolicyProfile::experts(&env);
    let contexts = collect_rollouts(&env, &experts, cfg.n_rollouts, |k| {
        derive_seed(cfg.seed, &[0x524f_4c4c, 1, 0, k as u64])
    })
    .unwrap();
    let weights: Vec<f64> = contexts
        .iter()
        .map(|c| compute_loss_weight(&oracle, &c.state, 1, Resampling::IviperCentralized).unwrap())
        .collect();
    let idx = resample_indices(&weights, contexts.len(), &mut rng_for(cfg.seed, &[0x5253_4d50, 1, 0]));
    let rows: Vec<Row<'_>> = idx.iter().map(|&i| contexts[i].row(1)).collect();
    let schema = TreeSchema { feature_names: env.feature_names(1).to_vec(), action_names: env.action_names(1) };
    let tree = train_rows(&rows, &schema, &cfg.tree_params()).unwrap();
    assert_eq!(run.tree, tree);
}

#[test]
fn one_rollout_visits_every_timestep() {
    let env = Env::new(EnvConfig::physical_deception(2)).unwrap();
    let data = collect_rollouts(&env, &PolicyProfile::experts(&env), 1, |_| 3).unwrap();
    assert_eq!(data.len(), 25);
    let steps: Vec<usize> = data.iter().map(|c| c.state.timestep).collect();
    assert_eq!(steps, (0..25).collect::<Vec<_>>());
}

#[test]
fn hand_computed_gap_on_a_three_cell_corridor() {
    // one navigator at (1,0), target at (1,2) on a 3x3 grid
    let state = JointState {
        agents: vec![Cell::new(1, 0)],
        fixtures: vec![Cell::new(1, 2)],
        true_target: None,
        velocities: vec![(0, 0)],
        timestep: 0,
    };
    // horizon 1: Q(right) = -1, worst Q(up) = Q(down) = -3
    let env = Env::new(EnvConfig::cooperative_navigation(1).with_grid(3).with_horizon(1)).unwrap();
    let oracle = QOracle::new(&env, OracleConfig::default());
    assert_eq!(compute_loss_weight(&oracle, &state, 0, Resampling::IviperCentralized).unwrap(), 2.0);
    // horizon 2: V = -1 + 0, worst is up then right: -3 - 2
    let env = Env::new(EnvConfig::cooperative_navigation(1).with_grid(3).with_horizon(2)).unwrap();
    let oracle = QOracle::new(&env, OracleConfig::default());
    for mode in [Resampling::ViperSingle, Resampling::IviperCentralized, Resampling::MaviperExpected] {
        assert_eq!(compute_loss_weight(&oracle, &state, 0, mode).unwrap(), 4.0);
    }
    assert_eq!(compute_loss_weight(&oracle, &state, 0, Resampling::Uniform).unwrap(), 1.0);
}

#[test]
fn weights_are_never_negative() {
    for config in [
        EnvConfig::physical_deception(2),
        EnvConfig::cooperative_navigation(3),
        EnvConfig::predator_prey(2, 1),
    ] {
        let env = Env::new(config).unwrap();
        let oracle = QOracle::new(&env, OracleConfig::default());
        let data = collect_rollouts(&env, &PolicyProfile::experts(&env), 2, |k| 40 + k as u64).unwrap();
        for c in &data {
            for agent in 0..env.n_agents() {
                for mode in [Resampling::IviperCentralized, Resampling::MaviperExpected] {
                    assert!(compute_loss_weight(&oracle, &c.state, agent, mode).unwrap() >= 0.0);
                }
            }
        }
    }
}

#[test]
fn config_rejects_invalid_budgets() {
    let cfg = ExtractionConfig { n_iterations: 0, ..ExtractionConfig::default() };
    assert!(cfg.validate().is_err());
    let mut cfg = ExtractionConfig::default();
    cfg.max_samples = cfg.n_rollouts - 1;
    assert!(cfg.validate().is_err());
    let cfg = ExtractionConfig { threshold: Some(4), ..ExtractionConfig::default() };
    assert!(cfg.effective_threshold(3).is_err());
    assert_eq!(ExtractionConfig::default().effective_threshold(3).unwrap(), 2);
}
