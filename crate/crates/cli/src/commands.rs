//! One function per subcommand. Each returns the run directory it wrote.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use maviper_core::config::RunConfig;
use maviper_core::eval::{
    crossplay, exploitability, feature_report, joint_ratio, mean_individual_ratio, individual_ratio, PolicySource,
    EXPERT_LABEL,
};
use maviper_core::pipeline::{train_algorithm, Algorithm, TrainedProfile};
use maviper_core::{AgentPolicy, DecisionTreePolicy, Env, PolicyProfile};

use crate::artifacts::{dot_file, fitted_q_file, load_run, tree_file, LoadedRun, RunDir};
use crate::report::{crossplay_rows, exploit_row, feature_rows, metric_rows, to_csv, MetricRow};
use crate::{artifact_root, CliError, ConfigArgs, TreeFormat};

fn build_env(cfg: &RunConfig) -> Result<Env, CliError> {
    Env::new(cfg.env.clone()).map_err(|e| CliError::Setup(e.to_string()))
}

fn check_training(cfg: &RunConfig, env: &Env) -> Result<(), CliError> {
    cfg.train.settings.extraction.validate().map_err(|e| CliError::Setup(e.to_string()))?;
    for t in &cfg.train.teams {
        env.team(t).map_err(|e| CliError::Setup(e.to_string()))?;
    }
    if cfg.train.seeds.is_empty() {
        return Err(CliError::Setup("no training seeds".into()));
    }
    Ok(())
}

/// Writes the learned policies of one trained seed under `prefix`.
fn write_policies(dir: &mut RunDir, prefix: &str, trained: &TrainedProfile) -> Result<(), CliError> {
    for &agent in &trained.agents {
        match &trained.profile.policies[agent] {
            AgentPolicy::Tree(t) => {
                dir.write(&format!("{prefix}{}", tree_file(trained.seed, agent)), t.to_json().as_bytes())?;
                dir.write(&format!("{prefix}{}", dot_file(trained.seed, agent)), t.to_dot().as_bytes())?;
            }
            AgentPolicy::FittedQ(q) => {
                let text = serde_json::to_string_pretty(q.as_ref()).map_err(CliError::runtime)? + "\n";
                dir.write(&format!("{prefix}{}", fitted_q_file(trained.seed, agent)), text.as_bytes())?;
            }
            AgentPolicy::Expert => {}
        }
    }
    Ok(())
}

fn progress_lines(out: &mut String, algorithm: Algorithm, trained: &TrainedProfile) {
    for (unit, records) in &trained.records {
        for r in records {
            let _ = writeln!(
                out,
                "algorithm={} seed={} unit={unit} iteration={} dataset={} score={:.6} zero_weight={:.4} \
                 mean_weight={:.4} depths={:?} leaves={:?}",
                algorithm.name(),
                trained.seed,
                r.iteration,
                r.dataset_size,
                r.selection_score,
                r.zero_weight_fraction,
                r.mean_weight,
                r.tree_depths,
                r.tree_leaves,
            );
        }
    }
}

fn train_seeds(
    env: &Env,
    cfg: &RunConfig,
    algorithm: Algorithm,
    dir: &mut RunDir,
    prefix: &str,
    progress: &mut String,
) -> Result<Vec<(u64, PolicyProfile)>, CliError> {
    let mut runs = Vec::new();
    for &seed in &cfg.train.seeds {
        info!("training {} seed {seed}", algorithm.name());
        let trained = train_algorithm(env, algorithm, &cfg.train.settings, &cfg.train.teams, seed)
            .map_err(CliError::runtime)?;
        write_policies(dir, prefix, &trained)?;
        progress_lines(progress, algorithm, &trained);
        runs.push((seed, trained.profile));
    }
    Ok(runs)
}

pub fn cmd_train(cfg: &RunConfig, args: &ConfigArgs) -> Result<PathBuf, CliError> {
    let env = build_env(cfg)?;
    check_training(cfg, &env)?;
    let mut dir = RunDir::create(&artifact_root(), "train", cfg, &args.overrides)?;
    let mut progress = String::new();
    train_seeds(&env, cfg, cfg.train.algorithm, &mut dir, "", &mut progress)?;
    dir.write("progress.log", progress.as_bytes())?;
    dir.finish()
}

fn load_runs(cfg: &RunConfig) -> Result<Vec<LoadedRun>, CliError> {
    cfg.eval.runs.iter().map(|r| load_run(Path::new(r))).collect()
}

/// Teams to report: the configured one, else every team with a learned
/// member, else every team.
fn report_teams(cfg: &RunConfig, env: &Env, runs: &[(u64, PolicyProfile)]) -> Result<Vec<String>, CliError> {
    if let Some(t) = &cfg.eval.team {
        env.team(t).map_err(|e| CliError::Setup(e.to_string()))?;
        return Ok(vec![t.clone()]);
    }
    let learned = |a: usize| runs.iter().any(|(_, p)| !matches!(p.policies[a], AgentPolicy::Expert));
    let with_learned: Vec<String> = env
        .teams()
        .iter()
        .filter(|t| t.agents.iter().any(|&a| learned(a)))
        .map(|t| t.name.clone())
        .collect();
    Ok(if with_learned.is_empty() {
        env.teams().iter().map(|t| t.name.clone()).collect()
    } else {
        with_learned
    })
}

fn ratio_rows(
    env: &Env,
    label: &str,
    depth: usize,
    runs: &[(u64, PolicyProfile)],
    teams: &[String],
    episodes: usize,
) -> Result<Vec<MetricRow>, CliError> {
    let expert = PolicyProfile::experts(env);
    let mut rows = Vec::new();
    for team in teams {
        let joint = joint_ratio(env, runs, &expert, team, episodes).map_err(CliError::runtime)?;
        rows.extend(metric_rows(&joint, label, depth, team, ""));
        for &agent in &env.team(team).map_err(CliError::runtime)?.agents {
            let ind = individual_ratio(env, runs, &expert, team, agent, episodes).map_err(CliError::runtime)?;
            rows.extend(metric_rows(&ind, label, depth, team, ""));
        }
    }
    Ok(rows)
}

pub fn cmd_evaluate(cfg: &RunConfig, args: &ConfigArgs) -> Result<PathBuf, CliError> {
    let loaded = load_runs(cfg)?;
    let mut dir = RunDir::create(&artifact_root(), "evaluate", cfg, &args.overrides)?;
    let mut rows = Vec::new();
    let mut features = Vec::new();
    if loaded.is_empty() {
        let env = build_env(cfg)?;
        let runs: Vec<(u64, PolicyProfile)> =
            cfg.train.seeds.iter().map(|&s| (s, PolicyProfile::experts(&env))).collect();
        let teams = report_teams(cfg, &env, &runs)?;
        rows.extend(ratio_rows(&env, EXPERT_LABEL, 0, &runs, &teams, cfg.eval.episodes)?);
    }
    for run in &loaded {
        let teams = report_teams(cfg, &run.env, &run.runs)?;
        let label = run.label();
        rows.extend(ratio_rows(&run.env, &label, run.manifest.max_depth, &run.runs, &teams, cfg.eval.episodes)?);
        for agent in 0..run.env.n_agents() {
            let trees: Vec<&DecisionTreePolicy> =
                run.trees.iter().filter(|((_, a), _)| *a == agent).map(|(_, t)| t).collect();
            if !trees.is_empty() {
                features.extend(feature_rows(&label, &feature_report(agent, &trees)));
            }
        }
    }
    dir.write("evaluate.csv", &to_csv(&rows)?)?;
    if !features.is_empty() {
        dir.write("features.csv", &to_csv(&features)?)?;
    }
    dir.finish()
}

pub fn cmd_crossplay(cfg: &RunConfig, args: &ConfigArgs) -> Result<PathBuf, CliError> {
    let loaded = load_runs(cfg)?;
    let Some(first) = loaded.first() else {
        return Err(CliError::Setup("crossplay needs at least one run in eval.runs".into()));
    };
    let env = first.env.clone();
    let seeds: Vec<u64> = first.runs.iter().map(|(s, _)| *s).collect();
    for run in &loaded {
        if run.config.env != first.config.env {
            return Err(CliError::Setup(format!("{} uses a different environment", run.dir.display())));
        }
        if run.runs.iter().map(|(s, _)| *s).collect::<Vec<_>>() != seeds {
            return Err(CliError::Setup(format!("{} uses different seeds", run.dir.display())));
        }
    }
    let mut sources = vec![PolicySource {
        label: EXPERT_LABEL.into(),
        runs: seeds.iter().map(|&s| (s, PolicyProfile::experts(&env))).collect(),
    }];
    sources.extend(loaded.iter().map(|r| PolicySource { label: r.label(), runs: r.runs.clone() }));
    let teams = match &cfg.eval.team {
        Some(t) => vec![t.clone()],
        None => env.teams().iter().map(|t| t.name.clone()).collect(),
    };
    let mut dir = RunDir::create(&artifact_root(), "crossplay", cfg, &args.overrides)?;
    let mut rows = Vec::new();
    for team in &teams {
        let m = crossplay(&env, &sources, team, cfg.eval.episodes).map_err(CliError::runtime)?;
        rows.extend(crossplay_rows(&m));
    }
    dir.write("crossplay.csv", &to_csv(&rows)?)?;
    dir.finish()
}

type Runs = Vec<(u64, PolicyProfile)>;

pub fn cmd_exploitability(cfg: &RunConfig, args: &ConfigArgs) -> Result<PathBuf, CliError> {
    let loaded = load_runs(cfg)?;
    let mut sources: Vec<(String, Env, Runs)> = loaded
        .iter()
        .map(|r| (r.label(), r.env.clone(), r.runs.clone()))
        .collect();
    if sources.is_empty() {
        let env = build_env(cfg)?;
        let runs = cfg.train.seeds.iter().map(|&s| (s, PolicyProfile::experts(&env))).collect();
        sources.push((EXPERT_LABEL.into(), env, runs));
    }
    let mut dir = RunDir::create(&artifact_root(), "exploitability", cfg, &args.overrides)?;
    let mut rows = Vec::new();
    for (label, env, runs) in &sources {
        let team = cfg.eval.team.clone().unwrap_or_else(|| env.teams()[0].name.clone());
        for (seed, profile) in runs {
            let r = exploitability(env, profile, &team, cfg.eval.exploit_episodes, *seed, cfg.eval.exploit_limit)
                .map_err(CliError::runtime)?;
            rows.push(exploit_row(label, *seed, &r));
        }
    }
    dir.write("exploitability.csv", &to_csv(&rows)?)?;
    dir.finish()
}

/// Variants compared by `ablate`, MAVIPER first.
pub const ABLATION_VARIANTS: [Algorithm; 4] = [
    Algorithm::Maviper,
    Algorithm::MaviperNoPrediction,
    Algorithm::MaviperIviperResampling,
    Algorithm::Iviper,
];

pub fn cmd_ablate(cfg: &RunConfig, args: &ConfigArgs) -> Result<PathBuf, CliError> {
    let env = build_env(cfg)?;
    check_training(cfg, &env)?;
    let team = match (&cfg.eval.team, cfg.train.teams.first()) {
        (Some(t), _) | (None, Some(t)) => t.clone(),
        (None, None) => env.teams()[0].name.clone(),
    };
    let mut cfg = cfg.clone();
    cfg.train.teams = vec![team.clone()];
    let mut dir = RunDir::create(&artifact_root(), "ablate", &cfg, &args.overrides)?;
    let expert = PolicyProfile::experts(&env);
    let depth = cfg.train.settings.extraction.max_depth;
    let mut progress = String::new();
    let mut joint_reports = Vec::new();
    let mut rows = Vec::new();
    for algorithm in ABLATION_VARIANTS {
        let runs = train_seeds(&env, &cfg, algorithm, &mut dir, &format!("{}/", algorithm.name()), &mut progress)?;
        let ind = mean_individual_ratio(&env, &runs, &expert, &team, cfg.eval.episodes).map_err(CliError::runtime)?;
        let joint = joint_ratio(&env, &runs, &expert, &team, cfg.eval.episodes).map_err(CliError::runtime)?;
        rows.push((algorithm, ind));
        joint_reports.push((algorithm, joint));
    }
    let maviper_joint = joint_reports[0].1.mean;
    let mut out = Vec::new();
    for (algorithm, ind) in &rows {
        out.extend(metric_rows(ind, algorithm.label(), depth, &team, ""));
    }
    for (algorithm, joint) in &joint_reports {
        let flag = if *algorithm != Algorithm::Maviper && joint.mean > maviper_joint {
            "regression_maviper_below_variant"
        } else {
            ""
        };
        out.extend(metric_rows(joint, algorithm.label(), depth, &team, flag));
    }
    dir.write("ablation.csv", &to_csv(&out)?)?;
    dir.write("progress.log", progress.as_bytes())?;
    dir.finish()
}

pub fn cmd_export_tree(path: &Path, format: TreeFormat) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Artifact { path: path.to_path_buf(), message: e.to_string() })?;
    let tree = DecisionTreePolicy::from_json(&text)
        .map_err(|e| CliError::Artifact { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(match format {
        TreeFormat::Json => tree.to_json(),
        TreeFormat::Dot => tree.to_dot(),
    })
}
