use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maviper_cli::artifacts::{load_run, sha256_hex, MANIFEST_FILE};
use maviper_cli::commands::cmd_export_tree;
use maviper_cli::{CliError, RunManifest, TreeFormat};
use maviper_core::dtree::parse_dot_topology;
use tempfile::TempDir;

const SMALL: &str = "\
[env]
kind = physical_deception
n_agents = 2

[train]
seeds = 0..2
n_iterations = 2
n_rollouts = 4
max_depth = 2
eval_episodes_for_selection = 4
imitation_samples = 300
fqi_samples = 300
fqi_iterations = 3

[eval]
episodes = 6
exploit_episodes = 2
";

struct Sandbox {
    root: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Sandbox { root: tempfile::tempdir().unwrap() }
    }

    fn config(&self, name: &str, extra: &str) -> PathBuf {
        let path = self.root.path().join(name);
        std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
        path
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_maviper"))
            .args(args)
            .env("MAVIPER_ARTIFACT_ROOT", self.root.path().join("runs"))
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> PathBuf {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        PathBuf::from(String::from_utf8_lossy(&out.stdout).trim())
    }

    fn train(&self, algorithm: &str, extra: &str) -> PathBuf {
        let cfg = self.config(&format!("{algorithm}.cfg"), extra);
        self.ok(&["train", "--config", cfg.to_str().unwrap(), "--set", &format!("train.algorithm={algorithm}")])
    }
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn csv_header(path: &Path) -> csv::StringRecord {
    csv::Reader::from_path(path).unwrap().headers().unwrap().clone()
}

fn column(path: &Path, name: &str) -> usize {
    csv_header(path).iter().position(|h| h == name).unwrap()
}

#[test]
fn unknown_key_exits_with_config_error_naming_it() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.cfg", "max_dpeth = 4\n");
    let out = sb.run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_dpeth"));
    let out = sb.run(&["train", "--config", cfg.to_str().unwrap(), "--set", "train.nope=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn override_rejects_unknown_key() {
    let sb = Sandbox::new();
    let cfg = sb.config("ok.cfg", "");
    let out = sb.run(&["train", "--config", cfg.to_str().unwrap(), "--set", "train.depht=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("depht"));
}

#[test]
fn train_writes_one_tree_per_learned_agent_and_seed() {
    let sb = Sandbox::new();
    let dir = sb.train("maviper", "");
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.seeds, vec![0, 1]);
    assert_eq!(manifest.max_depth, 2);
    for seed in 0..2 {
        let trees: Vec<_> = std::fs::read_dir(dir.join(format!("seed-{seed}")))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".json"))
            .collect();
        assert_eq!(trees.len(), 3, "{trees:?}");
    }
    for (rel, sum) in &manifest.artifacts {
        assert_eq!(&sha256_hex(&std::fs::read(dir.join(rel)).unwrap()), sum, "{rel}");
    }
    assert!(std::fs::read_to_string(dir.join("progress.log")).unwrap().lines().count() >= 2);
}

#[test]
fn corrupted_artifact_is_refused() {
    let sb = Sandbox::new();
    let dir = sb.train("iviper", "[train]\nteams = defenders\n");
    let tree = dir.join("seed-0/agent0.json");
    let mut text = std::fs::read_to_string(&tree).unwrap();
    text.push(' ');
    std::fs::write(&tree, text).unwrap();
    assert!(matches!(load_run(&dir), Err(CliError::ManifestMismatch { .. })));
    let cfg = sb.config("eval.cfg", &format!("runs = {}\n", dir.display()));
    let out = sb.run(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn expert_only_evaluation_gives_unit_ratios() {
    let sb = Sandbox::new();
    let cfg = sb.config("eval.cfg", "");
    let dir = sb.ok(&["evaluate", "--config", cfg.to_str().unwrap()]);
    let path = dir.join("evaluate.csv");
    let (metric, value) = (column(&path, "metric"), column(&path, "value"));
    let mut ratios = 0;
    for row in csv_rows(&path) {
        if row[metric].contains("ratio") && !row[value].is_empty() {
            let v: f64 = row[value].parse().unwrap();
            let stat = &row[column(&path, "seed")];
            if stat == "sd" || stat == "ci95" {
                assert_eq!(v, 0.0);
            } else {
                assert_eq!(v, 1.0, "{row:?}");
            }
            ratios += 1;
        }
    }
    assert!(ratios > 0);
}

#[test]
fn evaluate_reports_ratios_and_features_for_trained_runs() {
    let sb = Sandbox::new();
    let run = sb.train("maviper", "[train]\nteams = defenders\n");
    let cfg = sb.config("eval.cfg", &format!("runs = {}\n", run.display()));
    let dir = sb.ok(&["evaluate", "--config", cfg.to_str().unwrap()]);
    let rows = csv_rows(&dir.join("evaluate.csv"));
    let metric = column(&dir.join("evaluate.csv"), "metric");
    assert!(rows.iter().any(|r| &r[metric] == "joint_ratio"));
    assert!(rows.iter().any(|r| &r[metric] == "individual_ratio_agent1"));
    assert!(!csv_rows(&dir.join("features.csv")).is_empty());
}

#[test]
fn crossplay_with_four_trained_sources_fills_five_by_five() {
    let sb = Sandbox::new();
    let runs: Vec<String> = ["maviper", "iviper", "imitation_dt", "fitted_q"]
        .iter()
        .map(|a| sb.train(a, "").display().to_string())
        .collect();
    let cfg = sb.config("cross.cfg", &format!("team = defenders\nruns = {}\n", runs.join(",")));
    let dir = sb.ok(&["crossplay", "--config", cfg.to_str().unwrap()]);
    let path = dir.join("crossplay.csv");
    let opponent = column(&path, "opponent_source");
    let cells = csv_rows(&path).into_iter().filter(|r| &r[opponent] != "mean_excluding_expert").count();
    assert_eq!(cells, 25);
}

#[test]
fn exploitability_of_experts_is_non_negative() {
    let sb = Sandbox::new();
    let cfg = sb.config("x.cfg", "[env]\ngrid_size = 3\n");
    let dir = sb.ok(&["exploitability", "--config", cfg.to_str().unwrap()]);
    let path = dir.join("exploitability.csv");
    let col = column(&path, "exploitability");
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[col].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn oversized_exploitability_search_is_refused() {
    let sb = Sandbox::new();
    let cfg = sb.config("x.cfg", "exploit_limit = 100\n");
    let out = sb.run(&["exploitability", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn ablation_reports_every_variant() {
    let sb = Sandbox::new();
    let cfg = sb.config("ab.cfg", "");
    let dir = sb.ok(&["ablate", "--config", cfg.to_str().unwrap(), "--set", "train.seeds=0"]);
    let path = dir.join("ablation.csv");
    let (algorithm, seed) = (column(&path, "algorithm"), column(&path, "seed"));
    let means: Vec<String> =
        csv_rows(&path).into_iter().filter(|r| &r[seed] == "mean").map(|r| r[algorithm].to_string()).collect();
    assert_eq!(means.len(), 8);
    for variant in ["maviper", "maviper_no_prediction", "maviper_iviper_resampling", "iviper"] {
        assert!(dir.join(variant).join("seed-0").is_dir(), "{variant}");
    }
}

#[test]
fn exported_dot_matches_tree_topology() {
    let sb = Sandbox::new();
    let dir = sb.train("iviper", "[train]\nteams = adversary\n");
    let tree = dir.join("seed-0/agent2.json");
    let json = cmd_export_tree(&tree, TreeFormat::Json).unwrap();
    let policy = maviper_core::DecisionTreePolicy::from_json(&json).unwrap();
    let dot = sb.run(&["export-tree", "--tree", tree.to_str().unwrap()]);
    assert!(dot.status.success());
    let graph = parse_dot_topology(&String::from_utf8(dot.stdout).unwrap()).unwrap();
    assert_eq!(graph.nodes.len(), policy.nodes.len());
    assert_eq!(graph.edges.len(), policy.nodes.len() - 1);
    let leaves = graph.nodes.keys().filter(|n| !graph.edges.iter().any(|(from, _, _)| from == *n)).count();
    assert_eq!(leaves, policy.n_leaves());
    let missing = sb.run(&["export-tree", "--tree", "/nonexistent/tree.json"]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn manifest_is_written_before_results() {
    let sb = Sandbox::new();
    let cfg = maviper_core::config::RunConfig::default();
    let dir = maviper_cli::RunDir::create(&sb.root.path().join("runs"), "train", &cfg, &[]).unwrap();
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert!(!manifest.complete);
    assert!(manifest.artifacts.is_empty());
    assert!(matches!(load_run(dir.path()), Err(CliError::Artifact { .. })));
}
