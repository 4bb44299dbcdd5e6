//! Run directories, manifests and checksummed artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use maviper_core::config::RunConfig;
use maviper_core::extraction::FittedQPolicy;
use maviper_core::{DecisionTreePolicy, Env, PolicyProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable naming the directory that holds run directories.
pub const ARTIFACT_ROOT_VAR: &str = "MAVIPER_ARTIFACT_ROOT";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn artifact_root() -> PathBuf {
    std::env::var_os(ARTIFACT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_digest(cfg: &RunConfig) -> String {
    sha256_hex(cfg.canonical().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    /// Canonical text of the effective config (file plus overrides).
    pub config: String,
    pub overrides: Vec<String>,
    pub seeds: Vec<u64>,
    pub algorithm: String,
    pub environment: String,
    pub max_depth: usize,
    pub created_unix: u64,
    pub wall_clock_secs: Option<f64>,
    /// False until every output has been written.
    pub complete: bool,
    /// Output path (relative to the run directory) to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

/// A run directory being written.
pub struct RunDir {
    path: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl RunDir {
    /// Creates `<root>/<command>-<digest prefix>-<unix time>` and writes the
    /// initial manifest before anything else.
    pub fn create(root: &Path, command: &str, cfg: &RunConfig, overrides: &[String]) -> Result<Self, CliError> {
        let digest = config_digest(cfg);
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        std::fs::create_dir_all(root)?;
        let stem = format!("{command}-{}-{created_unix}", &digest[..12]);
        let mut path = root.join(&stem);
        let mut n = 1;
        loop {
            match std::fs::create_dir(&path) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    n += 1;
                    path = root.join(format!("{stem}-{n}"));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest: digest,
            config: cfg.canonical(),
            overrides: overrides.to_vec(),
            seeds: cfg.train.seeds.clone(),
            algorithm: cfg.train.algorithm.name().to_string(),
            environment: cfg.env.kind.name().to_string(),
            max_depth: cfg.train.settings.extraction.max_depth,
            created_unix,
            wall_clock_secs: None,
            complete: false,
            artifacts: BTreeMap::new(),
        };
        let dir = RunDir { path, manifest, started: Instant::now() };
        dir.write_manifest()?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(CliError::runtime)? + "\n";
        std::fs::write(self.path.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Writes `bytes` to `rel` and records its checksum.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let full = self.path.join(rel);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&full, bytes)?;
        self.manifest.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(full)
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.manifest.wall_clock_secs = Some(self.started.elapsed().as_secs_f64());
        self.manifest.complete = true;
        self.write_manifest()?;
        Ok(self.path)
    }
}

pub fn tree_file(seed: u64, agent: usize) -> String {
    format!("seed-{seed}/agent{agent}.json")
}

pub fn dot_file(seed: u64, agent: usize) -> String {
    format!("seed-{seed}/agent{agent}.dot")
}

pub fn fitted_q_file(seed: u64, agent: usize) -> String {
    format!("seed-{seed}/agent{agent}.fqi.json")
}

/// A finished training run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub config: RunConfig,
    pub env: Env,
    /// One profile per seed; agents without an artifact follow the expert.
    pub runs: Vec<(u64, PolicyProfile)>,
    /// Trees by `(seed, agent)`.
    pub trees: BTreeMap<(u64, usize), DecisionTreePolicy>,
}

impl LoadedRun {
    pub fn label(&self) -> String {
        maviper_core::pipeline::Algorithm::parse(&self.manifest.algorithm)
            .map_or_else(|| self.manifest.algorithm.clone(), |a| a.label().to_string())
    }
}

fn artifact_err(path: &Path, message: impl std::fmt::Display) -> CliError {
    CliError::Artifact { path: path.to_path_buf(), message: message.to_string() }
}

/// Reads a run directory, checking every recorded checksum.
pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| artifact_err(&manifest_path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| artifact_err(&manifest_path, e))?;
    if !manifest.complete {
        return Err(artifact_err(dir, "run did not finish"));
    }
    let mut files = BTreeMap::new();
    for (rel, sum) in &manifest.artifacts {
        let path = dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| artifact_err(&path, e))?;
        if &sha256_hex(&bytes) != sum {
            return Err(CliError::ManifestMismatch { path });
        }
        files.insert(rel.clone(), bytes);
    }
    let config = RunConfig::parse(&manifest.config)?;
    let env = Env::new(config.env.clone()).map_err(|e| artifact_err(&manifest_path, e))?;
    let mut runs = Vec::new();
    let mut trees = BTreeMap::new();
    for &seed in &manifest.seeds {
        let mut profile = PolicyProfile::experts(&env);
        for agent in 0..env.n_agents() {
            if let Some(bytes) = files.get(&tree_file(seed, agent)) {
                let path = dir.join(tree_file(seed, agent));
                let text = std::str::from_utf8(bytes).map_err(|e| artifact_err(&path, e))?;
                let tree = DecisionTreePolicy::from_json(text).map_err(|e| artifact_err(&path, e))?;
                profile = profile.with(agent, tree.clone());
                trees.insert((seed, agent), tree);
            } else if let Some(bytes) = files.get(&fitted_q_file(seed, agent)) {
                let path = dir.join(fitted_q_file(seed, agent));
                let policy: FittedQPolicy = serde_json::from_slice(bytes).map_err(|e| artifact_err(&path, e))?;
                profile = profile.with(agent, policy);
            }
        }
        runs.push((seed, profile));
    }
    Ok(LoadedRun { dir: dir.to_path_buf(), manifest, config, env, runs, trees })
}
