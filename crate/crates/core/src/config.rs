//! Plain-text run configuration: `[section]` headers followed by
//! `key = value` lines. `#` starts a comment. Every key has a default, so
//! an empty file is a valid config.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtree::Criterion;
use crate::env::{EnvConfig, EnvKind, Role};
use crate::extraction::Resampling;
use crate::pipeline::{Algorithm, TrainSettings};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}config key `{key}`: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub key: String,
    /// 1-based line in the config file; `None` for command-line overrides.
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    /// Teams to extract; empty means every team.
    pub teams: Vec<String>,
    pub settings: TrainSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Team whose metric is reported; `None` means every team.
    pub team: Option<String>,
    /// Run directories to evaluate.
    pub runs: Vec<String>,
    pub exploit_episodes: usize,
    /// Largest opponent search the exploitability command attempts.
    pub exploit_limit: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvConfig::physical_deception(2),
            train: TrainConfig {
                algorithm: Algorithm::Maviper,
                seeds: (0..10).collect(),
                teams: Vec::new(),
                settings: TrainSettings::default(),
            },
            eval: EvalConfig {
                episodes: 100,
                team: None,
                runs: Vec::new(),
                exploit_episodes: 20,
                exploit_limit: 50_000_000,
            },
        }
    }
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// `a..b` (exclusive) or a comma-separated list.
fn parse_seeds(v: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        if b <= a {
            return Err("empty seed range".into());
        }
        return Ok((a..b).collect());
    }
    let seeds: Vec<u64> = parse_list(v)
        .iter()
        .map(|s| s.parse().map_err(|e| format!("{e}")))
        .collect::<Result<_, String>>()?;
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| e.to_string())
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

/// `auto` maps to `None`.
fn auto<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, String> {
    if v == "auto" || v == "off" {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn show_auto<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("auto".to_string(), T::to_string)
}

fn criterion_name(c: Criterion) -> &'static str {
    match c {
        Criterion::Gini => "gini",
        Criterion::Entropy => "entropy",
    }
}

fn primary_role(kind: EnvKind) -> Role {
    match kind {
        EnvKind::PhysicalDeception => Role::Defender,
        EnvKind::CooperativeNavigation => Role::Navigator,
        EnvKind::PredatorPrey => Role::Predator,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut pending_env: Vec<(String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if !["env", "train", "oracle", "eval"].contains(&section.as_str()) {
                    return Err(ConfigError {
                        key: format!("[{section}]"),
                        line: Some(line_no),
                        message: "unknown section".into(),
                    });
                }
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError {
                    key: line.to_string(),
                    line: Some(line_no),
                    message: "expected `key = value`".into(),
                });
            };
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            pending_env.push((key, v.trim().to_string(), line_no));
        }
        // env.kind decides how role counts are read, so it goes first
        pending_env.sort_by_key(|(k, _, _)| k != "env.kind");
        for (key, value, line) in pending_env {
            cfg.set(&key, &value).map_err(|message| ConfigError { key, line: Some(line), message })?;
        }
        Ok(cfg)
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError {
            key: assignment.to_string(),
            line: None,
            message: "expected `section.key=value`".into(),
        })?;
        let key = k.trim().to_string();
        self.set(&key, v.trim()).map_err(|message| ConfigError { key, line: None, message })
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let ex = &mut self.train.settings.extraction;
        match key {
            "env.kind" => {
                let kind = EnvKind::parse(v).ok_or_else(|| format!("unknown environment `{v}`"))?;
                let fresh = match kind {
                    EnvKind::PhysicalDeception => EnvConfig::physical_deception(2),
                    EnvKind::CooperativeNavigation => EnvConfig::cooperative_navigation(3),
                    EnvKind::PredatorPrey => EnvConfig::predator_prey(2, 1),
                };
                self.env = EnvConfig {
                    grid_size: self.env.grid_size,
                    horizon: self.env.horizon,
                    seed: self.env.seed,
                    epsilon_cells: self.env.epsilon_cells,
                    discount: self.env.discount,
                    ..fresh
                };
            }
            "env.n_agents" => {
                let role = primary_role(self.env.kind);
                self.env.n_agents_per_role.insert(role, num(v)?);
            }
            "env.n_prey" => {
                if self.env.kind != EnvKind::PredatorPrey {
                    return Err("only predator_prey has prey".into());
                }
                self.env.n_agents_per_role.insert(Role::Prey, num(v)?);
            }
            "env.grid_size" => self.env.grid_size = num(v)?,
            "env.horizon" => self.env.horizon = num(v)?,
            "env.n_landmarks" => self.env.n_landmarks = num(v)?,
            "env.epsilon_cells" => self.env.epsilon_cells = num(v)?,
            "env.discount" => self.env.discount = num(v)?,
            "env.seed" => self.env.seed = num(v)?,
            "train.algorithm" => {
                self.train.algorithm = Algorithm::parse(v).ok_or_else(|| format!("unknown algorithm `{v}`"))?
            }
            "train.seeds" => self.train.seeds = parse_seeds(v)?,
            "train.teams" => self.train.teams = if v == "all" { Vec::new() } else { parse_list(v) },
            "train.n_iterations" => ex.n_iterations = num(v)?,
            "train.n_rollouts" => ex.n_rollouts = num(v)?,
            "train.max_depth" => ex.max_depth = num(v)?,
            "train.min_samples_split" => ex.min_samples_split = num(v)?,
            "train.criterion" => {
                ex.criterion = match v {
                    "gini" => Criterion::Gini,
                    "entropy" => Criterion::Entropy,
                    _ => return Err(format!("unknown criterion `{v}`")),
                }
            }
            "train.threshold" => ex.threshold = auto(v, num)?,
            "train.resampling" => {
                self.train.settings.resampling =
                    auto(v, |s| Resampling::parse(s).ok_or_else(|| format!("unknown resampling `{s}`")))?
            }
            "train.prediction_module" => ex.prediction_module = flag(v)?,
            "train.max_samples" => ex.max_samples = num(v)?,
            "train.resample_size" => ex.resample_size = auto(v, num)?,
            "train.eval_episodes_for_selection" => ex.eval_episodes_for_selection = num(v)?,
            "train.early_stop_patience" => ex.early_stop_patience = auto(v, num)?,
            "train.imitation_samples" => self.train.settings.imitation_samples = num(v)?,
            "train.fqi_samples" => self.train.settings.fitted_q.n_samples = num(v)?,
            "train.fqi_iterations" => self.train.settings.fitted_q.n_q_iterations = num(v)?,
            "oracle.mc_samples" => ex.oracle.mc_samples = num(v)?,
            "oracle.enumeration_cap" => ex.oracle.enumeration_cap = num(v)?,
            "oracle.use_cache" => ex.oracle.use_cache = flag(v)?,
            "eval.episodes" => self.eval.episodes = num(v)?,
            "eval.team" => self.eval.team = auto(v, |s| Ok(s.to_string()))?,
            "eval.runs" => self.eval.runs = parse_list(v),
            "eval.exploit_episodes" => self.eval.exploit_episodes = num(v)?,
            "eval.exploit_limit" => self.eval.exploit_limit = num(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Every key in a fixed order; parsing the output gives back `self`.
    pub fn canonical(&self) -> String {
        let ex = &self.train.settings.extraction;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let join = |xs: &[String]| if xs.is_empty() { "all".to_string() } else { xs.join(",") };
        put("[env]\nkind", self.env.kind.name().into());
        put("n_agents", self.env.count(primary_role(self.env.kind)).to_string());
        if self.env.kind == EnvKind::PredatorPrey {
            put("n_prey", self.env.count(Role::Prey).to_string());
        }
        put("grid_size", self.env.grid_size.to_string());
        put("horizon", self.env.horizon.to_string());
        put("n_landmarks", self.env.n_landmarks.to_string());
        put("epsilon_cells", self.env.epsilon_cells.to_string());
        put("discount", format!("{:?}", self.env.discount));
        put("seed", self.env.seed.to_string());
        put("\n[train]\nalgorithm", self.train.algorithm.name().into());
        put(
            "seeds",
            self.train.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        put("teams", join(&self.train.teams));
        put("n_iterations", ex.n_iterations.to_string());
        put("n_rollouts", ex.n_rollouts.to_string());
        put("max_depth", ex.max_depth.to_string());
        put("min_samples_split", ex.min_samples_split.to_string());
        put("criterion", criterion_name(ex.criterion).into());
        put("threshold", show_auto(&ex.threshold));
        put(
            "resampling",
            self.train.settings.resampling.map_or("auto".into(), |r| r.name().to_string()),
        );
        put("prediction_module", ex.prediction_module.to_string());
        put("max_samples", ex.max_samples.to_string());
        put("resample_size", show_auto(&ex.resample_size));
        put("eval_episodes_for_selection", ex.eval_episodes_for_selection.to_string());
        put("early_stop_patience", show_auto(&ex.early_stop_patience));
        put("imitation_samples", self.train.settings.imitation_samples.to_string());
        put("fqi_samples", self.train.settings.fitted_q.n_samples.to_string());
        put("fqi_iterations", self.train.settings.fitted_q.n_q_iterations.to_string());
        put("\n[oracle]\nmc_samples", ex.oracle.mc_samples.to_string());
        put("enumeration_cap", ex.oracle.enumeration_cap.to_string());
        put("use_cache", ex.oracle.use_cache.to_string());
        put("\n[eval]\nepisodes", self.eval.episodes.to_string());
        put("team", show_auto(&self.eval.team));
        put("runs", self.eval.runs.join(","));
        put("exploit_episodes", self.eval.exploit_episodes.to_string());
        put("exploit_limit", self.eval.exploit_limit.to_string());
        out
    }

    /// The part of the config that determines training output.
    pub fn training_view(&self) -> RunConfig {
        RunConfig { eval: RunConfig::default().eval, ..self.clone() }
    }
}
