//! Evaluation: performance ratios, cross-play, exploitability and feature
//! importance summaries, all on shared episode seeds.

mod exploit;

pub use exploit::{exploitability, opponent_values, ExploitError, ExploitabilityReport};

use serde::{Deserialize, Serialize};

use crate::dtree::DecisionTreePolicy;
use crate::env::{Env, EnvError};
use crate::env::MetricOrientation;
use crate::policy::PolicyProfile;
use crate::rng::{derive_seed, TAG_EVAL};

/// Seed of episode `episode` under evaluation seed `seed`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, &[TAG_EVAL, episode as u64])
}

/// Summary of one quantity across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub sd: f64,
    /// Half-width of the normal 95% interval, `1.96 sd / sqrt(n_seeds)`.
    pub ci95: f64,
    pub n_seeds: usize,
    pub n_episodes: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
    /// Set when a ratio had a zero denominator and absolute metrics were
    /// reported instead.
    pub zero_baseline: bool,
}

impl EvalReport {
    pub fn from_values(metric: &str, seeds: &[u64], values: Vec<f64>, n_episodes: usize) -> Self {
        assert_eq!(seeds.len(), values.len());
        let n = values.len();
        let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let ci95 = if n == 0 { 0.0 } else { 1.96 * sd / (n as f64).sqrt() };
        EvalReport {
            metric: metric.to_string(),
            mean,
            sd,
            ci95,
            n_seeds: n,
            n_episodes,
            seeds: seeds.to_vec(),
            per_seed: values,
            zero_baseline: false,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }
}

/// Per-seed differences `a - b` summarized as a report.
pub fn paired_difference(metric: &str, a: &EvalReport, b: &EvalReport) -> EvalReport {
    assert_eq!(a.seeds, b.seeds, "paired reports need identical seeds");
    let diffs = a.per_seed.iter().zip(&b.per_seed).map(|(x, y)| x - y).collect();
    EvalReport::from_values(metric, &a.seeds, diffs, a.n_episodes)
}

/// Mean raw team metric of `profile` over `episodes` episodes of `seed`.
pub fn mean_team_metric(
    env: &Env,
    profile: &PolicyProfile,
    team: &str,
    episodes: usize,
    seed: u64,
) -> Result<f64, EnvError> {
    let mut total = 0.0;
    for e in 0..episodes {
        total += profile.run_episode(env, episode_seed(seed, e))?.metric(env, team)?;
    }
    Ok(total / episodes as f64)
}

/// `value / baseline`, inverted to `baseline / value` for lower-is-better
/// metrics so that 1 is parity and larger is better. `None` when the
/// denominator is zero.
pub fn performance_ratio(value: f64, baseline: f64, orientation: MetricOrientation) -> Option<f64> {
    let (num, den) = match orientation {
        MetricOrientation::HigherIsBetter => (value, baseline),
        MetricOrientation::LowerIsBetter => (baseline, value),
    };
    (den != 0.0).then(|| num / den)
}

/// Ratio of each seed's profile to the expert profile on that seed's
/// episodes. Falls back to the candidate's absolute metric (flagged) if any
/// seed has a zero denominator.
pub fn ratio_report(
    env: &Env,
    runs: &[(u64, PolicyProfile)],
    expert: &PolicyProfile,
    team: &str,
    episodes: usize,
    label: &str,
) -> Result<EvalReport, EnvError> {
    let orientation = env.metric_orientation(team)?;
    let mut ratios = Vec::with_capacity(runs.len());
    let mut absolute = Vec::with_capacity(runs.len());
    for (seed, profile) in runs {
        let value = mean_team_metric(env, profile, team, episodes, *seed)?;
        let baseline = mean_team_metric(env, expert, team, episodes, *seed)?;
        ratios.push(performance_ratio(value, baseline, orientation));
        absolute.push(value);
    }
    let seeds: Vec<u64> = runs.iter().map(|(s, _)| *s).collect();
    Ok(match ratios.into_iter().collect::<Option<Vec<f64>>>() {
        Some(r) => EvalReport::from_values(label, &seeds, r, episodes),
        None => {
            let mut report = EvalReport::from_values(env.metric_name(team), &seeds, absolute, episodes);
            report.zero_baseline = true;
            report
        }
    })
}

/// `base` with `agents` taken from `source`.
pub fn swap_in(base: &PolicyProfile, source: &PolicyProfile, agents: &[usize]) -> PolicyProfile {
    let mut p = base.clone();
    for &a in agents {
        p.policies[a] = source.policies[a].clone();
    }
    p
}

/// Team metric ratio with only `agent` taken from each seed's profile.
pub fn individual_ratio(
    env: &Env,
    runs: &[(u64, PolicyProfile)],
    expert: &PolicyProfile,
    team: &str,
    agent: usize,
    episodes: usize,
) -> Result<EvalReport, EnvError> {
    assert!(env.team(team)?.agents.contains(&agent), "agent {agent} is not in team {team}");
    let swapped: Vec<(u64, PolicyProfile)> =
        runs.iter().map(|(s, p)| (*s, swap_in(expert, p, &[agent]))).collect();
    ratio_report(env, &swapped, expert, team, episodes, &format!("individual_ratio_agent{agent}"))
}

/// Team metric ratio with every member of `team` taken from each seed's
/// profile and opponents at their experts.
pub fn joint_ratio(
    env: &Env,
    runs: &[(u64, PolicyProfile)],
    expert: &PolicyProfile,
    team: &str,
    episodes: usize,
) -> Result<EvalReport, EnvError> {
    let members = env.team(team)?.agents.clone();
    let swapped: Vec<(u64, PolicyProfile)> =
        runs.iter().map(|(s, p)| (*s, swap_in(expert, p, &members))).collect();
    ratio_report(env, &swapped, expert, team, episodes, "joint_ratio")
}

/// Mean of the per-agent individual ratios of a team, per seed.
pub fn mean_individual_ratio(
    env: &Env,
    runs: &[(u64, PolicyProfile)],
    expert: &PolicyProfile,
    team: &str,
    episodes: usize,
) -> Result<EvalReport, EnvError> {
    let members = env.team(team)?.agents.clone();
    let reports: Vec<EvalReport> = members
        .iter()
        .map(|&a| individual_ratio(env, runs, expert, team, a, episodes))
        .collect::<Result<_, _>>()?;
    let seeds: Vec<u64> = runs.iter().map(|(s, _)| *s).collect();
    let values = (0..runs.len())
        .map(|k| reports.iter().map(|r| r.per_seed[k]).sum::<f64>() / reports.len() as f64)
        .collect();
    let mut out = EvalReport::from_values("individual_ratio", &seeds, values, episodes);
    out.zero_baseline = reports.iter().any(|r| r.zero_baseline);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossplayCell {
    pub mean: f64,
    pub sd: f64,
}

/// Team metric of every (team source, opponent source) pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossplayMatrix {
    pub team: String,
    pub metric: String,
    pub labels: Vec<String>,
    /// `cells[row][col]`: team from source `row`, opponents from `col`.
    pub cells: Vec<Vec<CrossplayCell>>,
    /// Row means over opponent sources other than `Expert`.
    pub row_means: Vec<f64>,
}

/// A named policy source with one profile per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySource {
    pub label: String,
    pub runs: Vec<(u64, PolicyProfile)>,
}

pub const EXPERT_LABEL: &str = "Expert";

/// Evaluates every pairing on shared seeds: seed `k` pairs the `k`-th run of
/// each source. Cell statistics are across seeds of per-seed mean metrics.
pub fn crossplay(env: &Env, sources: &[PolicySource], team: &str, episodes: usize) -> Result<CrossplayMatrix, EnvError> {
    let members = env.team(team)?.agents.clone();
    let n_seeds = sources.iter().map(|s| s.runs.len()).min().unwrap_or(0);
    let mut cells = Vec::with_capacity(sources.len());
    for row in sources {
        let mut row_cells = Vec::with_capacity(sources.len());
        for col in sources {
            let mut per_seed = Vec::with_capacity(n_seeds);
            let mut seeds = Vec::with_capacity(n_seeds);
            for k in 0..n_seeds {
                let (seed, team_profile) = &row.runs[k];
                let profile = swap_in(&col.runs[k].1, team_profile, &members);
                per_seed.push(mean_team_metric(env, &profile, team, episodes, *seed)?);
                seeds.push(*seed);
            }
            let r = EvalReport::from_values(team, &seeds, per_seed, episodes);
            row_cells.push(CrossplayCell { mean: r.mean, sd: r.sd });
        }
        cells.push(row_cells);
    }
    let row_means = cells
        .iter()
        .map(|row: &Vec<CrossplayCell>| {
            let vals: Vec<f64> = row
                .iter()
                .zip(sources)
                .filter(|(_, s)| s.label != EXPERT_LABEL)
                .map(|(c, _)| c.mean)
                .collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    Ok(CrossplayMatrix {
        team: team.to_string(),
        metric: env.metric_name(team).to_string(),
        labels: sources.iter().map(|s| s.label.clone()).collect(),
        cells,
        row_means,
    })
}

/// Averaged, normalized feature importances of one agent's trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub agent: usize,
    pub feature_names: Vec<String>,
    pub importances: Vec<f64>,
}

/// Averages the importances of `trees` (one per trial) and renormalizes to
/// sum to one. All-zero when no tree has a split.
pub fn feature_report(agent: usize, trees: &[&DecisionTreePolicy]) -> FeatureReport {
    assert!(!trees.is_empty(), "need at least one tree");
    let n = trees[0].n_features();
    let mut avg = vec![0.0; n];
    for t in trees {
        for (a, v) in avg.iter_mut().zip(t.feature_importance()) {
            *a += v / trees.len() as f64;
        }
    }
    let total: f64 = avg.iter().sum();
    if total > 0.0 {
        avg.iter_mut().for_each(|v| *v /= total);
    }
    FeatureReport { agent, feature_names: trees[0].feature_names.clone(), importances: avg }
}
