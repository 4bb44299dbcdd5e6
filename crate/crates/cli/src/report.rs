//! CSV row types for every report the CLI writes.

use maviper_core::eval::{CrossplayMatrix, EvalReport, ExploitabilityReport, FeatureReport};
use serde::Serialize;

use crate::CliError;

/// One per-seed value or one aggregate (`mean`, `sd`, `ci95`) of a metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: String,
    pub algorithm: String,
    pub depth: usize,
    pub team: String,
    pub seed: String,
    pub value: f64,
    pub n_seeds: usize,
    pub n_episodes: usize,
    pub flag: String,
}

pub fn metric_rows(report: &EvalReport, algorithm: &str, depth: usize, team: &str, flag: &str) -> Vec<MetricRow> {
    let flag = if report.zero_baseline {
        "zero_baseline_absolute_metric".to_string()
    } else {
        flag.to_string()
    };
    let row = |seed: String, value: f64| MetricRow {
        metric: report.metric.clone(),
        algorithm: algorithm.to_string(),
        depth,
        team: team.to_string(),
        seed,
        value,
        n_seeds: report.n_seeds,
        n_episodes: report.n_episodes,
        flag: flag.clone(),
    };
    let mut rows: Vec<MetricRow> = report
        .seeds
        .iter()
        .zip(&report.per_seed)
        .map(|(s, v)| row(s.to_string(), *v))
        .collect();
    rows.push(row("mean".into(), report.mean));
    rows.push(row("sd".into(), report.sd));
    rows.push(row("ci95".into(), report.ci95));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossplayRow {
    pub team: String,
    pub metric: String,
    pub team_source: String,
    pub opponent_source: String,
    pub mean: f64,
    pub sd: f64,
}

/// All cells, then one `mean_excluding_expert` row per team source.
pub fn crossplay_rows(m: &CrossplayMatrix) -> Vec<CrossplayRow> {
    let mut rows = Vec::new();
    for (r, row_label) in m.labels.iter().enumerate() {
        for (c, col_label) in m.labels.iter().enumerate() {
            rows.push(CrossplayRow {
                team: m.team.clone(),
                metric: m.metric.clone(),
                team_source: row_label.clone(),
                opponent_source: col_label.clone(),
                mean: m.cells[r][c].mean,
                sd: m.cells[r][c].sd,
            });
        }
    }
    for (r, row_label) in m.labels.iter().enumerate() {
        rows.push(CrossplayRow {
            team: m.team.clone(),
            metric: m.metric.clone(),
            team_source: row_label.clone(),
            opponent_source: "mean_excluding_expert".into(),
            mean: m.row_means[r],
            sd: f64::NAN,
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploitRow {
    pub algorithm: String,
    pub team: String,
    pub seed: u64,
    pub best_response: f64,
    pub incumbent: f64,
    pub exploitability: f64,
}

pub fn exploit_row(algorithm: &str, seed: u64, r: &ExploitabilityReport) -> ExploitRow {
    ExploitRow {
        algorithm: algorithm.to_string(),
        team: r.team.clone(),
        seed,
        best_response: r.best_response_value,
        incumbent: r.incumbent_value,
        exploitability: r.exploitability,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub algorithm: String,
    pub agent: usize,
    pub feature: String,
    pub importance: f64,
}

pub fn feature_rows(algorithm: &str, r: &FeatureReport) -> Vec<FeatureRow> {
    r.feature_names
        .iter()
        .zip(&r.importances)
        .map(|(f, &importance)| FeatureRow {
            algorithm: algorithm.to_string(),
            agent: r.agent,
            feature: f.clone(),
            importance,
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}
