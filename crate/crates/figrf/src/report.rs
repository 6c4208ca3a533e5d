//! Report files: JSON, JSON lines and CSV.
//!
//! Reports carry no timestamps, paths or thread counts, so identical runs
//! produce identical bytes.

use std::fs;
use std::path::Path;

use anyhow::Context;
use figrf_core::{FeatureUsage, HyperParams, ImportanceProfile, MetricReport, SaOutcome, SaRecord};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionJson {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsJson {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fitness: f64,
    pub confusion: ConfusionJson,
}

impl From<&MetricReport> for MetricsJson {
    fn from(r: &MetricReport) -> Self {
        let m = r.matrix;
        Self {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            fitness: r.fitness,
            confusion: ConfusionJson {
                tp: m.tp,
                fp: m.fp,
                tn: m.tn,
                fn_: m.fn_,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamsJson {
    pub n_estimators: u32,
    pub max_depth: Option<u32>,
}

impl From<&HyperParams> for ParamsJson {
    fn from(p: &HyperParams) -> Self {
        Self {
            n_estimators: p.n_estimators(),
            max_depth: p.max_depth(),
        }
    }
}

#[derive(Debug, Serialize)]
struct FeatureImportanceRow<'a> {
    index: usize,
    feature: &'a str,
    permutation: f64,
    gini: f64,
    mutual_info: f64,
    permutation_normalized: f64,
    gini_normalized: f64,
    mutual_info_normalized: f64,
    average: f64,
    rank: usize,
    probability: f64,
}

fn importance_rows<'a>(
    profile: &ImportanceProfile,
    names: &'a [String],
) -> Vec<FeatureImportanceRow<'a>> {
    let ranks = profile.ranks();
    (0..profile.n_features())
        .map(|i| FeatureImportanceRow {
            index: i,
            feature: &names[i],
            permutation: profile.permutation[i],
            gini: profile.gini[i],
            mutual_info: profile.mutual_info[i],
            permutation_normalized: profile.permutation_normalized[i],
            gini_normalized: profile.gini_normalized[i],
            mutual_info_normalized: profile.mutual_info_normalized[i],
            average: profile.averaged[i],
            rank: ranks[i],
            probability: profile.probabilities[i],
        })
        .collect()
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `importance.json`, `importance.csv` and `top_features.csv`.
pub fn write_importance(
    dir: &Path,
    profile: &ImportanceProfile,
    names: &[String],
    top_k: usize,
) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Doc<'a> {
        softmax_alpha: f64,
        features: Vec<FeatureImportanceRow<'a>>,
    }
    #[derive(Serialize)]
    struct Top<'a> {
        rank: usize,
        feature: &'a str,
        average: f64,
        probability: f64,
    }
    let rows = importance_rows(profile, names);
    write_csv(&dir.join("importance.csv"), &rows)?;
    let top: Vec<Top> = profile
        .ranking
        .iter()
        .take(top_k)
        .enumerate()
        .map(|(pos, &i)| Top {
            rank: pos + 1,
            feature: &names[i],
            average: profile.averaged[i],
            probability: profile.probabilities[i],
        })
        .collect();
    write_csv(&dir.join("top_features.csv"), &top)?;
    write_json(
        &dir.join("importance.json"),
        &Doc {
            softmax_alpha: profile.softmax_alpha,
            features: rows,
        },
    )
}

#[derive(Serialize)]
struct TraceLine {
    iteration: usize,
    n_estimators: u32,
    max_depth: Option<u32>,
    fitness: f64,
    delta: f64,
    temperature: f64,
    draw: Option<f64>,
    accepted: bool,
    new_best: bool,
    best_fitness: f64,
}

impl From<&SaRecord> for TraceLine {
    fn from(r: &SaRecord) -> Self {
        Self {
            iteration: r.iteration,
            n_estimators: r.candidate.n_estimators(),
            max_depth: r.candidate.max_depth(),
            fitness: r.fitness,
            delta: r.delta,
            temperature: r.temperature,
            draw: r.draw,
            accepted: r.accepted,
            new_best: r.new_best,
            best_fitness: r.best_fitness,
        }
    }
}

/// Trace as JSON lines, one per iteration, closed by the best configuration.
pub fn trace_jsonl(outcome: &SaOutcome) -> String {
    #[derive(Serialize)]
    struct Final {
        best: ParamsJson,
        fitness: f64,
    }
    let mut out = String::new();
    for r in &outcome.trace {
        out.push_str(&serde_json::to_string(&TraceLine::from(r)).expect("plain struct"));
        out.push('\n');
    }
    let last = Final {
        best: (&outcome.best).into(),
        fitness: outcome.best_fitness,
    };
    out.push_str(&serde_json::to_string(&last).expect("plain struct"));
    out.push('\n');
    out
}

/// `trace.jsonl` and `tuned_params.json`.
pub fn write_tuning(dir: &Path, outcome: &SaOutcome) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Tuned {
        initial: ParamsJson,
        initial_fitness: f64,
        best: ParamsJson,
        best_fitness: f64,
        iterations: usize,
    }
    let path = dir.join("trace.jsonl");
    fs::write(&path, trace_jsonl(outcome))
        .with_context(|| format!("writing {}", path.display()))?;
    write_json(
        &dir.join("tuned_params.json"),
        &Tuned {
            initial: (&outcome.initial).into(),
            initial_fitness: outcome.initial_fitness,
            best: (&outcome.best).into(),
            best_fitness: outcome.best_fitness,
            iterations: outcome.trace.len(),
        },
    )
}

#[derive(Debug, Serialize)]
pub struct UsageRow<'a> {
    pub feature: &'a str,
    pub count: u32,
    pub percentage: f64,
}

pub fn usage_rows(usage: &[FeatureUsage]) -> Vec<UsageRow<'_>> {
    usage
        .iter()
        .map(|u| UsageRow {
            feature: &u.name,
            count: u.count,
            percentage: u.percentage,
        })
        .collect()
}

pub fn write_metrics(path: &Path, report: &MetricReport) -> anyhow::Result<()> {
    write_json(path, &MetricsJson::from(report))
}

/// `usage.csv`, per-model metrics, `comparison.csv` and `comparison.json`.
pub fn write_comparison(
    dir: &Path,
    figrf: &MetricReport,
    baseline: &MetricReport,
    tuned: &HyperParams,
    usage: &[FeatureUsage],
) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Row {
        model: &'static str,
        accuracy: f64,
        precision: f64,
        recall: f64,
        f1: f64,
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        figrf: MetricsJson,
        baseline: MetricsJson,
        tuned: ParamsJson,
        usage: Vec<UsageRow<'a>>,
    }
    let row = |model, r: &MetricReport| Row {
        model,
        accuracy: r.accuracy,
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
    };
    write_csv(&dir.join("usage.csv"), &usage_rows(usage))?;
    write_metrics(&dir.join("metrics_figrf.json"), figrf)?;
    write_metrics(&dir.join("metrics_baseline.json"), baseline)?;
    write_csv(
        &dir.join("comparison.csv"),
        &[row("FIGRF", figrf), row("RF", baseline)],
    )?;
    write_json(
        &dir.join("comparison.json"),
        &Doc {
            figrf: figrf.into(),
            baseline: baseline.into(),
            tuned: tuned.into(),
            usage: usage_rows(usage),
        },
    )
}
