//! Feature importance estimators and the sampling distribution built from
//! them.
//!
//! Three scores are computed per feature:
//!
//! * permutation importance, the mean accuracy drop over `R` independent
//!   shuffles of one validation column;
//! * Gini importance, `Σ_t Σ_n p(n)·ΔGini(n)` over every split on the feature;
//! * mutual information between the (discretized) feature and the label, in
//!   nats.
//!
//! [`compose`] min-max scales each score vector to `[0, 1]`, averages the
//! three per feature, ranks features by that average and turns the average
//! into sampling probabilities `p_i ∝ exp(α·f̄_i)`.

use alloc::{format, vec, vec::Vec};

use rand::seq::SliceRandom;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::forest::{Classifier, Ensemble};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceConfig {
    /// Shuffles per feature for permutation importance.
    pub n_repeats: usize,
    /// Softmax sharpness α.
    pub softmax_alpha: f64,
    /// Equal-frequency bins for continuous features in the MI estimate.
    pub mi_bins: usize,
    pub seed: u64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            n_repeats: 5,
            softmax_alpha: 1.0,
            mi_bins: 10,
            seed: 42,
        }
    }
}

impl ImportanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::InvalidConfig("n_repeats must be at least 1".into()));
        }
        if self.mi_bins < 2 {
            return Err(Error::InvalidConfig("mi_bins must be at least 2".into()));
        }
        if !(self.softmax_alpha.is_finite() && self.softmax_alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "softmax_alpha {} must be positive and finite",
                self.softmax_alpha
            )));
        }
        Ok(())
    }
}

/// All intermediate and final importance quantities, indexed by feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceProfile {
    pub permutation: Vec<f64>,
    pub gini: Vec<f64>,
    pub mutual_info: Vec<f64>,
    pub permutation_normalized: Vec<f64>,
    pub gini_normalized: Vec<f64>,
    pub mutual_info_normalized: Vec<f64>,
    pub averaged: Vec<f64>,
    /// Feature indices by descending average; ties keep the lower index first.
    pub ranking: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub softmax_alpha: f64,
}

impl ImportanceProfile {
    pub fn n_features(&self) -> usize {
        self.averaged.len()
    }

    /// 1-based rank of each feature.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.ranking.len()];
        for (pos, &f) in self.ranking.iter().enumerate() {
            ranks[f] = pos + 1;
        }
        ranks
    }
}

fn accuracy(correct: usize, n: usize) -> f64 {
    correct as f64 / n as f64
}

pub fn permutation_importance<C: Classifier + Sync>(
    model: &C,
    validation: &Dataset,
    config: &ImportanceConfig,
) -> Result<Vec<f64>> {
    permutation_importance_with(model, validation, config, &Sequential)
}

/// Mean drop in validation accuracy when one column is shuffled.
///
/// Shuffle `r` of feature `f` uses the generator stream
/// `(derive_seed(seed, f), r)`, so results do not depend on scheduling.
pub fn permutation_importance_with<C: Classifier + Sync, E: Executor>(
    model: &C,
    validation: &Dataset,
    config: &ImportanceConfig,
    exec: &E,
) -> Result<Vec<f64>> {
    config.validate()?;
    let d = model.n_features();
    if validation.n_features() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: validation.n_features(),
        });
    }
    if validation.is_empty() {
        return Err(Error::Degenerate("one validation row"));
    }
    let n = validation.n_samples();
    let labels = validation.labels();
    let base_correct = model
        .predict_dataset(validation)
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    let base = accuracy(base_correct, n);

    Ok(exec.map(d, |f| {
        let column = validation.column(f);
        let mut order: Vec<usize> = (0..n).collect();
        let mut row = vec![0.0; d];
        let mut total_drop = 0.0;
        for r in 0..config.n_repeats {
            let mut rng = stream_rng(derive_seed(config.seed, f as u64), r as u64);
            order.shuffle(&mut rng);
            let mut correct = 0;
            for (i, &src) in order.iter().enumerate() {
                validation.row_into(i, &mut row);
                row[f] = column[src];
                if model.predict(&row) == labels[i] {
                    correct += 1;
                }
            }
            total_drop += base - accuracy(correct, n);
        }
        total_drop / config.n_repeats as f64
    }))
}

/// Sum of `p(n)·ΔGini(n)` over all splits of all trees.
pub fn gini_importance(ensemble: &Ensemble) -> Vec<f64> {
    let mut out = vec![0.0; ensemble.n_features()];
    for tree in ensemble.trees() {
        tree.accumulate_gini_importance(&mut out)
            .expect("ensemble trees share the feature count");
    }
    out
}

/// Maps each value to a bin id.
///
/// Columns with at most `bins` distinct values keep one bin per value.
/// Otherwise bin edges sit at the `k/bins` quantiles of the sorted column
/// and a value equal to an edge falls in the upper bin, so equal values
/// always share a bin.
pub fn discretize(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup_by(|a, b| a.total_cmp(b).is_eq());
    if distinct.len() <= bins {
        return values
            .iter()
            .map(|v| {
                distinct
                    .binary_search_by(|p| p.total_cmp(v))
                    .expect("value comes from the column")
            })
            .collect();
    }
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins).map(|k| sorted[k * n / bins]).collect();
    edges.dedup_by(|a, b| a.total_cmp(b).is_eq());
    values
        .iter()
        .map(|v| edges.partition_point(|e| e.total_cmp(v).is_le()))
        .collect()
}

/// Mutual information (nats) of a `bins × 2` contingency table of counts.
/// Cells with zero count contribute nothing.
pub fn mutual_information_table(table: &[[u64; 2]]) -> f64 {
    let n: u64 = table.iter().map(|r| r[0] + r[1]).sum();
    if n == 0 {
        return 0.0;
    }
    let class_totals = [
        table.iter().map(|r| r[0]).sum::<u64>(),
        table.iter().map(|r| r[1]).sum::<u64>(),
    ];
    let n = n as f64;
    let mut mi = 0.0;
    for row in table {
        let row_total = (row[0] + row[1]) as f64;
        for (y, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let c = count as f64;
            mi += c / n * libm::log(c * n / (row_total * class_totals[y] as f64));
        }
    }
    mi
}

/// Contingency table of bin ids against labels.
pub fn contingency(codes: &[usize], labels: &[Label]) -> Vec<[u64; 2]> {
    let width = codes.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![[0u64; 2]; width];
    for (&code, &y) in codes.iter().zip(labels) {
        table[code][usize::from(y)] += 1;
    }
    table
}

/// Per-feature mutual information with the label.
pub fn mutual_information(train: &Dataset, config: &ImportanceConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Degenerate("one training row"));
    }
    Ok(train
        .columns()
        .iter()
        .map(|column| {
            let codes = discretize(column, config.mi_bins);
            mutual_information_table(&contingency(&codes, train.labels()))
        })
        .collect())
}

/// Min-max scaling into `[0, 1]`; a constant vector maps to all zeros.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0.0; scores.len()];
    }
    scores.iter().map(|s| (s - lo) / range).collect()
}

/// `p_i = exp(α·s_i) / Σ_j exp(α·s_j)`, evaluated relative to the maximum
/// score so large `α·s` cannot overflow.
pub fn softmax(scores: &[f64], alpha: f64) -> Vec<f64> {
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores
        .iter()
        .map(|s| libm::exp(alpha * (s - top)))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Feature indices sorted by descending score, lower index first on ties.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Normalizes, averages, ranks and softmax-transforms raw scores.
pub fn compose(
    permutation: &[f64],
    gini: &[f64],
    mutual_info: &[f64],
    config: &ImportanceConfig,
) -> Result<ImportanceProfile> {
    config.validate()?;
    let d = permutation.len();
    for other in [gini, mutual_info] {
        if other.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: other.len(),
            });
        }
    }
    if d == 0 {
        return Err(Error::Degenerate("one feature"));
    }
    if permutation
        .iter()
        .chain(gini)
        .chain(mutual_info)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidConfig(
            "importance scores must be finite".into(),
        ));
    }
    let permutation_normalized = min_max_normalize(permutation);
    let gini_normalized = min_max_normalize(gini);
    let mutual_info_normalized = min_max_normalize(mutual_info);
    let averaged: Vec<f64> = (0..d)
        .map(|i| (gini_normalized[i] + permutation_normalized[i] + mutual_info_normalized[i]) / 3.0)
        .collect();
    let ranking = rank_descending(&averaged);
    let probabilities = softmax(&averaged, config.softmax_alpha);
    Ok(ImportanceProfile {
        permutation: permutation.to_vec(),
        gini: gini.to_vec(),
        mutual_info: mutual_info.to_vec(),
        permutation_normalized,
        gini_normalized,
        mutual_info_normalized,
        averaged,
        ranking,
        probabilities,
        softmax_alpha: config.softmax_alpha,
    })
}

/// Full profile from a fitted baseline forest: Gini from the forest,
/// permutation importance on `validation`, MI on `train`.
pub fn profile_with<E: Executor>(
    baseline: &Ensemble,
    train: &Dataset,
    validation: &Dataset,
    config: &ImportanceConfig,
    exec: &E,
) -> Result<ImportanceProfile> {
    let permutation = permutation_importance_with(baseline, validation, config, exec)?;
    let gini = gini_importance(baseline);
    let mi = mutual_information(train, config)?;
    compose(&permutation, &gini, &mi, config)
}
