//! Importance-guided random forests.
//!
//! Identical to the baseline forest except for how each tree's feature
//! subset `S(t)` is chosen: `m` features are drawn without replacement from
//! the importance distribution `p`, one sequential draw at a time, each
//! proportional to the probability mass still remaining.

use alloc::{format, string::String, vec, vec::Vec};

use rand::Rng;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::forest::{bootstrap_rows, default_features_per_tree, Classifier, Ensemble};
use crate::rng::stream_rng;
use crate::tree::{DecisionTree, TreeConfig};

/// Draws `m` distinct indices; index `i` is picked with probability
/// `p_i / (mass not yet drawn)` at every step. Indices come back in draw
/// order. Zero-probability indices are never drawn.
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(
    probabilities: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let available = probabilities.iter().filter(|&&p| p > 0.0).count();
    if m > available {
        return Err(Error::TooFewCandidates {
            requested: m,
            available,
        });
    }
    let mut taken = vec![false; probabilities.len()];
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let remaining: f64 = probabilities
            .iter()
            .zip(&taken)
            .filter(|(&p, &t)| !t && p > 0.0)
            .map(|(p, _)| p)
            .sum();
        let target = rng.random::<f64>() * remaining;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, (&p, &t)) in probabilities.iter().zip(&taken).enumerate() {
            if t || p.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
                continue;
            }
            pick = Some(i);
            acc += p;
            if target < acc {
                break;
            }
        }
        // Falling off the end through rounding keeps the last candidate.
        let i = pick.expect("a positive-probability index remains");
        taken[i] = true;
        out.push(i);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigrfConfig {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    /// `None` means `⌊√d⌋`.
    pub features_per_tree: Option<usize>,
    pub min_samples_split: usize,
    /// Feature sampling distribution, one entry per feature.
    pub probabilities: Vec<f64>,
    pub seed: u64,
}

impl FigrfConfig {
    pub fn new(probabilities: Vec<f64>) -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            features_per_tree: None,
            min_samples_split: 2,
            probabilities,
            seed: 42,
        }
    }

    pub fn features_per_tree(&self) -> usize {
        self.features_per_tree
            .unwrap_or_else(|| default_features_per_tree(self.probabilities.len()))
    }

    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidConfig(
                "n_estimators must be at least 1".into(),
            ));
        }
        if self.probabilities.is_empty() {
            return Err(Error::InvalidConfig("probabilities are empty".into()));
        }
        if self
            .probabilities
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0)
        {
            return Err(Error::InvalidConfig(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let m = self.features_per_tree();
        let positive = self.probabilities.iter().filter(|&&p| p > 0.0).count();
        if m == 0 || m > positive {
            return Err(Error::TooFewCandidates {
                requested: m,
                available: positive,
            });
        }
        self.tree_config().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigrfModel {
    ensemble: Ensemble,
    usage_counts: Vec<u32>,
    config: FigrfConfig,
}

impl FigrfModel {
    /// Reassembles a model, recomputing usage counts from the trees.
    pub fn from_parts(ensemble: Ensemble, config: FigrfConfig) -> Result<Self> {
        let d = ensemble.n_features();
        if config.probabilities.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: config.probabilities.len(),
            });
        }
        let usage_counts = count_usage(ensemble.trees(), d);
        Ok(Self {
            ensemble,
            usage_counts,
            config,
        })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    /// Number of trees whose subset contains each feature.
    pub fn usage_counts(&self) -> &[u32] {
        &self.usage_counts
    }

    pub fn config(&self) -> &FigrfConfig {
        &self.config
    }
}

impl Classifier for FigrfModel {
    fn n_features(&self) -> usize {
        self.ensemble.n_features()
    }

    fn predict(&self, sample: &[f64]) -> Label {
        self.ensemble.predict(sample)
    }
}

fn count_usage(trees: &[DecisionTree], d: usize) -> Vec<u32> {
    let mut counts = vec![0u32; d];
    for tree in trees {
        for &f in tree.features() {
            counts[f] += 1;
        }
    }
    counts
}

pub fn fit_figrf(train: &Dataset, config: &FigrfConfig) -> Result<FigrfModel> {
    fit_figrf_with(train, config, &Sequential)
}

/// Per tree: bootstrap rows, draw `S(t)` from the importance distribution,
/// fit a tree restricted to `S(t)`.
pub fn fit_figrf_with<E: Executor>(
    train: &Dataset,
    config: &FigrfConfig,
    exec: &E,
) -> Result<FigrfModel> {
    config.validate()?;
    let d = train.n_features();
    if config.probabilities.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: config.probabilities.len(),
        });
    }
    if train.is_empty() {
        return Err(Error::Degenerate("one training row"));
    }
    let m = config.features_per_tree();
    let tree_config = config.tree_config();
    let n = train.n_samples();
    let trees = exec
        .map(config.n_estimators, |t| {
            let mut rng = stream_rng(config.seed, t as u64);
            let rows = bootstrap_rows(n, &mut rng);
            let features = weighted_sample_without_replacement(&config.probabilities, m, &mut rng)?;
            DecisionTree::fit(train, &rows, &features, &tree_config)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let usage_counts = count_usage(&trees, d);
    Ok(FigrfModel {
        ensemble: Ensemble::new(trees, d)?,
        usage_counts,
        config: config.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureUsage {
    pub index: usize,
    pub name: String,
    pub count: u32,
    /// Share of trees using the feature, in percent.
    pub percentage: f64,
}

/// Usage per feature, most used first (ties by index).
pub fn usage_report(model: &FigrfModel, feature_names: &[String]) -> Result<Vec<FeatureUsage>> {
    let counts = model.usage_counts();
    if feature_names.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: counts.len(),
            actual: feature_names.len(),
        });
    }
    let trees = model.ensemble().len() as f64;
    let mut report: Vec<FeatureUsage> = counts
        .iter()
        .zip(feature_names)
        .enumerate()
        .map(|(index, (&count, name))| FeatureUsage {
            index,
            name: name.clone(),
            count,
            percentage: 100.0 * f64::from(count) / trees,
        })
        .collect();
    report.sort_by(|a, b| b.count.cmp(&a.count).then(a.index.cmp(&b.index)));
    Ok(report)
}
