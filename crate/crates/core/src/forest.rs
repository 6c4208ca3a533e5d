//! Bagged tree ensembles and the uniform-sampling random forest.
//!
//! Each tree draws its bootstrap rows and then its feature subset from a
//! generator keyed by `(seed, tree index)`, so the fitted model does not
//! depend on the order in which an [`Executor`] runs the trees.

use alloc::{format, vec, vec::Vec};

use rand::seq::index;
use rand::Rng;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::rng::stream_rng;
use crate::tree::{DecisionTree, TreeConfig};

/// Anything that maps a full-length feature vector to a class.
pub trait Classifier {
    fn n_features(&self) -> usize;

    fn predict(&self, sample: &[f64]) -> Label;

    fn predict_dataset(&self, data: &Dataset) -> Vec<Label> {
        let mut row = vec![0.0; data.n_features()];
        (0..data.n_samples())
            .map(|i| {
                data.row_into(i, &mut row);
                self.predict(&row)
            })
            .collect()
    }
}

impl Classifier for DecisionTree {
    fn n_features(&self) -> usize {
        DecisionTree::n_features(self)
    }

    fn predict(&self, sample: &[f64]) -> Label {
        DecisionTree::predict(self, sample)
    }
}

/// Trees voted by simple majority. An exact tie goes to class 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl Ensemble {
    pub fn new(trees: Vec<DecisionTree>, n_features: usize) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Degenerate("one tree"));
        }
        if let Some(t) = trees.iter().find(|t| t.n_features() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                actual: t.n_features(),
            });
        }
        Ok(Self { trees, n_features })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Vote counts `[class 0, class 1]`.
    pub fn votes(&self, sample: &[f64]) -> [usize; 2] {
        let ones = self.trees.iter().filter(|t| t.predict(sample) == 1).count();
        [self.trees.len() - ones, ones]
    }
}

impl Classifier for Ensemble {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, sample: &[f64]) -> Label {
        let [zeros, ones] = self.votes(sample);
        Label::from(ones > zeros)
    }
}

/// `⌊√d⌋`, but at least one.
pub fn default_features_per_tree(n_features: usize) -> usize {
    n_features.isqrt().max(1)
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_rows<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    /// `None` means `⌊√d⌋`.
    pub features_per_tree: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            features_per_tree: None,
            min_samples_split: 2,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn features_per_tree(&self, n_features: usize) -> usize {
        self.features_per_tree
            .unwrap_or_else(|| default_features_per_tree(n_features))
    }

    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidConfig(
                "n_estimators must be at least 1".into(),
            ));
        }
        let m = self.features_per_tree(n_features);
        if m == 0 || m > n_features {
            return Err(Error::InvalidConfig(format!(
                "features_per_tree {m} must lie in 1..={n_features}"
            )));
        }
        self.tree_config().validate()
    }
}

/// Standard random forest: every tree sees a uniform feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    ensemble: Ensemble,
    config: ForestConfig,
}

impl ForestModel {
    pub fn from_parts(ensemble: Ensemble, config: ForestConfig) -> Self {
        Self { ensemble, config }
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.ensemble.n_features()
    }

    fn predict(&self, sample: &[f64]) -> Label {
        self.ensemble.predict(sample)
    }
}

pub fn fit_forest(train: &Dataset, config: &ForestConfig) -> Result<ForestModel> {
    fit_forest_with(train, config, &Sequential)
}

pub fn fit_forest_with<E: Executor>(
    train: &Dataset,
    config: &ForestConfig,
    exec: &E,
) -> Result<ForestModel> {
    let d = train.n_features();
    config.validate(d)?;
    if train.is_empty() {
        return Err(Error::Degenerate("one training row"));
    }
    let m = config.features_per_tree(d);
    let tree_config = config.tree_config();
    let n = train.n_samples();
    let trees = exec
        .map(config.n_estimators, |t| {
            let mut rng = stream_rng(config.seed, t as u64);
            let rows = bootstrap_rows(n, &mut rng);
            let features = index::sample(&mut rng, d, m).into_vec();
            DecisionTree::fit(train, &rows, &features, &tree_config)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        ensemble: Ensemble::new(trees, d)?,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Node;

    fn leaf(class: Label) -> DecisionTree {
        DecisionTree::from_parts(
            vec![Node::Leaf {
                class,
                counts: [1, 1],
            }],
            vec![0],
            2,
            1,
        )
        .unwrap()
    }

    fn blobs(n: usize, d: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..d)
                    .map(|j| ((i * 7 + j * 13) % 11) as f64 + (i % 2) as f64 * 5.0)
                    .collect()
            })
            .collect();
        Dataset::from_rows(&rows, (0..n).map(|i| (i % 2) as Label).collect()).unwrap()
    }

    #[test]
    fn voting() {
        let unanimous = Ensemble::new(vec![leaf(1), leaf(1), leaf(1)], 1).unwrap();
        assert_eq!(unanimous.predict(&[0.0]), 1);
        let majority = Ensemble::new(vec![leaf(0), leaf(1), leaf(1)], 1).unwrap();
        assert_eq!(majority.predict(&[0.0]), 1);
        let tie = Ensemble::new(vec![leaf(0), leaf(1)], 1).unwrap();
        assert_eq!(tie.predict(&[0.0]), 0);
        assert!(Ensemble::new(vec![], 1).is_err());
    }

    #[test]
    fn single_tree_forest_is_a_bagged_tree() {
        let data = blobs(40, 3);
        let config = ForestConfig {
            n_estimators: 1,
            features_per_tree: Some(3),
            seed: 9,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&data, &config).unwrap();
        let mut rng = stream_rng(9, 0);
        let rows = bootstrap_rows(40, &mut rng);
        let tree = DecisionTree::fit(&data, &rows, &[0, 1, 2], &TreeConfig::default()).unwrap();
        assert_eq!(forest.ensemble().trees()[0], tree);
    }

    #[test]
    fn fixed_seed_is_deterministic_and_subsets_respected() {
        let data = blobs(60, 9);
        let config = ForestConfig {
            n_estimators: 25,
            seed: 3,
            ..ForestConfig::default()
        };
        let a = fit_forest(&data, &config).unwrap();
        let b = fit_forest(&data, &config).unwrap();
        assert_eq!(a, b);
        for tree in a.ensemble().trees() {
            assert_eq!(tree.features().len(), 3);
            assert!(tree.split_features().all(|f| tree.features().contains(&f)));
        }
        let other = fit_forest(&data, &ForestConfig { seed: 4, ..config }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn config_validation() {
        let data = blobs(10, 2);
        for bad in [
            ForestConfig {
                n_estimators: 0,
                ..ForestConfig::default()
            },
            ForestConfig {
                features_per_tree: Some(3),
                ..ForestConfig::default()
            },
            ForestConfig {
                max_depth: Some(0),
                ..ForestConfig::default()
            },
        ] {
            assert!(fit_forest(&data, &bad).is_err());
        }
        assert_eq!(default_features_per_tree(13), 3);
        assert_eq!(default_features_per_tree(4), 2);
        assert_eq!(default_features_per_tree(1), 1);
    }

    #[test]
    fn bootstrap_keeps_about_632_permille_unique_rows() {
        let n = 10_000;
        let mut rng = stream_rng(11, 0);
        let rows = bootstrap_rows(n, &mut rng);
        assert_eq!(rows.len(), n);
        let mut seen = vec![false; n];
        for r in rows {
            seen[r] = true;
        }
        let unique = seen.iter().filter(|&&s| s).count() as f64 / n as f64;
        assert!(
            (unique - (1.0 - 1.0 / core::f64::consts::E)).abs() < 0.03,
            "{unique}"
        );
    }
}
