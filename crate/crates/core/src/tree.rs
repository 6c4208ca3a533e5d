//! Binary CART classification trees on Gini impurity.
//!
//! Trees are stored as a flat, pre-ordered node array in which every child
//! index is larger than its parent's. Split nodes keep the impurity decrease
//! `ΔGini(n) = G(n) - (n_L/n)·G(L) - (n_R/n)·G(R)` and the fraction `p(n)` of
//! training samples that reached them, which is all the Gini importance
//! accumulation needs.
//!
//! Split choice compares candidates exactly. For a node with child class
//! counts `(l0, l1)` and `(r0, r1)`, maximizing `ΔGini` is equivalent to
//! maximizing `(l0² + l1²)/n_L + (r0² + r1²)/n_R`, which is compared as a
//! fraction of integers. Ties go to the lower feature index, then the lower
//! threshold.

use alloc::{format, vec::Vec};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};

const MAX_SAMPLES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    /// Maximum number of split levels; `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// `ΔGini(n)`, never negative.
        impurity_decrease: f64,
        /// `p(n)`, the share of training samples reaching this node.
        sample_fraction: f64,
    },
    Leaf {
        class: Label,
        counts: [u64; 2],
    },
}

/// `1 - Σ (c_k / total)²`.
pub fn gini_impurity(class_counts: &[u64]) -> Result<f64> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    let total = total as f64;
    Ok(1.0
        - class_counts
            .iter()
            .map(|&c| {
                let p = c as f64 / total;
                p * p
            })
            .sum::<f64>())
}

fn gini2(c0: u64, c1: u64) -> f64 {
    let n = (c0 + c1) as f64;
    let (p0, p1) = (c0 as f64 / n, c1 as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

fn majority(counts: [u64; 2]) -> Label {
    Label::from(counts[1] > counts[0])
}

/// Point strictly between two sorted neighbours, as close to the midpoint as
/// rounding allows; `lo <= t < hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) * 0.5;
    if t >= lo && t < hi {
        t
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    features: Vec<usize>,
    n_train: usize,
    n_features: usize,
}

impl DecisionTree {
    /// Fits a tree on `rows` of `data` (repeats allowed, as produced by a
    /// bootstrap), considering only the `allowed` feature columns.
    pub fn fit(
        data: &Dataset,
        rows: &[usize],
        allowed: &[usize],
        config: &TreeConfig,
    ) -> Result<Self> {
        config.validate()?;
        if allowed.is_empty() {
            return Err(Error::InvalidConfig("allowed feature set is empty".into()));
        }
        let d = data.n_features();
        if let Some(&bad) = allowed.iter().find(|&&f| f >= d) {
            return Err(Error::InvalidConfig(format!(
                "feature index {bad} out of range for {d} features"
            )));
        }
        if rows.is_empty() {
            return Err(Error::Degenerate("one training row"));
        }
        if rows.len() >= MAX_SAMPLES {
            return Err(Error::TooManySamples(rows.len()));
        }
        let mut features = allowed.to_vec();
        features.sort_unstable();
        features.dedup();

        let mut builder = Builder {
            data,
            config,
            features: &features,
            nodes: Vec::new(),
            n_train: rows.len() as f64,
            scratch: Vec::with_capacity(rows.len()),
        };
        builder.grow(rows.to_vec(), 0);
        let nodes = builder.nodes;
        Ok(Self {
            nodes,
            features,
            n_train: rows.len(),
            n_features: d,
        })
    }

    /// Fits on every row of `data`.
    pub fn fit_all(data: &Dataset, allowed: &[usize], config: &TreeConfig) -> Result<Self> {
        let rows: Vec<usize> = (0..data.n_samples()).collect();
        Self::fit(data, &rows, allowed, config)
    }

    /// Rebuilds a tree from its parts, checking structural invariants.
    pub fn from_parts(
        nodes: Vec<Node>,
        features: Vec<usize>,
        n_train: usize,
        n_features: usize,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedTree("no nodes".into()));
        }
        if n_train == 0 {
            return Err(Error::MalformedTree("n_train is zero".into()));
        }
        if let Some(&f) = features.iter().find(|&&f| f >= n_features) {
            return Err(Error::MalformedTree(format!(
                "feature {f} out of range for {n_features} features"
            )));
        }
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    impurity_decrease,
                    sample_fraction,
                } => {
                    if !features.contains(&feature) {
                        return Err(Error::MalformedTree(format!(
                            "node {i} splits on feature {feature} outside the tree's subset"
                        )));
                    }
                    if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                        return Err(Error::MalformedTree(format!(
                            "node {i} has child indices {left}/{right}"
                        )));
                    }
                    if threshold.is_nan()
                        || impurity_decrease.is_nan()
                        || impurity_decrease < 0.0
                        || !(sample_fraction > 0.0 && sample_fraction <= 1.0)
                    {
                        return Err(Error::MalformedTree(format!(
                            "node {i} has invalid split statistics"
                        )));
                    }
                }
                Node::Leaf { class, .. } => {
                    if class > 1 {
                        return Err(Error::NonBinaryLabel(class.into()));
                    }
                }
            }
        }
        Ok(Self {
            nodes,
            features,
            n_train,
            n_features,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The feature subset the tree was allowed to split on, ascending.
    pub fn features(&self) -> &[usize] {
        &self.features
    }

    /// Number of (bootstrap) rows the tree was fit on.
    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Routes a full-length sample to a leaf; `value <= threshold` goes left.
    pub fn predict(&self, sample: &[f64]) -> Label {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if sample[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
                Node::Leaf { class, .. } => return class,
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut depth = alloc::vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *node {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }

    /// Adds `p(n)·ΔGini(n)` of every split node to `out[feature]`.
    pub fn accumulate_gini_importance(&self, out: &mut [f64]) -> Result<()> {
        if out.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: out.len(),
            });
        }
        for node in &self.nodes {
            if let Node::Split {
                feature,
                impurity_decrease,
                sample_fraction,
                ..
            } = *node
            {
                out[feature] += sample_fraction * impurity_decrease;
            }
        }
        Ok(())
    }

    /// Features that appear in at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Split { feature, .. } => Some(feature),
            Node::Leaf { .. } => None,
        })
    }
}

struct Builder<'a> {
    data: &'a Dataset,
    config: &'a TreeConfig,
    features: &'a [usize],
    nodes: Vec<Node>,
    n_train: f64,
    scratch: Vec<(f64, Label)>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    num: u128,
    den: u128,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let labels = self.data.labels();
        let ones = rows.iter().filter(|&&i| labels[i] == 1).count() as u64;
        let counts = [rows.len() as u64 - ones, ones];
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(counts),
            counts,
        });

        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_left = self.config.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_left || rows.len() < self.config.min_samples_split {
            return at;
        }
        let Some(best) = self.best_split(&rows, counts) else {
            return at;
        };

        let column = self.data.column(best.feature);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| column[i] <= best.threshold);
        let n = rows.len() as f64;
        let count = |part: &[usize]| {
            let ones = part.iter().filter(|&&i| labels[i] == 1).count() as u64;
            (part.len() as u64 - ones, ones)
        };
        let (l0, l1) = count(&left_rows);
        let (r0, r1) = count(&right_rows);
        let decrease = gini2(counts[0], counts[1])
            - (left_rows.len() as f64 / n) * gini2(l0, l1)
            - (right_rows.len() as f64 / n) * gini2(r0, r1);
        let sample_fraction = n / self.n_train;
        drop(rows);

        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            impurity_decrease: decrease.max(0.0),
            sample_fraction,
        };
        at
    }

    fn best_split(&mut self, rows: &[usize], counts: [u64; 2]) -> Option<Candidate> {
        let labels = self.data.labels();
        let n = rows.len() as u128;
        let mut best: Option<Candidate> = None;
        for &feature in self.features {
            let column = self.data.column(feature);
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&i| (column[i], labels[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

            let (mut l0, mut l1) = (0u128, 0u128);
            for k in 0..self.scratch.len() - 1 {
                if self.scratch[k].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                let (lo, hi) = (self.scratch[k].0, self.scratch[k + 1].0);
                if lo.partial_cmp(&hi) != Some(core::cmp::Ordering::Less) {
                    continue;
                }
                let nl = l0 + l1;
                let nr = n - nl;
                let (r0, r1) = (counts[0] as u128 - l0, counts[1] as u128 - l1);
                let num = (l0 * l0 + l1 * l1) * nr + (r0 * r0 + r1 * r1) * nl;
                let den = nl * nr;
                let better = match &best {
                    None => true,
                    Some(b) => num * b.den > b.num * den,
                };
                if better {
                    best = Some(Candidate {
                        feature,
                        threshold: midpoint(lo, hi),
                        num,
                        den,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_d(xs: &[f64], ys: &[Label]) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(&rows, ys.to_vec()).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini_impurity(&[5, 5]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[10, 0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[3, 1]).unwrap(), 0.375);
        assert_eq!(gini_impurity(&[0, 0]), Err(Error::EmptyCounts));
    }

    #[test]
    fn single_threshold_on_line() {
        let data = one_d(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let tree = DecisionTree::fit_all(&data, &[0], &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes().len(), 3);
        match tree.nodes()[0] {
            Node::Split {
                feature,
                threshold,
                impurity_decrease,
                sample_fraction,
                ..
            } => {
                assert_eq!((feature, threshold), (0, 2.5));
                assert_eq!((impurity_decrease, sample_fraction), (0.5, 1.0));
            }
            _ => panic!("root should split"),
        }
        assert_eq!(tree.predict(&[1.0]), 0);
        assert_eq!(tree.predict(&[9.0]), 1);
        assert_eq!(tree.predict(&[2.5]), 0);
    }

    #[test]
    fn pure_labels_give_a_single_leaf() {
        let data = one_d(&[1.0, 2.0, 3.0], &[1, 1, 1]);
        let tree = DecisionTree::fit_all(&data, &[0], &TreeConfig::default()).unwrap();
        assert_eq!(
            tree.nodes(),
            &[Node::Leaf {
                class: 1,
                counts: [0, 3]
            }]
        );
        assert_eq!(tree.predict(&[-100.0]), 1);
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn xor_needs_depth_two() {
        let data = Dataset::from_rows(
            &[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]],
            vec![0, 1, 1, 0],
        )
        .unwrap();
        let config = TreeConfig {
            max_depth: Some(2),
            ..TreeConfig::default()
        };
        let tree = DecisionTree::fit_all(&data, &[0, 1], &config).unwrap();
        assert_eq!(tree.depth(), 2);
        for i in 0..4 {
            assert_eq!(tree.predict(&data.row(i)), data.labels()[i]);
        }
        // The root split gains nothing; both children then split perfectly.
        match tree.nodes()[0] {
            Node::Split {
                feature,
                impurity_decrease,
                ..
            } => assert_eq!((feature, impurity_decrease), (0, 0.0)),
            _ => panic!("root should split"),
        }
    }

    #[test]
    fn depth_limit_and_min_samples() {
        let xs: Vec<f64> = (0..16).map(f64::from).collect();
        let ys: Vec<Label> = (0..16).map(|i| (i % 2) as Label).collect();
        let data = one_d(&xs, &ys);
        for max in 1..5 {
            let config = TreeConfig {
                max_depth: Some(max),
                ..TreeConfig::default()
            };
            let tree = DecisionTree::fit_all(&data, &[0], &config).unwrap();
            assert!(tree.depth() <= max);
        }
        let config = TreeConfig {
            min_samples_split: 17,
            ..TreeConfig::default()
        };
        let tree = DecisionTree::fit_all(&data, &[0], &config).unwrap();
        assert_eq!(tree.nodes().len(), 1);
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // Features 0 and 1 are identical, so every candidate ties.
        let data = Dataset::from_rows(
            &[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let tree = DecisionTree::fit_all(&data, &[1, 0], &TreeConfig::default()).unwrap();
        assert!(matches!(tree.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = one_d(&[1.0, 2.0], &[0, 1]);
        assert!(DecisionTree::fit_all(&data, &[], &TreeConfig::default()).is_err());
        assert!(DecisionTree::fit_all(&data, &[3], &TreeConfig::default()).is_err());
        let bad = TreeConfig {
            min_samples_split: 1,
            ..TreeConfig::default()
        };
        assert!(DecisionTree::fit_all(&data, &[0], &bad).is_err());
    }

    #[test]
    fn gini_accumulation() {
        // Balanced data split perfectly on feature 2.
        let data = Dataset::from_rows(
            &[
                [5.0, 1.0, 0.0],
                [1.0, 5.0, 0.0],
                [5.0, 5.0, 1.0],
                [1.0, 1.0, 1.0],
            ],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let tree = DecisionTree::fit_all(&data, &[2], &TreeConfig::default()).unwrap();
        let mut out = vec![0.0; 3];
        tree.accumulate_gini_importance(&mut out).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.5]);

        let leaf =
            DecisionTree::fit_all(&one_d(&[1.0, 2.0], &[1, 1]), &[0], &TreeConfig::default())
                .unwrap();
        let mut out = vec![0.25];
        leaf.accumulate_gini_importance(&mut out).unwrap();
        assert_eq!(out, vec![0.25]);
        assert!(leaf.accumulate_gini_importance(&mut [0.0, 0.0]).is_err());
    }

    #[test]
    fn bootstrap_rows_weight_by_multiplicity() {
        let data = one_d(&[1.0, 2.0], &[0, 1]);
        let tree = DecisionTree::fit(&data, &[0, 0, 0, 1], &[0], &TreeConfig::default()).unwrap();
        assert_eq!(tree.n_train(), 4);
        match tree.nodes()[0] {
            Node::Split {
                impurity_decrease, ..
            } => assert!((impurity_decrease - 0.375).abs() < 1e-15),
            _ => panic!(),
        }
        assert!(matches!(
            tree.nodes()[1],
            Node::Leaf {
                class: 0,
                counts: [3, 0]
            }
        ));
    }

    #[test]
    fn from_parts_rejects_cycles_and_foreign_features() {
        let split = |left, right, feature| Node::Split {
            feature,
            threshold: 0.0,
            left,
            right,
            impurity_decrease: 0.1,
            sample_fraction: 1.0,
        };
        let leaf = Node::Leaf {
            class: 0,
            counts: [1, 0],
        };
        assert!(DecisionTree::from_parts(
            vec![split(1, 2, 0), leaf.clone(), leaf.clone()],
            vec![0],
            4,
            2
        )
        .is_ok());
        assert!(DecisionTree::from_parts(
            vec![split(0, 2, 0), leaf.clone(), leaf.clone()],
            vec![0],
            4,
            2
        )
        .is_err());
        assert!(
            DecisionTree::from_parts(vec![split(1, 2, 1), leaf.clone(), leaf], vec![0], 4, 2)
                .is_err()
        );
        assert!(DecisionTree::from_parts(vec![], vec![0], 4, 2).is_err());
    }

    #[test]
    fn midpoint_stays_strictly_below_upper_neighbour() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo <= t && t < hi);
        let t = midpoint(-f64::MAX, f64::MAX);
        assert!((-f64::MAX..f64::MAX).contains(&t));
    }
}
