//! In-memory binary classification data and the preprocessing steps that
//! have to be fit on training rows only.
//!
//! Structural transforms (label mapping, category codes) happen when a file
//! is read. Statistical transforms ([`Imputer`], [`Standardizer`]) are fit on
//! a training partition and then applied to every partition.
//!
//! Missing numeric cells are carried as `NaN` until an [`Imputer`] fills them.

use alloc::{format, string::String, vec, vec::Vec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Class id. Only `0` and `1` are valid.
pub type Label = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    /// Replace with the median of the observed training values.
    Median,
    /// Give missing cells a category code of their own.
    PlaceholderCategory,
}

/// How one input column is decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub missing_policy: MissingPolicy,
    /// Category strings; a category's code is its position. Empty for
    /// numeric columns.
    pub category_map: Vec<String>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            missing_policy: MissingPolicy::Median,
            category_map: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            missing_policy: MissingPolicy::PlaceholderCategory,
            category_map: Vec::new(),
        }
    }

    pub fn code_of(&self, category: &str) -> Option<usize> {
        self.category_map.iter().position(|c| c == category)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ColumnKind::Numeric && !self.category_map.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "numeric column '{}' cannot carry a category map",
                self.name
            )));
        }
        for (i, c) in self.category_map.iter().enumerate() {
            if self.category_map[..i].contains(c) {
                return Err(Error::InvalidConfig(format!(
                    "column '{}' lists category '{c}' twice",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Column-major feature matrix with binary labels.
///
/// [`Dataset::new`] checks shape and label domain only, so that partitions
/// and toy inputs can hold a single class. Call
/// [`Dataset::ensure_trainable`] where both classes are required.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    labels: Vec<Label>,
    feature_names: Vec<String>,
    kinds: Vec<ColumnKind>,
}

impl Dataset {
    pub fn new(
        columns: Vec<Vec<f64>>,
        labels: Vec<Label>,
        feature_names: Vec<String>,
        kinds: Vec<ColumnKind>,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Degenerate("one feature column"));
        }
        if feature_names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: feature_names.len(),
            });
        }
        if kinds.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: kinds.len(),
            });
        }
        for column in &columns {
            if column.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    rows: column.len(),
                    labels: labels.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::NonBinaryLabel(bad.into()));
        }
        Ok(Self {
            columns,
            labels,
            feature_names,
            kinds,
        })
    }

    /// Numeric dataset from row vectors, with features named `x0, x1, ..`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: Vec<Label>) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            for (column, &v) in columns.iter_mut().zip(row) {
                column.push(v);
            }
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Self::new(columns, labels, names, vec![ColumnKind::Numeric; d])
    }

    /// Requires at least two rows and both classes.
    pub fn ensure_trainable(&self) -> Result<()> {
        if self.n_samples() < 2 {
            return Err(Error::Degenerate("two samples"));
        }
        let [c0, c1] = self.class_counts();
        if c0 == 0 || c1 == 0 {
            return Err(Error::Degenerate("one sample of each class"));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Writes row `i` into `buf`, which must have `n_features` slots.
    pub fn row_into(&self, i: usize, buf: &mut [f64]) {
        for (slot, column) in buf.iter_mut().zip(&self.columns) {
            *slot = column[i];
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Rows in the given order; indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
        }
    }

    /// Appends the rows of `other`, which must have the same columns.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.feature_names != self.feature_names {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: other.n_features(),
            });
        }
        let mut out = self.clone();
        for (mine, theirs) in out.columns.iter_mut().zip(&other.columns) {
            mine.extend_from_slice(theirs);
        }
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }

    fn map_columns(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| f(j, c))
                .collect(),
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
        }
    }
}

/// Median of the non-`NaN` entries, averaging the middle pair for even
/// counts. `None` when every entry is missing.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut seen: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if seen.is_empty() {
        return None;
    }
    seen.sort_by(f64::total_cmp);
    let mid = seen.len() / 2;
    Some(if seen.len().is_multiple_of(2) {
        (seen[mid - 1] + seen[mid]) / 2.0
    } else {
        seen[mid]
    })
}

/// Per-column median fill for `NaN` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputer {
    fills: Vec<f64>,
}

impl Imputer {
    /// Columns with no observed values are filled with `0.0`.
    pub fn fit(train: &Dataset) -> Self {
        Self {
            fills: train
                .columns
                .iter()
                .map(|c| median(c).unwrap_or(0.0))
                .collect(),
        }
    }

    pub fn from_fills(fills: Vec<f64>) -> Self {
        Self { fills }
    }

    pub fn fills(&self) -> &[f64] {
        &self.fills
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        data.map_columns(|j, c| {
            c.iter()
                .map(|&v| if v.is_nan() { self.fills[j] } else { v })
                .collect()
        })
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (v, &fill) in row.iter_mut().zip(&self.fills) {
            if v.is_nan() {
                *v = fill;
            }
        }
    }
}

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub mean: f64,
    pub std: f64,
}

/// Z-score scaling fit on training data.
///
/// Categorical and zero-variance columns are stored as `None` and pass
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    scaling: Vec<Option<Scaling>>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.n_samples() as f64;
        let scaling = train
            .columns
            .iter()
            .zip(&train.kinds)
            .map(|(c, kind)| {
                if *kind == ColumnKind::Categorical || c.is_empty() {
                    return None;
                }
                let mean = c.iter().sum::<f64>() / n;
                let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let std = libm::sqrt(var);
                // Rounding leaves ~1e-17 of spread on constant columns.
                if std <= 1e-12 * (1.0 + libm::fabs(mean)) {
                    None
                } else {
                    Some(Scaling { mean, std })
                }
            })
            .collect();
        Self { scaling }
    }

    pub fn from_scaling(scaling: Vec<Option<Scaling>>) -> Self {
        Self { scaling }
    }

    pub fn scaling(&self) -> &[Option<Scaling>] {
        &self.scaling
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        data.map_columns(|j, c| match self.scaling[j] {
            Some(s) => c.iter().map(|v| (v - s.mean) / s.std).collect(),
            None => c.to_vec(),
        })
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (v, s) in row.iter_mut().zip(&self.scaling) {
            if let Some(s) = s {
                *v = (*v - s.mean) / s.std;
            }
        }
    }
}

/// Partition sizes for [`split`]. Fractions are of the whole dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            validation_fraction: 0.0,
            stratified: true,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let tf = self.test_fraction;
        let vf = self.validation_fraction;
        if !(tf > 0.0 && tf < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction {tf} must lie in (0, 1)"
            )));
        }
        if !(0.0..1.0).contains(&vf) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction {vf} must lie in [0, 1)"
            )));
        }
        if tf + vf >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "test_fraction + validation_fraction = {} must be below 1",
                tf + vf
            )));
        }
        Ok(())
    }
}

/// Row indices of each partition, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Partitions {
    pub train: Dataset,
    /// Empty when `validation_fraction` is zero.
    pub validation: Dataset,
    pub test: Dataset,
    pub indices: SplitIndices,
}

/// Splits `total` items across groups in proportion to `sizes` using the
/// largest-remainder rule, so every share is within one of its exact quota.
fn apportion(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let mut shares: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let assigned: usize = shares.iter().sum();
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = ((sizes[a] * total) % n, (sizes[b] * total) % n);
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for &g in by_remainder.iter().take(total - assigned) {
        shares[g] += 1;
    }
    shares
}

/// Draws disjoint train/validation/test index sets covering `0..n`.
///
/// Partition sizes are `round(n * fraction)`. With stratification each
/// class is apportioned separately, so class counts in every partition are
/// within one sample of the full-data proportion.
pub fn split_indices(labels: &[Label], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let n = labels.len();
    let n_test = libm::round(n as f64 * spec.test_fraction) as usize;
    let n_val = libm::round(n as f64 * spec.validation_fraction) as usize;
    if n_test == 0 {
        return Err(Error::EmptyPartition("test"));
    }
    if spec.validation_fraction > 0.0 && n_val == 0 {
        return Err(Error::EmptyPartition("validation"));
    }
    if n_test + n_val >= n {
        return Err(Error::EmptyPartition("train"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = SplitIndices {
        train: Vec::with_capacity(n - n_test - n_val),
        validation: Vec::with_capacity(n_val),
        test: Vec::with_capacity(n_test),
    };
    let groups: Vec<Vec<usize>> = if spec.stratified {
        (0..2u8)
            .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let test_shares = apportion(&sizes, n_test);
    let val_shares = apportion(&sizes, n_val);
    for (mut group, (t, v)) in groups
        .into_iter()
        .zip(test_shares.into_iter().zip(val_shares))
    {
        if t + v > group.len() {
            return Err(Error::InvalidConfig(format!(
                "a class with {} rows cannot fill {t} test and {v} validation rows",
                group.len()
            )));
        }
        group.shuffle(&mut rng);
        out.test.extend_from_slice(&group[..t]);
        out.validation.extend_from_slice(&group[t..t + v]);
        out.train.extend_from_slice(&group[t + v..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Splits a dataset; the training partition must contain both classes.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<Partitions> {
    data.ensure_trainable()?;
    let indices = split_indices(data.labels(), spec)?;
    let train = data.select_rows(&indices.train);
    train.ensure_trainable()?;
    Ok(Partitions {
        validation: data.select_rows(&indices.validation),
        test: data.select_rows(&indices.test),
        train,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn balanced(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as Label).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_labels() {
        assert!(matches!(
            Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![0, 2]),
            Err(Error::NonBinaryLabel(2))
        ));
        let one_class = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![1, 1]).unwrap();
        assert!(one_class.ensure_trainable().is_err());
    }

    #[test]
    fn column_spec_validation() {
        let mut spec = ColumnSpec::numeric("a");
        spec.category_map.push("x".to_string());
        assert!(spec.validate().is_err());
        let mut cat = ColumnSpec::categorical("b");
        cat.category_map = vec!["x".to_string(), "x".to_string()];
        assert!(cat.validate().is_err());
    }

    #[test]
    fn median_imputation_of_single_gap() {
        let data =
            Dataset::from_rows(&[vec![1.0], vec![f64::NAN], vec![4.0]], vec![0, 1, 0]).unwrap();
        let imputed = Imputer::fit(&data).apply(&data);
        assert_eq!(imputed.column(0), &[1.0, 2.5, 4.0]);
    }

    #[test]
    fn standardizes_with_population_std() {
        let data = Dataset::from_rows(
            &[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]],
            vec![0, 1, 0],
        )
        .unwrap();
        let s = Standardizer::fit(&data);
        let scaled = s.apply(&data);
        // mean 2, std sqrt(2/3)
        let z = 1.0 / libm::sqrt(2.0 / 3.0);
        for (got, want) in scaled.column(0).iter().zip([-z, 0.0, z]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((z - 1.2247).abs() < 1e-4);
        assert_eq!(scaled.column(1), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn standardizer_uses_train_statistics() {
        let train = Dataset::from_rows(&[vec![0.0], vec![2.0]], vec![0, 1]).unwrap();
        let test = Dataset::from_rows(&[vec![10.0], vec![12.0]], vec![0, 1]).unwrap();
        let s = Standardizer::fit(&train);
        assert_eq!(s.apply(&test).column(0), &[9.0, 11.0]);
    }

    #[test]
    fn eighty_twenty_split_sizes() {
        let data = balanced(150);
        let spec = SplitSpec::default();
        let p = split(&data, &spec).unwrap();
        assert_eq!((p.train.n_samples(), p.test.n_samples()), (120, 30));
        assert!(p.validation.is_empty());
    }

    #[test]
    fn degenerate_fractions_are_rejected() {
        let data = balanced(4);
        let spec = SplitSpec {
            test_fraction: 0.1,
            ..SplitSpec::default()
        };
        assert_eq!(
            split(&data, &spec).unwrap_err(),
            Error::EmptyPartition("test")
        );
        let spec = SplitSpec {
            test_fraction: 0.5,
            validation_fraction: 0.49,
            ..SplitSpec::default()
        };
        assert_eq!(
            split(&data, &spec).unwrap_err(),
            Error::EmptyPartition("train")
        );
        assert!(SplitSpec {
            test_fraction: 1.0,
            ..SplitSpec::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn stratified_tiny_split_matches_enumeration() {
        // Enumerate every 2-row test set of ten alternating labels; exactly the
        // 25 mixed pairs keep each class within one sample of its 50% quota
        // *and* sum to the required size with no class over-drawn.
        let labels: Vec<Label> = (0..10).map(|i| (i % 2) as Label).collect();
        let mut mixed = Vec::new();
        for a in 0..10 {
            for b in a + 1..10 {
                if labels[a] != labels[b] {
                    mixed.push(vec![a, b]);
                }
            }
        }
        assert_eq!(mixed.len(), 25);
        for seed in 0..200 {
            let spec = SplitSpec {
                seed,
                ..SplitSpec::default()
            };
            let idx = split_indices(&labels, &spec).unwrap();
            assert!(mixed.contains(&idx.test), "seed {seed}: {:?}", idx.test);
            assert_eq!(idx.train.len(), 8);
        }
    }

    #[test]
    fn three_way_split_is_a_partition() {
        let labels: Vec<Label> = (0..150).map(|i| u8::from(i < 50)).collect();
        let spec = SplitSpec {
            validation_fraction: 0.2,
            ..SplitSpec::default()
        };
        let idx = split_indices(&labels, &spec).unwrap();
        let ones = |v: &[usize]| v.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!((idx.test.len(), ones(&idx.test)), (30, 10));
        assert_eq!((idx.validation.len(), ones(&idx.validation)), (30, 10));
        assert_eq!((idx.train.len(), ones(&idx.train)), (90, 30));
    }

    #[test]
    fn apportion_respects_quotas() {
        assert_eq!(apportion(&[50, 100], 30), vec![10, 20]);
        assert_eq!(apportion(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(apportion(&[7], 3), vec![3]);
    }
}
