//! Model files.
//!
//! A model file is JSON holding the ensemble, the sampling distribution it
//! was trained with, per-feature usage counts and the preprocessing needed
//! to turn a raw CSV row into model input. Trees are stored as flat node
//! arrays in pre-order with explicit child indices. Floats are written in
//! shortest round-trip form, so loading reproduces every threshold bit for
//! bit.

use std::fs;
use std::path::Path;

use figrf_core::dataset::Scaling;
use figrf_core::{
    Classifier, ColumnKind, ColumnSpec, Dataset, DecisionTree, Ensemble, FigrfConfig, FigrfModel,
    ForestConfig, ForestModel, Imputer, Label, MissingPolicy, Node, Standardizer,
};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Invalid(String),
    #[error("model file: {0}")]
    Core(#[from] figrf_core::Error),
}

/// Statistical preprocessing fit on training rows, plus the column specs
/// that decode raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessing {
    pub columns: Vec<ColumnSpec>,
    pub imputer: Imputer,
    pub standardizer: Standardizer,
}

impl Preprocessing {
    /// Fits median fills, then scaling on the imputed rows.
    pub fn fit(train: &Dataset, columns: Vec<ColumnSpec>) -> Self {
        let imputer = Imputer::fit(train);
        let standardizer = Standardizer::fit(&imputer.apply(train));
        Self {
            columns,
            imputer,
            standardizer,
        }
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        self.standardizer.apply(&self.imputer.apply(data))
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        self.imputer.apply_row(row);
        self.standardizer.apply_row(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Figrf(FigrfModel),
    Forest(ForestModel),
}

impl Estimator {
    pub fn ensemble(&self) -> &Ensemble {
        match self {
            Estimator::Figrf(m) => m.ensemble(),
            Estimator::Forest(m) => m.ensemble(),
        }
    }
}

impl Classifier for Estimator {
    fn n_features(&self) -> usize {
        self.ensemble().n_features()
    }

    fn predict(&self, sample: &[f64]) -> Label {
        self.ensemble().predict(sample)
    }
}

/// A trained estimator with everything needed to score raw CSV rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub estimator: Estimator,
    pub preprocessing: Preprocessing,
    pub label_column: String,
}

impl SavedModel {
    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.preprocessing.columns.iter().map(|c| c.name.as_str())
    }

    /// Prediction for one raw row (missing cells as `NaN`).
    pub fn predict_raw(&self, raw: &[f64]) -> Label {
        let mut row = raw.to_vec();
        self.preprocessing.apply_row(&mut row);
        self.estimator.predict(&row)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ModelFile::from_model(self))
            .expect("model file types serialize infallibly");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str::<ModelFile>(text)?.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Weighted,
    Uniform,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    sampling: Sampling,
    n_estimators: usize,
    max_depth: Option<usize>,
    features_per_tree: usize,
    min_samples_split: usize,
    seed: u64,
    /// Absent for uniform sampling.
    probabilities: Option<Vec<f64>>,
    usage_counts: Vec<u32>,
    label_column: String,
    feature_names: Vec<String>,
    preprocessing: Vec<ColumnFile>,
    trees: Vec<TreeFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnFile {
    name: String,
    kind: KindFile,
    missing_policy: PolicyFile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    categories: Vec<String>,
    fill: f64,
    scaling: Option<ScalingFile>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindFile {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyFile {
    Median,
    PlaceholderCategory,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingFile {
    mean: f64,
    std: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    features: Vec<usize>,
    n_train: usize,
    nodes: Vec<NodeFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NodeFile {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        impurity_decrease: f64,
        sample_fraction: f64,
    },
    Leaf {
        class: Label,
        counts: [u64; 2],
    },
}

impl From<&Node> for NodeFile {
    fn from(node: &Node) -> Self {
        match *node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                impurity_decrease,
                sample_fraction,
            } => NodeFile::Split {
                feature,
                threshold,
                left,
                right,
                impurity_decrease,
                sample_fraction,
            },
            Node::Leaf { class, counts } => NodeFile::Leaf { class, counts },
        }
    }
}

impl From<NodeFile> for Node {
    fn from(node: NodeFile) -> Self {
        match node {
            NodeFile::Split {
                feature,
                threshold,
                left,
                right,
                impurity_decrease,
                sample_fraction,
            } => Node::Split {
                feature,
                threshold,
                left,
                right,
                impurity_decrease,
                sample_fraction,
            },
            NodeFile::Leaf { class, counts } => Node::Leaf { class, counts },
        }
    }
}

fn usage_of(ensemble: &Ensemble) -> Vec<u32> {
    let mut counts = vec![0u32; ensemble.n_features()];
    for tree in ensemble.trees() {
        for &f in tree.features() {
            counts[f] += 1;
        }
    }
    counts
}

impl ModelFile {
    fn from_model(model: &SavedModel) -> Self {
        let (sampling, n_estimators, max_depth, min_samples_split, seed, probabilities, usage) =
            match &model.estimator {
                Estimator::Figrf(m) => {
                    let c = m.config();
                    (
                        Sampling::Weighted,
                        c.n_estimators,
                        c.max_depth,
                        c.min_samples_split,
                        c.seed,
                        Some(c.probabilities.clone()),
                        m.usage_counts().to_vec(),
                    )
                }
                Estimator::Forest(m) => {
                    let c = m.config();
                    (
                        Sampling::Uniform,
                        c.n_estimators,
                        c.max_depth,
                        c.min_samples_split,
                        c.seed,
                        None,
                        usage_of(m.ensemble()),
                    )
                }
            };
        let ensemble = model.estimator.ensemble();
        let pre = &model.preprocessing;
        ModelFile {
            format_version: FORMAT_VERSION,
            sampling,
            n_estimators,
            max_depth,
            features_per_tree: ensemble.trees()[0].features().len(),
            min_samples_split,
            seed,
            probabilities,
            usage_counts: usage,
            label_column: model.label_column.clone(),
            feature_names: pre.columns.iter().map(|c| c.name.clone()).collect(),
            preprocessing: pre
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| ColumnFile {
                    name: c.name.clone(),
                    kind: match c.kind {
                        ColumnKind::Numeric => KindFile::Numeric,
                        ColumnKind::Categorical => KindFile::Categorical,
                    },
                    missing_policy: match c.missing_policy {
                        MissingPolicy::Median => PolicyFile::Median,
                        MissingPolicy::PlaceholderCategory => PolicyFile::PlaceholderCategory,
                    },
                    categories: c.category_map.clone(),
                    fill: pre.imputer.fills()[j],
                    scaling: pre.standardizer.scaling()[j].map(|s| ScalingFile {
                        mean: s.mean,
                        std: s.std,
                    }),
                })
                .collect(),
            trees: ensemble
                .trees()
                .iter()
                .map(|t| TreeFile {
                    features: t.features().to_vec(),
                    n_train: t.n_train(),
                    nodes: t.nodes().iter().map(NodeFile::from).collect(),
                })
                .collect(),
        }
    }

    fn into_model(self) -> Result<SavedModel, ModelError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ModelError::Invalid(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let d = self.preprocessing.len();
        if self.feature_names.len() != d
            || self
                .feature_names
                .iter()
                .zip(&self.preprocessing)
                .any(|(n, c)| n != &c.name)
        {
            return Err(ModelError::Invalid(
                "feature_names disagree with preprocessing columns".into(),
            ));
        }
        if self.trees.len() != self.n_estimators {
            return Err(ModelError::Invalid(format!(
                "n_estimators is {} but {} trees are stored",
                self.n_estimators,
                self.trees.len()
            )));
        }
        if let Some(t) = self
            .trees
            .iter()
            .position(|t| t.features.len() != self.features_per_tree)
        {
            return Err(ModelError::Invalid(format!(
                "tree {t} does not use {} features",
                self.features_per_tree
            )));
        }
        let trees = self
            .trees
            .into_iter()
            .map(|t| {
                DecisionTree::from_parts(
                    t.nodes.into_iter().map(Node::from).collect(),
                    t.features,
                    t.n_train,
                    d,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ensemble = Ensemble::new(trees, d)?;

        let estimator = match (self.sampling, self.probabilities) {
            (Sampling::Weighted, Some(probabilities)) => {
                let config = FigrfConfig {
                    n_estimators: self.n_estimators,
                    max_depth: self.max_depth,
                    features_per_tree: Some(self.features_per_tree),
                    min_samples_split: self.min_samples_split,
                    probabilities,
                    seed: self.seed,
                };
                config.validate()?;
                Estimator::Figrf(FigrfModel::from_parts(ensemble, config)?)
            }
            (Sampling::Uniform, None) => {
                let config = ForestConfig {
                    n_estimators: self.n_estimators,
                    max_depth: self.max_depth,
                    features_per_tree: Some(self.features_per_tree),
                    min_samples_split: self.min_samples_split,
                    seed: self.seed,
                };
                config.validate(d)?;
                Estimator::Forest(ForestModel::from_parts(ensemble, config))
            }
            (Sampling::Weighted, None) => {
                return Err(ModelError::Invalid(
                    "weighted sampling requires probabilities".into(),
                ))
            }
            (Sampling::Uniform, Some(_)) => {
                return Err(ModelError::Invalid(
                    "uniform sampling takes no probabilities".into(),
                ))
            }
        };
        if usage_of(estimator.ensemble()) != self.usage_counts {
            return Err(ModelError::Invalid(
                "usage_counts disagree with the stored trees".into(),
            ));
        }

        let mut columns = Vec::with_capacity(d);
        let mut fills = Vec::with_capacity(d);
        let mut scaling = Vec::with_capacity(d);
        for c in self.preprocessing {
            if let Some(s) = c.scaling {
                if !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()) {
                    return Err(ModelError::Invalid(format!(
                        "column '{}' has invalid scaling",
                        c.name
                    )));
                }
            }
            let spec = ColumnSpec {
                name: c.name,
                kind: match c.kind {
                    KindFile::Numeric => ColumnKind::Numeric,
                    KindFile::Categorical => ColumnKind::Categorical,
                },
                missing_policy: match c.missing_policy {
                    PolicyFile::Median => MissingPolicy::Median,
                    PolicyFile::PlaceholderCategory => MissingPolicy::PlaceholderCategory,
                },
                category_map: c.categories,
            };
            spec.validate()?;
            columns.push(spec);
            fills.push(c.fill);
            scaling.push(c.scaling.map(|s| Scaling {
                mean: s.mean,
                std: s.std,
            }));
        }
        Ok(SavedModel {
            estimator,
            preprocessing: Preprocessing {
                columns,
                imputer: Imputer::from_fills(fills),
                standardizer: Standardizer::from_scaling(scaling),
            },
            label_column: self.label_column,
        })
    }
}
