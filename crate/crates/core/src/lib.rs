//! Feature-importance-guided random forests.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole
//! numerical side of the method:
//!
//! * [`dataset`]: in-memory binary classification data, leak-free
//!   splitting, median imputation and standardization.
//! * [`tree`]: CART trees on Gini impurity that remember the weighted
//!   impurity decrease of every split.
//! * [`forest`]: the uniform-sampling random forest used as the baseline
//!   and as the source of Gini importance.
//! * [`importance`]: permutation, Gini and mutual-information importance,
//!   combined into a softmax sampling distribution.
//! * [`figrf`]: forests whose per-tree feature subsets are drawn from that
//!   distribution, with usage accounting.
//! * [`metrics`]: binary confusion-matrix metrics and the composite fitness.
//! * [`sa`]: simulated annealing over `(n_estimators, max_depth)`.
//!
//! File formats, CSV ingestion, threading and the command line live in the
//! `figrf` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod exec;
pub mod figrf;
pub mod forest;
pub mod importance;
pub mod metrics;
pub mod rng;
pub mod sa;
pub mod tree;

pub use dataset::{
    ColumnKind, ColumnSpec, Dataset, Imputer, Label, MissingPolicy, Partitions, SplitIndices,
    SplitSpec, Standardizer,
};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use figrf::{FeatureUsage, FigrfConfig, FigrfModel};
pub use forest::{Classifier, Ensemble, ForestConfig, ForestModel};
pub use importance::{ImportanceConfig, ImportanceProfile};
pub use metrics::{ConfusionMatrix, MetricReport};
pub use sa::{HyperParams, SaConfig, SaOutcome, SaRecord};
pub use tree::{DecisionTree, Node, TreeConfig};
