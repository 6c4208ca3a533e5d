//! The end-to-end experiment: split, preprocess, importance, tuning, final
//! fit and a single evaluation on held-out rows.
//!
//! Test rows are only reachable through [`SealedTest::evaluate`], which
//! consumes the handle, so they are scored exactly once.

use anyhow::Context;
use figrf_core::dataset::split;
use figrf_core::figrf::{fit_figrf_with, usage_report};
use figrf_core::forest::fit_forest_with;
use figrf_core::importance::profile_with;
use figrf_core::metrics::evaluate;
use figrf_core::sa::anneal_figrf;
use figrf_core::{
    Classifier, Dataset, Executor, FeatureUsage, FigrfConfig, ForestModel, HyperParams,
    ImportanceProfile, MetricReport, SaOutcome, SplitIndices,
};

use crate::config::RunConfig;
use crate::model::{Estimator, Preprocessing, SavedModel};
use crate::table::load_raw;

/// Held-out rows that can be scored once.
pub struct SealedTest {
    data: Dataset,
}

impl SealedTest {
    pub fn len(&self) -> usize {
        self.data.n_samples()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Scores every model on the test rows and gives up the handle.
    pub fn evaluate(self, models: &[&dyn Classifier]) -> anyhow::Result<Vec<MetricReport>> {
        models
            .iter()
            .map(|m| {
                Ok(evaluate(
                    &m.predict_dataset(&self.data),
                    self.data.labels(),
                )?)
            })
            .collect()
    }
}

/// Preprocessed training-side partitions and the sealed test rows.
pub struct Prepared {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: SealedTest,
    /// Fit on train ∪ validation.
    pub preprocessing: Preprocessing,
    pub label_column: String,
    pub indices: SplitIndices,
}

impl Prepared {
    pub fn feature_names(&self) -> &[String] {
        self.train.feature_names()
    }

    pub fn train_and_validation(&self) -> anyhow::Result<Dataset> {
        Ok(self.train.concat(&self.validation)?)
    }
}

/// Loads and splits the data, then fits imputation and scaling on the
/// training portion only.
pub fn prepare(config: &RunConfig) -> anyhow::Result<Prepared> {
    let raw = load_raw(
        &config.data.path,
        &config.data.label_column,
        &config.column_specs(),
    )?;
    let parts = split(&raw.data, &config.split_spec()).context("splitting the dataset")?;
    let fit_rows = parts.train.concat(&parts.validation)?;
    let preprocessing = Preprocessing::fit(&fit_rows, raw.columns);
    Ok(Prepared {
        train: preprocessing.apply(&parts.train),
        validation: preprocessing.apply(&parts.validation),
        test: SealedTest {
            data: preprocessing.apply(&parts.test),
        },
        preprocessing,
        label_column: raw.label_column,
        indices: parts.indices,
    })
}

pub struct ImportanceStage {
    /// Forest fit on the training partition; source of Gini importance.
    pub forest: ForestModel,
    pub profile: ImportanceProfile,
}

/// Gini importance from a baseline forest on the training partition,
/// permutation importance on the validation partition, mutual information
/// on the training partition.
pub fn importance<E: Executor>(
    prepared: &Prepared,
    config: &RunConfig,
    exec: &E,
) -> anyhow::Result<ImportanceStage> {
    let forest = fit_forest_with(&prepared.train, &config.baseline_config(), exec)
        .context("fitting the importance forest")?;
    let profile = profile_with(
        forest.ensemble(),
        &prepared.train,
        &prepared.validation,
        &config.importance_config(),
        exec,
    )
    .context("computing importance")?;
    Ok(ImportanceStage { forest, profile })
}

/// Anneals `(n_estimators, max_depth)` on validation fitness.
pub fn tune<E: Executor>(
    prepared: &Prepared,
    profile: &ImportanceProfile,
    config: &RunConfig,
    exec: &E,
) -> anyhow::Result<SaOutcome> {
    anneal_figrf(
        &prepared.train,
        &prepared.validation,
        &profile.probabilities,
        &config.sa_config(),
        exec,
    )
    .context("tuning")
}

pub struct RunOutcome {
    pub importance: ImportanceStage,
    pub tuning: SaOutcome,
    pub figrf: SavedModel,
    pub baseline: SavedModel,
    pub figrf_metrics: MetricReport,
    pub baseline_metrics: MetricReport,
    pub usage: Vec<FeatureUsage>,
}

/// Fits the tuned FIGRF model and the comparison forest on
/// train ∪ validation, then scores both once on the test rows.
pub fn run<E: Executor>(config: &RunConfig, exec: &E) -> anyhow::Result<RunOutcome> {
    let prepared = prepare(config)?;
    let importance = importance(&prepared, config, exec)?;
    let tuning = tune(&prepared, &importance.profile, config, exec)?;
    let fit_rows = prepared.train_and_validation()?;

    let figrf_config = final_figrf_config(&importance.profile, &tuning.best, config);
    let figrf = fit_figrf_with(&fit_rows, &figrf_config, exec).context("fitting FIGRF")?;
    let baseline = fit_forest_with(&fit_rows, &config.final_baseline_config(), exec)
        .context("fitting the baseline forest")?;
    let usage = usage_report(&figrf, prepared.feature_names())?;

    let Prepared {
        test,
        preprocessing,
        label_column,
        ..
    } = prepared;
    let reports = test.evaluate(&[&figrf, &baseline])?;
    let wrap = |estimator| SavedModel {
        estimator,
        preprocessing: preprocessing.clone(),
        label_column: label_column.clone(),
    };
    Ok(RunOutcome {
        importance,
        tuning,
        figrf: wrap(Estimator::Figrf(figrf)),
        baseline: wrap(Estimator::Forest(baseline)),
        figrf_metrics: reports[0],
        baseline_metrics: reports[1],
        usage,
    })
}

/// Tuned hyperparameters with `⌊√d⌋` features per tree, as during tuning.
fn final_figrf_config(
    profile: &ImportanceProfile,
    best: &HyperParams,
    config: &RunConfig,
) -> FigrfConfig {
    FigrfConfig {
        n_estimators: best.n_estimators() as usize,
        max_depth: best.max_depth().map(|d| d as usize),
        seed: config.final_seed(),
        ..FigrfConfig::new(profile.probabilities.clone())
    }
}
