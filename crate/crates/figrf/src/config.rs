//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 42
//!
//! [data]
//! path = "../data/iris_binary.csv"   # relative to this file
//! label_column = "setosa"
//!
//! [split]
//! test_fraction = 0.2
//! validation_fraction = 0.25         # share of the training portion
//!
//! [importance]
//! softmax_alpha = 1.5
//! ```
//!
//! Every other key has a default; see the field docs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use figrf_core::rng::derive_seed;
use figrf_core::{
    ColumnKind, ColumnSpec, ForestConfig, ImportanceConfig, MissingPolicy, SaConfig, SplitSpec,
};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub importance: ImportanceSection,
    #[serde(default)]
    pub sa: SaSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub label_column: String,
    /// Overrides for individual columns; the rest are inferred.
    #[serde(default)]
    pub columns: Vec<ColumnConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnConfig {
    pub name: String,
    pub kind: KindConfig,
    pub missing_policy: Option<PolicyConfig>,
    /// Fixes category codes; inferred (sorted) when empty.
    #[serde(default)]
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindConfig {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyConfig {
    Median,
    PlaceholderCategory,
}

impl ColumnConfig {
    pub fn to_spec(&self) -> ColumnSpec {
        let mut spec = match self.kind {
            KindConfig::Numeric => ColumnSpec::numeric(self.name.clone()),
            KindConfig::Categorical => ColumnSpec::categorical(self.name.clone()),
        };
        if let Some(p) = self.missing_policy {
            spec.missing_policy = match p {
                PolicyConfig::Median => MissingPolicy::Median,
                PolicyConfig::PlaceholderCategory => MissingPolicy::PlaceholderCategory,
            };
        }
        if spec.kind == ColumnKind::Categorical {
            spec.category_map = self.categories.clone();
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Share of all rows held out for the final evaluation.
    pub test_fraction: f64,
    /// Share of the remaining training rows used for importance and tuning.
    pub validation_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            validation_fraction: 0.25,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceSection {
    pub n_repeats: usize,
    pub softmax_alpha: f64,
    pub mi_bins: usize,
    /// Rows in the top-features table.
    pub top_k: usize,
}

impl Default for ImportanceSection {
    fn default() -> Self {
        let core = ImportanceConfig::default();
        Self {
            n_repeats: core.n_repeats,
            softmax_alpha: core.softmax_alpha,
            mi_bins: core.mi_bins,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaSection {
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    pub max_iterations: usize,
}

impl Default for SaSection {
    fn default() -> Self {
        let core = SaConfig::default();
        Self {
            initial_temperature: core.initial_temperature,
            cooling_rate: core.cooling_rate,
            max_iterations: core.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Salts separating the random streams of each pipeline stage.
mod stage {
    pub const SPLIT: u64 = 1;
    pub const IMPORTANCE_FOREST: u64 = 2;
    pub const PERMUTATION: u64 = 3;
    pub const ANNEAL: u64 = 4;
    pub const FINAL_FIGRF: u64 = 5;
    pub const FINAL_BASELINE: u64 = 6;
}

impl RunConfig {
    /// Parses a config file. Relative data and output paths are taken
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(dir) = path.parent() {
            for p in [&mut config.data.path, &mut config.output.dir] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        config
            .validate()
            .with_context(|| format!("validating {}", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.split_spec().validate().context("[split]")?;
        if !(self.split.validation_fraction > 0.0 && self.split.validation_fraction < 1.0) {
            bail!("[split] validation_fraction must lie in (0, 1)");
        }
        let baseline = self.baseline_config();
        if baseline.n_estimators == 0 {
            bail!("[baseline] n_estimators must be at least 1");
        }
        baseline.tree_config().validate().context("[baseline]")?;
        self.importance_config()
            .validate()
            .context("[importance]")?;
        self.sa_config().validate().context("[sa]")?;
        for c in &self.data.columns {
            c.to_spec()
                .validate()
                .with_context(|| format!("[data.columns] '{}'", c.name))?;
        }
        Ok(())
    }

    pub fn column_specs(&self) -> Vec<ColumnSpec> {
        self.data
            .columns
            .iter()
            .map(ColumnConfig::to_spec)
            .collect()
    }

    /// Fractions converted to shares of the whole dataset.
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.split.test_fraction,
            validation_fraction: self.split.validation_fraction * (1.0 - self.split.test_fraction),
            stratified: self.split.stratified,
            seed: derive_seed(self.seed, stage::SPLIT),
        }
    }

    /// Forest used for Gini and permutation importance.
    pub fn baseline_config(&self) -> ForestConfig {
        ForestConfig {
            n_estimators: self.baseline.n_estimators,
            max_depth: self.baseline.max_depth,
            seed: derive_seed(self.seed, stage::IMPORTANCE_FOREST),
            ..ForestConfig::default()
        }
    }

    /// The comparison forest trained alongside the final model.
    pub fn final_baseline_config(&self) -> ForestConfig {
        ForestConfig {
            seed: derive_seed(self.seed, stage::FINAL_BASELINE),
            ..self.baseline_config()
        }
    }

    pub fn importance_config(&self) -> ImportanceConfig {
        ImportanceConfig {
            n_repeats: self.importance.n_repeats,
            softmax_alpha: self.importance.softmax_alpha,
            mi_bins: self.importance.mi_bins,
            seed: derive_seed(self.seed, stage::PERMUTATION),
        }
    }

    pub fn sa_config(&self) -> SaConfig {
        SaConfig {
            initial_temperature: self.sa.initial_temperature,
            cooling_rate: self.sa.cooling_rate,
            max_iterations: self.sa.max_iterations,
            seed: derive_seed(self.seed, stage::ANNEAL),
        }
    }

    pub fn final_seed(&self) -> u64 {
        derive_seed(self.seed, stage::FINAL_FIGRF)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c: RunConfig =
            toml::from_str("[data]\npath = \"x.csv\"\nlabel_column = \"y\"\n").unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.baseline.n_estimators, 100);
        assert_eq!(c.sa.max_iterations, 30);
        assert_eq!(c.split_spec().validation_fraction, 0.2);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(toml::from_str::<RunConfig>(
            "[data]\npath = \"x\"\nlabel_column = \"y\"\ncolour = 1\n"
        )
        .is_err());
        let c: RunConfig = toml::from_str(
            "[data]\npath = \"x\"\nlabel_column = \"y\"\n[sa]\ncooling_rate = 1.5\n",
        )
        .unwrap();
        assert!(c.validate().is_err());
    }
}
