//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use figrf_core::metrics::evaluate;

use crate::config::RunConfig;
use crate::exec::Rayon;
use crate::model::SavedModel;
use crate::pipeline;
use crate::report;
use crate::table::load_with_schema;

#[derive(Debug, Parser)]
#[command(
    name = "figrf",
    version,
    about = "Feature-importance-guided random forests"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every logical CPU.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct SaOverrides {
    /// Annealing iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Starting temperature.
    #[arg(long)]
    pub initial_temp: Option<f64>,
    /// Temperature multiplier per iteration, in (0, 1).
    #[arg(long)]
    pub cooling_rate: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the feature-importance report for the training data.
    Importance,
    /// Search n_estimators and max_depth by simulated annealing.
    Tune(SaOverrides),
    /// Run the full pipeline and compare against a standard forest.
    Run(SaOverrides),
    /// Predict labels for a CSV, one per line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Write predictions here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a saved model on a labelled CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
}

pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Importance => {
            let (config, out, exec) = setup(&cli, SaOverrides::default())?;
            let prepared = pipeline::prepare(&config)?;
            let stage = pipeline::importance(&prepared, &config, &exec)?;
            report::write_importance(
                &out,
                &stage.profile,
                prepared.feature_names(),
                config.importance.top_k,
            )?;
            print_top(
                &stage.profile,
                prepared.feature_names(),
                config.importance.top_k,
            );
        }
        Command::Tune(sa) => {
            let (config, out, exec) = setup(&cli, sa)?;
            let prepared = pipeline::prepare(&config)?;
            let stage = pipeline::importance(&prepared, &config, &exec)?;
            let outcome = pipeline::tune(&prepared, &stage.profile, &config, &exec)?;
            report::write_tuning(&out, &outcome)?;
            eprintln!(
                "best: n_estimators={} max_depth={} fitness={:.4}",
                outcome.best.n_estimators(),
                depth_label(outcome.best.max_depth()),
                outcome.best_fitness
            );
        }
        Command::Run(sa) => {
            let (config, out, exec) = setup(&cli, sa)?;
            let outcome = pipeline::run(&config, &exec)?;
            let names: Vec<String> = outcome.figrf.feature_names().map(str::to_owned).collect();
            report::write_importance(
                &out,
                &outcome.importance.profile,
                &names,
                config.importance.top_k,
            )?;
            report::write_tuning(&out, &outcome.tuning)?;
            outcome.figrf.save(out.join("model.json"))?;
            outcome.baseline.save(out.join("baseline_model.json"))?;
            report::write_comparison(
                &out,
                &outcome.figrf_metrics,
                &outcome.baseline_metrics,
                &outcome.tuning.best,
                &outcome.usage,
            )?;
            eprintln!("model     accuracy  precision  recall  f1");
            for (name, r) in [
                ("FIGRF", &outcome.figrf_metrics),
                ("RF", &outcome.baseline_metrics),
            ] {
                eprintln!(
                    "{name:<9} {:<9.4} {:<10.4} {:<7.4} {:.4}",
                    r.accuracy, r.precision, r.recall, r.f1
                );
            }
        }
        Command::Predict {
            ref model,
            ref input,
            ref output,
        } => {
            let model = SavedModel::load(model)?;
            let rows = load_with_schema(input, &model.preprocessing.columns, &model.label_column)?;
            let mut text = String::with_capacity(rows.rows.len() * 2);
            for row in &rows.rows {
                text.push(char::from(b'0' + model.predict_raw(row)));
                text.push('\n');
            }
            match output {
                Some(path) => {
                    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
                }
                None => std::io::stdout().lock().write_all(text.as_bytes())?,
            }
        }
        Command::Evaluate {
            ref model,
            ref input,
        } => {
            let model = SavedModel::load(model)?;
            let rows = load_with_schema(input, &model.preprocessing.columns, &model.label_column)?;
            let Some(labels) = rows.labels else {
                bail!(
                    "{}: label column '{}' is required for evaluation",
                    input.display(),
                    model.label_column
                );
            };
            let predictions: Vec<_> = rows.rows.iter().map(|r| model.predict_raw(r)).collect();
            let metrics = report::MetricsJson::from(&evaluate(&predictions, &labels)?);
            let mut text = serde_json::to_string_pretty(&metrics)?;
            text.push('\n');
            if let Some(dir) = &cli.out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("metrics.json"), &text)?;
            }
            std::io::stdout().lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn setup(cli: &Cli, sa: SaOverrides) -> anyhow::Result<(RunConfig, PathBuf, Rayon)> {
    let Some(path) = &cli.config else {
        bail!("--config is required for this command");
    };
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = sa.iterations {
        config.sa.max_iterations = n;
    }
    if let Some(t) = sa.initial_temp {
        config.sa.initial_temperature = t;
    }
    if let Some(r) = sa.cooling_rate {
        config.sa.cooling_rate = r;
    }
    config.validate()?;
    let out = cli.out.clone().unwrap_or_else(|| config.output.dir.clone());
    create_dir(&out)?;
    let exec = Rayon::new(cli.threads).context("starting the thread pool")?;
    Ok((config, out, exec))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn depth_label(depth: Option<u32>) -> String {
    depth.map_or_else(|| "None".to_owned(), |d| d.to_string())
}

fn print_top(profile: &figrf_core::ImportanceProfile, names: &[String], k: usize) {
    for (pos, &i) in profile.ranking.iter().take(k).enumerate() {
        eprintln!(
            "{:>2}. {:<30} avg={:.4} p={:.4}",
            pos + 1,
            names[i],
            profile.averaged[i],
            profile.probabilities[i]
        );
    }
}
