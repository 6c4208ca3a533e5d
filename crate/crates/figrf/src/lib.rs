//! Data loading, model files, reports and the command line for
//! feature-importance-guided random forests.
//!
//! The numerics live in [`figrf_core`]; this crate adds what needs `std`:
//!
//! * [`table`]: CSV ingestion with categorical encoding and missing cells.
//! * [`model`]: JSON model files that round-trip exactly.
//! * [`exec`]: a rayon-backed [`figrf_core::Executor`].
//! * [`config`]: TOML run configuration.
//! * [`pipeline`]: the split → importance → tuning → evaluation experiment.
//! * [`report`]: report writers.
//! * [`cli`]: the `figrf` command.

pub mod cli;
pub mod config;
pub mod exec;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod table;

pub use figrf_core as core;
