//! Experiment harness for `msde-core`: JSON configs, a binary trajectory
//! format, and drivers that write CSV tables and JSON summaries.

pub mod config;
pub mod error;
pub mod experiments;
pub mod trajfile;

pub use config::{BandwidthConfig, BasePoints, ExperimentConfig, ExperimentKind, ManifoldConfig};
pub use error::{CliError, CliResult};
pub use trajfile::{read_trajectory, write_trajectory, TrajFileError};

/// Runs the experiment named in `cfg` and returns its summary as JSON.
pub fn run(cfg: &ExperimentConfig) -> CliResult<serde_json::Value> {
    fn json<T: serde::Serialize>(v: &T) -> CliResult<serde_json::Value> {
        serde_json::to_value(v).map_err(|e| CliError::Config(format!("summary serialization: {e}")))
    }
    match cfg.experiment {
        ExperimentKind::Simulate => json(&experiments::simulate::run(cfg)?),
        ExperimentKind::Estimate => json(&experiments::estimate::run(cfg)?),
        ExperimentKind::DensityConvergence => json(&experiments::density::run(cfg)?),
        ExperimentKind::ErrorTable => json(&experiments::error_table::run(cfg)?.summary),
        ExperimentKind::CltMonteCarlo => json(&experiments::clt::run(cfg)?),
    }
}
