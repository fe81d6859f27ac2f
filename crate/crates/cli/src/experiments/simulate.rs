//! Simulate a trajectory and write it as a binary trajectory file.

use std::path::PathBuf;

use msde_core::simulate::RNG_NAME;
use msde_core::{ManifoldSpec, Scheme};
use serde::Serialize;

use super::{prepare_dir, simulate_observed, write_json};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::trajfile::write_trajectory;

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub config: ExperimentConfig,
    pub manifold: ManifoldSpec,
    pub scheme: Scheme,
    pub rng: &'static str,
    pub points: usize,
    pub physical_time: f64,
    pub max_residual: f64,
    pub trajectory_file: PathBuf,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<SimulateSummary> {
    cfg.validate()?;
    let dir = prepare_dir(&cfg.output_dir)?;
    let t = simulate_observed(cfg, cfg.n, cfg.seed)?;
    let path = cfg
        .trajectory_file
        .clone()
        .unwrap_or_else(|| dir.join("trajectory.msde"));
    write_trajectory(&t, &path)?;
    let summary = SimulateSummary {
        config: cfg.clone(),
        manifold: *t.manifold(),
        scheme: t.scheme(),
        rng: RNG_NAME,
        points: t.len(),
        physical_time: t.physical_time(),
        max_residual: t.max_residual(),
        trajectory_file: path,
    };
    write_json(&dir.join("simulate_summary.json"), &summary)?;
    Ok(summary)
}
