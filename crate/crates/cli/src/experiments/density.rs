//! Convergence of the occupation density along a ladder of trajectory
//! prefixes.
//!
//! A single trajectory of `n` observed steps is simulated. The reference
//! density is its full-length estimate; each rung `nᵢ` of the ladder uses
//! the first `nᵢ` steps. Occupation densities are turned into probability
//! densities by dividing by the physical time `nᵢΔ` and by `κ₁₀`, with one
//! bandwidth (resolved on the full trajectory) shared by all prefixes, so
//! the smoothing bias cancels and the errors measure the sampling
//! fluctuation alone.

use msde_core::metrics::{l2_density_error, least_squares_slope};
use msde_core::{EstimatorConfig, LocalEstimator, ManifoldSpec, Vector};
use serde::Serialize;

use super::{
    base_points, fmt_f64, numbered, prepare_dir, resolve_bandwidth, simulate_observed, with_pool, write_json,
    ResolvedBandwidth, Table,
};
use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRow {
    pub n: usize,
    pub physical_time: f64,
    pub l2_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    pub config: ExperimentConfig,
    pub manifold: ManifoldSpec,
    pub bandwidth: ResolvedBandwidth,
    pub kappa10: f64,
    pub reference_points: usize,
    pub base_points: usize,
    pub rows: Vec<LadderRow>,
    /// Least-squares slope of log₁₀ error against log₁₀ n over rows with
    /// nonzero error; `None` with fewer than two such rows.
    pub slope: Option<f64>,
}

fn densities(
    t: &msde_core::Trajectory,
    cfg: EstimatorConfig,
    xs: &[Vector],
    kappa10: f64,
) -> msde_core::Result<Vec<f64>> {
    let est = LocalEstimator::new(t, cfg)?;
    let scale = 1.0 / (t.physical_time() * kappa10);
    est.occupation_density_batch(xs)
        .into_iter()
        .map(|l| l.map(|l| l * scale))
        .collect()
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<DensitySummary> {
    cfg.validate()?;
    let dir = prepare_dir(&cfg.output_dir)?;
    let full = simulate_observed(cfg, cfg.n, cfg.seed)?;
    let m = *full.manifold();
    let d = m.intrinsic_dim();
    let est_cfg = EstimatorConfig {
        min_neighbors: cfg.min_neighbors,
        ..EstimatorConfig::new(1.0, d)
    };
    let bw = resolve_bandwidth(cfg, &full, &est_cfg.kernel)?;
    let est_cfg = EstimatorConfig { h: bw.h, ..est_cfg };
    let kappa10 = est_cfg.kernel.moment(1, 0, d as u32)?;
    let pts = base_points(cfg.base_points.as_ref().expect("validated"), &m, cfg.seed)?;
    let xs: Vec<Vector> = pts.iter().map(|b| b.ambient.clone()).collect();
    let weights: Vec<f64> = pts.iter().map(|b| b.weight).collect();
    let ladder = cfg.ladder.clone().expect("validated");

    let (reference, per_rung) = with_pool(cfg.workers, || -> CliResult<_> {
        let reference = densities(&full, est_cfg, &xs, kappa10)?;
        let mut per_rung = Vec::with_capacity(ladder.len());
        for &n in &ladder {
            let prefix = full.prefix(n + 1)?;
            per_rung.push(densities(&prefix, est_cfg, &xs, kappa10)?);
        }
        Ok((reference, per_rung))
    })??;

    let mut rows = Vec::with_capacity(ladder.len());
    for (&n, dens) in ladder.iter().zip(&per_rung) {
        rows.push(LadderRow {
            n,
            physical_time: n as f64 * full.delta(),
            l2_error: l2_density_error(dens, &reference, &weights)?,
        });
    }
    let fit: Vec<&LadderRow> = rows.iter().filter(|r| r.l2_error > 0.0).collect();
    let slope = if fit.len() >= 2 {
        let x: Vec<f64> = fit.iter().map(|r| (r.n as f64).log10()).collect();
        let y: Vec<f64> = fit.iter().map(|r| r.l2_error.log10()).collect();
        least_squares_slope(&x, &y).ok()
    } else {
        None
    };

    let mut table = Table::new(["n", "physical_time", "l2_error"].map(String::from).to_vec());
    for r in &rows {
        table.push(vec![r.n.to_string(), fmt_f64(r.physical_time), fmt_f64(r.l2_error)]);
    }
    table.write(&dir.join("density_convergence.csv"))?;

    let mut header = vec!["index".to_string()];
    header.extend(numbered("x", full.dim()));
    header.extend(["weight", "reference_density"].map(String::from));
    header.extend(ladder.iter().map(|n| format!("density_n{n}")));
    let mut grid = Table::new(header);
    for (i, x) in xs.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(weights[i]));
        row.push(fmt_f64(reference[i]));
        row.extend(per_rung.iter().map(|dens| fmt_f64(dens[i])));
        grid.push(row);
    }
    grid.write(&dir.join("density_grid.csv"))?;

    let summary = DensitySummary {
        config: cfg.clone(),
        manifold: m,
        bandwidth: bw,
        kappa10,
        reference_points: full.len(),
        base_points: xs.len(),
        rows,
        slope,
    };
    write_json(&dir.join("density_summary.json"), &summary)?;
    Ok(summary)
}
