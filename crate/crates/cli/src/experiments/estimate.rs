//! Evaluate all estimators at the configured base points of a trajectory
//! read from disk (or simulated when no file is given).

use msde_core::{EstimatorConfig, LocalEstimator, ManifoldSpec, Scheme};
use serde::Serialize;

use super::{
    base_points, fmt_f64, numbered, prepare_dir, resolve_bandwidth, simulate_observed, upper_triangle, with_pool,
    write_json, ResolvedBandwidth, Table,
};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::trajfile::read_trajectory;

#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub config: ExperimentConfig,
    pub manifold: ManifoldSpec,
    pub scheme: Scheme,
    pub points: usize,
    pub bandwidth: ResolvedBandwidth,
    pub intrinsic_dim: usize,
    pub base_points: usize,
    pub failed: usize,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<EstimateSummary> {
    cfg.validate()?;
    let dir = prepare_dir(&cfg.output_dir)?;
    let t = match &cfg.trajectory_file {
        Some(path) => read_trajectory(path)?,
        None => simulate_observed(cfg, cfg.n, cfg.seed)?,
    };
    let m = *t.manifold();
    let d = m.intrinsic_dim();
    let p = t.dim();
    let est_cfg = EstimatorConfig {
        min_neighbors: cfg.min_neighbors,
        ..EstimatorConfig::new(1.0, d)
    };
    let bw = resolve_bandwidth(cfg, &t, &est_cfg.kernel)?;
    let est_cfg = EstimatorConfig { h: bw.h, ..est_cfg };
    let pts = base_points(cfg.base_points.as_ref().expect("validated"), &m, cfg.seed)?;
    let xs: Vec<_> = pts.iter().map(|b| b.ambient.clone()).collect();
    let results = with_pool(cfg.workers, || {
        LocalEstimator::new(&t, est_cfg).map(|e| e.estimate_batch(&xs))
    })??;

    let mut header = vec!["index".to_string()];
    header.extend(numbered("x", p));
    header.extend(["status", "l_hat", "n_active", "gap_flag", "low_support"].map(String::from));
    header.extend(numbered("mu_e", p));
    header.extend(numbered("mu_o", p));
    header.extend(upper_triangle("pi", p));
    let mut table = Table::new(header);
    let mut failed = 0;
    for (i, (x, r)) in xs.iter().zip(&results).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        match r {
            Ok(e) => {
                row.extend([
                    "ok".to_string(),
                    fmt_f64(e.l_hat),
                    e.n_active.to_string(),
                    e.gap_flag.to_string(),
                    e.low_support.to_string(),
                ]);
                row.extend(e.mu_e.iter().map(|v| fmt_f64(*v)));
                row.extend(e.mu_o.iter().map(|v| fmt_f64(*v)));
                for a in 0..p {
                    for b in a..p {
                        row.push(fmt_f64(e.pi_hat[(a, b)]));
                    }
                }
            }
            Err(err) => {
                failed += 1;
                row.push(err.to_string());
                row.resize(table.header.len(), String::new());
            }
        }
        table.push(row);
    }
    table.write(&dir.join("estimates.csv"))?;
    let summary = EstimateSummary {
        config: cfg.clone(),
        manifold: m,
        scheme: t.scheme(),
        points: t.len(),
        bandwidth: bw,
        intrinsic_dim: d,
        base_points: xs.len(),
        failed,
    };
    write_json(&dir.join("estimate_summary.json"), &summary)?;
    Ok(summary)
}
