//! Experiment drivers. Every driver writes CSV tables and a JSON summary
//! into the configured output directory and returns the summary.

pub mod clt;
pub mod density;
pub mod error_table;
pub mod estimate;
pub mod simulate;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use msde_core::simulate::{rng_from_seed, simulate as simulate_fine, splitmix64};
use msde_core::{BandwidthRule, IntrinsicPoint, Kernel, ManifoldSpec, SimConfig, Trajectory, Vector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{BasePoints, ExperimentConfig};
use crate::error::{CliError, CliResult};

/// Seed offset for base-point sampling, kept apart from the simulation stream.
const BASE_POINT_STREAM: u64 = 0x6261_7365_7074_7321;

/// Simulates `cfg.n` observed steps, integrating `stride` steps per
/// observation.
pub fn simulate_observed(cfg: &ExperimentConfig, n: usize, seed: u64) -> CliResult<Trajectory> {
    let m = cfg.manifold.spec()?;
    let fine = SimConfig::new(m, n * cfg.stride, cfg.delta / cfg.stride as f64, seed).with_radius_law(cfg.radius_law);
    let t = simulate_fine(&fine)?;
    if cfg.stride == 1 {
        Ok(t)
    } else {
        Ok(t.downsample(cfg.stride)?)
    }
}

/// Bandwidth and a description of where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedBandwidth {
    pub h: f64,
    /// `None` when `h` was given explicitly.
    pub rule: Option<BandwidthRule>,
    pub fraction: Option<f64>,
}

pub fn resolve_bandwidth(cfg: &ExperimentConfig, t: &Trajectory, kernel: &Kernel) -> CliResult<ResolvedBandwidth> {
    match cfg.bandwidth.h {
        Some(h) => Ok(ResolvedBandwidth {
            h,
            rule: None,
            fraction: None,
        }),
        None => Ok(ResolvedBandwidth {
            h: cfg.bandwidth.rule.bandwidth(t, cfg.bandwidth.fraction, kernel)?,
            rule: Some(cfg.bandwidth.rule),
            fraction: Some(cfg.bandwidth.fraction),
        }),
    }
}

/// A base point with its parameters (when on the manifold) and a
/// quadrature weight for integrals over the manifold's surface measure.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint {
    pub intrinsic: Option<IntrinsicPoint>,
    pub ambient: Vector,
    pub weight: f64,
}

/// Builds base points. Uniform sphere samples carry Monte-Carlo weights
/// `4π/count · det(S)·|S⁻¹x|` (the ellipsoid area element relative to the
/// sphere); grid points carry `|∂ᵤφ ∧ ∂ᵥφ| · (2π)²/(rows·cols)`. Explicit
/// points get weight 1.
pub fn base_points(spec: &BasePoints, m: &ManifoldSpec, seed: u64) -> CliResult<Vec<BasePoint>> {
    match spec {
        BasePoints::UniformSphere { count } => {
            let s = m
                .semi_axes()
                .ok_or_else(|| CliError::Config("uniform_sphere base points need an ellipsoid".into()))?;
            let det = s[0] * s[1] * s[2];
            let mut rng = rng_from_seed(splitmix64(seed ^ BASE_POINT_STREAM));
            let mut out = Vec::with_capacity(*count);
            while out.len() < *count {
                let g: [f64; 3] = [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ];
                let Ok(q) = IntrinsicPoint::sphere_from(g) else {
                    continue;
                };
                let x = m.embed(&q)?;
                let stretch: f64 = (0..3).map(|i| (x[i] / (s[i] * s[i])).powi(2)).sum::<f64>().sqrt();
                out.push(BasePoint {
                    intrinsic: Some(q),
                    weight: 4.0 * PI / *count as f64 * det * stretch,
                    ambient: x,
                });
            }
            Ok(out)
        }
        BasePoints::UniformGrid { rows, cols } => {
            let cell = (2.0 * PI).powi(2) / (*rows * *cols) as f64;
            msde_core::geometry::angle_grid(*rows, *cols, true)
                .into_iter()
                .map(|q| {
                    let j = m.klein_jacobian(&q)?;
                    let area = (j.transpose() * &j).determinant().max(0.0).sqrt();
                    Ok(BasePoint {
                        intrinsic: Some(q),
                        ambient: m.embed(&q)?,
                        weight: area * cell,
                    })
                })
                .collect()
        }
        BasePoints::Explicit { points } => Ok(points
            .iter()
            .map(|p| {
                let ambient = Vector::from_column_slice(p);
                BasePoint {
                    intrinsic: m.intrinsic_of(p).ok(),
                    ambient,
                    weight: 1.0,
                }
            })
            .collect()),
    }
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(f))
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn prepare_dir(dir: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

/// Count, mean, sample standard deviation and median of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub median: Option<f64>,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                mean: None,
                std: None,
                median: None,
            };
        }
        let (mean, std) = msde_core::metrics::mean_std(values);
        Self {
            count: values.len(),
            mean: Some(mean),
            std: Some(std),
            median: Some(msde_core::metrics::median(values)),
        }
    }
}

/// Column names `prefix_1 … prefix_k`.
pub fn numbered(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}_{i}")).collect()
}

/// Column names `prefix_ij` for the upper triangle of a `p × p` matrix.
pub fn upper_triangle(prefix: &str, p: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 1..=p {
        for j in i..=p {
            out.push(format!("{prefix}_{i}{j}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_weights_integrate_area() {
        let m = ManifoldSpec::sphere();
        let pts = base_points(&BasePoints::UniformSphere { count: 50 }, &m, 1).unwrap();
        let total: f64 = pts.iter().map(|p| p.weight).sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_weights_estimate_area() {
        // surface area of the ellipsoid with semi-axes (1, 2, 3), by quadrature
        let m = ManifoldSpec::ellipsoid_with_scale(1.0, 2.0, 3.0, 1.0).unwrap();
        let pts = base_points(&BasePoints::UniformSphere { count: 200_000 }, &m, 2).unwrap();
        let total: f64 = pts.iter().map(|p| p.weight).sum();
        assert!((total - 48.88214630).abs() < 0.2, "{total}");
    }

    #[test]
    fn klein_grid_weights_integrate_area() {
        // ∫∫ r·sqrt((a + r cos v)² + r² sin²v / 4) du dv for a = 2, r = 1,
        // by adaptive quadrature; the midpoint rule is spectrally accurate here
        let m = ManifoldSpec::klein_bottle(2.0, 1.0).unwrap();
        let pts = base_points(&BasePoints::UniformGrid { rows: 40, cols: 40 }, &m, 0).unwrap();
        let total: f64 = pts.iter().map(|p| p.weight).sum();
        assert!((total - 80.26054900856562).abs() < 1e-8, "{total}");
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_opt(None), "");
    }
}
