//! JSON experiment configuration.
//!
//! `n` counts observed steps (a trajectory holds `n + 1` points), `delta` is
//! the observation interval, and `stride` the number of integrator steps per
//! observation: the integrator runs `n · stride` steps of `delta / stride`
//! and every `stride`-th point is kept.

use std::path::{Path, PathBuf};

use msde_core::{BandwidthRule, KleinEmbedding, ManifoldSpec, RadiusLaw};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Estimate,
    DensityConvergence,
    ErrorTable,
    CltMonteCarlo,
}

/// Manifold as written in a config; the ellipsoid scale is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldConfig {
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    KleinBottle {
        a: f64,
        r: f64,
        #[serde(default)]
        embedding: KleinEmbedding,
    },
}

impl ManifoldConfig {
    pub fn spec(&self) -> CliResult<ManifoldSpec> {
        Ok(match *self {
            ManifoldConfig::Ellipsoid { a, b, c } => ManifoldSpec::ellipsoid(a, b, c)?,
            ManifoldConfig::KleinBottle { a, r, embedding } => ManifoldSpec::klein_bottle_with(a, r, embedding)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthConfig {
    #[serde(default)]
    pub rule: BandwidthRule,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    /// Explicit bandwidth; overrides the rule when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

fn default_fraction() -> f64 {
    0.01
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            rule: BandwidthRule::default(),
            fraction: default_fraction(),
            h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BasePoints {
    /// Seeded uniform points on S² mapped through the ellipsoid embedding.
    UniformSphere { count: usize },
    /// Cell-centred `rows × cols` grid on `[0, 2π)²` for the Klein bottle.
    UniformGrid { rows: usize, cols: usize },
    /// Ambient coordinates.
    Explicit { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub manifold: ManifoldConfig,
    pub n: usize,
    pub delta: f64,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radius_law: RadiusLaw,
    #[serde(default)]
    pub bandwidth: BandwidthConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_points: Option<BasePoints>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Prefix lengths, in observed steps, for density convergence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
    /// Ambient base point for the Monte-Carlo CLT experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<Vec<f64>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_min_neighbors")]
    pub min_neighbors: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads. Never affects results, so it is left out of the
    /// config echoed into summaries.
    #[serde(default = "one", skip_serializing)]
    pub workers: usize,
    /// Trajectory to read (estimate) or write (simulate).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn default_threshold() -> f64 {
    msde_core::metrics::DEFAULT_THRESHOLD
}

fn default_min_neighbors() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(experiment: ExperimentKind, manifold: ManifoldConfig, n: usize, delta: f64) -> Self {
        Self {
            experiment,
            manifold,
            n,
            delta,
            stride: 1,
            seed: 0,
            radius_law: RadiusLaw::default(),
            bandwidth: BandwidthConfig::default(),
            base_points: None,
            replicates: None,
            ladder: None,
            fixed_point: None,
            threshold: default_threshold(),
            min_neighbors: default_min_neighbors(),
            output_dir: default_output_dir(),
            workers: 1,
            trajectory_file: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg = Self::from_json(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let m = self.manifold.spec()?;
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        if self.workers == 0 {
            return Err(invalid("workers must be positive"));
        }
        if self.min_neighbors == 0 {
            return Err(invalid("min_neighbors must be positive"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        match self.bandwidth.h {
            Some(h) if !(h > 0.0) || !h.is_finite() => return Err(invalid(format!("h must be positive, got {h}"))),
            Some(_) => {}
            None => {
                let f = self.bandwidth.fraction;
                if !(f > 0.0 && f < 1.0) {
                    return Err(invalid(format!("bandwidth fraction must lie in (0, 1), got {f}")));
                }
            }
        }
        if let Some(bp) = &self.base_points {
            match (bp, &m) {
                (BasePoints::UniformSphere { count }, ManifoldSpec::Ellipsoid { .. }) if *count > 0 => {}
                (BasePoints::UniformGrid { rows, cols }, ManifoldSpec::KleinBottle { .. })
                    if *rows > 0 && *cols > 0 => {}
                (BasePoints::Explicit { points }, _) if !points.is_empty() => {
                    if let Some(p) = points.iter().find(|p| p.len() != m.ambient_dim()) {
                        return Err(invalid(format!(
                            "explicit base point {p:?} is not of dimension {}",
                            m.ambient_dim()
                        )));
                    }
                }
                _ => return Err(invalid(format!("base points {bp:?} do not fit the manifold"))),
            }
        }
        match self.experiment {
            ExperimentKind::Simulate => {}
            ExperimentKind::Estimate | ExperimentKind::ErrorTable => {
                if self.base_points.is_none() {
                    return Err(invalid("base_points is required"));
                }
            }
            ExperimentKind::DensityConvergence => {
                if !matches!(
                    self.base_points,
                    Some(BasePoints::UniformSphere { .. }) | Some(BasePoints::UniformGrid { .. })
                ) {
                    return Err(invalid(
                        "density convergence needs uniform_sphere or uniform_grid base points",
                    ));
                }
                let ladder = self.ladder.as_ref().ok_or_else(|| invalid("ladder is required"))?;
                if ladder.is_empty() {
                    return Err(invalid("ladder must not be empty"));
                }
                if let Some(bad) = ladder.iter().find(|&&k| k == 0 || k > self.n) {
                    return Err(invalid(format!("ladder entry {bad} outside 1..={}", self.n)));
                }
            }
            ExperimentKind::CltMonteCarlo => {
                match self.replicates {
                    Some(r) if r >= 8 => {}
                    _ => return Err(invalid("replicates must be at least 8")),
                }
                let x = self
                    .fixed_point
                    .as_ref()
                    .ok_or_else(|| invalid("fixed_point is required"))?;
                if x.len() != m.ambient_dim() {
                    return Err(invalid(format!(
                        "fixed_point must have {} coordinates",
                        m.ambient_dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ERROR_TABLE: &str = r#"{
        "experiment": "error_table",
        "manifold": {"kind": "ellipsoid", "a": 1, "b": 1, "c": 1},
        "n": 1000,
        "delta": 0.01,
        "seed": 7,
        "base_points": {"uniform_sphere": {"count": 10}}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(ERROR_TABLE).unwrap();
        assert_eq!(c.experiment, ExperimentKind::ErrorTable);
        assert_eq!(c.stride, 1);
        assert_eq!(c.workers, 1);
        assert_eq!(c.radius_law, RadiusLaw::Chi);
        assert_eq!(c.bandwidth.fraction, 0.01);
        assert_eq!(c.bandwidth.rule, BandwidthRule::NeighborQuantile);
        assert_eq!(c.threshold, 0.05);
        c.validate().unwrap();
        let again = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ExperimentConfig::from_json(ERROR_TABLE).unwrap();
        c.delta = 0.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::from_json(ERROR_TABLE).unwrap();
        c.base_points = Some(BasePoints::UniformGrid { rows: 2, cols: 2 });
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::from_json(ERROR_TABLE).unwrap();
        c.base_points = None;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::from_json(ERROR_TABLE).unwrap();
        c.experiment = ExperimentKind::CltMonteCarlo;
        c.replicates = Some(4);
        c.fixed_point = Some(vec![0.0, 0.0, 1.0]);
        assert!(c.validate().is_err());
        c.replicates = Some(8);
        c.validate().unwrap();
        let mut c = ExperimentConfig::from_json(ERROR_TABLE).unwrap();
        c.experiment = ExperimentKind::DensityConvergence;
        c.ladder = Some(vec![10, 2000]);
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(&ERROR_TABLE.replace("\"seed\"", "\"sed\"")).is_err());
    }
}
