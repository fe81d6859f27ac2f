//! Nadaraya–Watson estimators of the occupation density, diffusion matrix,
//! tangent projector and drift at arbitrary ambient base points.
//!
//! With weights `w_k = K(|x_k − x| / h)` and sums over `k = 0 … N−2`:
//!
//! * `L̂(x) = (Δ / h^d) Σ w_k`
//! * `π̂(x) = (1/Δ) Σ w_k (x_{k+1} − x_k)(x_{k+1} − x_k)ᵀ / Σ w_k`
//! * `μ̂_E(x) = (1/Δ) Σ w_k (x_{k+1} − x_k) / Σ w_k`
//! * `P̂ₓ` = projector onto the top-`d` eigenvectors of `π̂(x)`
//! * `μ̂(x) = P̂ₓ μ̂_E(x)`
//!
//! Terms with zero weight are skipped, so the brute-force functions and the
//! grid-indexed [`LocalEstimator`] add identical terms in identical order and
//! agree bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::Kernel;
use crate::neighbors::GridIndex;
use crate::numerics::{sym_eig, top_d_projector};
use crate::simulate::Trajectory;
use crate::sum::CompensatedSum;
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Bandwidth in ambient length units.
    pub h: f64,
    /// Intrinsic dimension of the manifold.
    pub d: usize,
    #[serde(default)]
    pub kernel: Kernel,
    /// Below this many nonzero weights a point is flagged `low_support`.
    #[serde(default = "default_min_neighbors")]
    pub min_neighbors: usize,
}

fn default_min_neighbors() -> usize {
    5
}

impl EstimatorConfig {
    pub fn new(h: f64, d: usize) -> Self {
        Self {
            h,
            d,
            kernel: Kernel::bump(),
            min_neighbors: default_min_neighbors(),
        }
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self, ambient_dim: usize) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {}",
                self.h
            )));
        }
        if self.d == 0 || self.d > ambient_dim {
            return Err(Error::InvalidInput(format!(
                "intrinsic dimension {} outside 1..={ambient_dim}",
                self.d
            )));
        }
        if !(self.kernel.amplitude > 0.0) || !(self.kernel.support > 0.0) {
            return Err(Error::InvalidInput(
                "kernel must be positive with positive support".into(),
            ));
        }
        Ok(())
    }

    /// Kernel support radius `L·h` in ambient units.
    pub fn support_radius(&self) -> f64 {
        self.kernel.support * self.h
    }
}

/// All estimates at one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimates {
    pub base: Vector,
    pub l_hat: f64,
    pub pi_hat: Matrix,
    pub mu_e: Vector,
    pub p_hat: Matrix,
    pub mu_o: Vector,
    /// Number of nonzero kernel weights.
    pub n_active: usize,
    /// No clear spectral gap after the `d`-th eigenvalue of `π̂`.
    pub gap_flag: bool,
    /// Fewer than `min_neighbors` nonzero weights.
    pub low_support: bool,
}

/// Weighted sums shared by every estimator at one base point.
#[derive(Debug, Clone)]
struct LocalSums {
    weight: f64,
    n_active: usize,
    first: Vec<f64>,
    /// Row-major upper triangle including the diagonal.
    second: Vec<f64>,
}

fn accumulate(t: &Trajectory, x: &[f64], c: &EstimatorConfig, ks: impl Iterator<Item = usize>) -> LocalSums {
    let p = t.dim();
    let inv_h_sq = 1.0 / (c.h * c.h);
    let mut weight = CompensatedSum::default();
    let mut first = vec![CompensatedSum::default(); p];
    let mut second = vec![CompensatedSum::default(); p * (p + 1) / 2];
    let mut n_active = 0;
    let mut inc = [0.0f64; crate::neighbors::MAX_DIM];
    for k in ks {
        let xk = t.point(k);
        let d2: f64 = xk.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let w = c.kernel.eval_sq(d2 * inv_h_sq);
        if w == 0.0 {
            continue;
        }
        n_active += 1;
        weight.add(w);
        let xk1 = t.point(k + 1);
        for i in 0..p {
            inc[i] = xk1[i] - xk[i];
            first[i].add(w * inc[i]);
        }
        let mut slot = 0;
        for i in 0..p {
            let wi = w * inc[i];
            for j in i..p {
                second[slot].add(wi * inc[j]);
                slot += 1;
            }
        }
    }
    LocalSums {
        weight: weight.value(),
        n_active,
        first: first.iter().map(CompensatedSum::value).collect(),
        second: second.iter().map(CompensatedSum::value).collect(),
    }
}

impl LocalSums {
    fn occupation_density(&self, delta: f64, c: &EstimatorConfig) -> f64 {
        delta / c.h.powi(c.d as i32) * self.weight
    }

    fn check_support(&self) -> Result<()> {
        if self.weight > 0.0 {
            Ok(())
        } else {
            Err(Error::InsufficientLocalData)
        }
    }

    fn diffusion(&self, p: usize, delta: f64) -> Result<Matrix> {
        self.check_support()?;
        let scale = 1.0 / (delta * self.weight);
        let mut m = Matrix::zeros(p, p);
        let mut slot = 0;
        for i in 0..p {
            for j in i..p {
                let v = self.second[slot] * scale;
                m[(i, j)] = v;
                m[(j, i)] = v;
                slot += 1;
            }
        }
        Ok(m)
    }

    fn euclidean_drift(&self, delta: f64) -> Result<Vector> {
        self.check_support()?;
        let scale = 1.0 / (delta * self.weight);
        Ok(Vector::from_iterator(
            self.first.len(),
            self.first.iter().map(|v| v * scale),
        ))
    }

    fn point_estimates(&self, x: &[f64], delta: f64, c: &EstimatorConfig) -> Result<PointEstimates> {
        let p = x.len();
        let pi_hat = self.diffusion(p, delta)?;
        let mu_e = self.euclidean_drift(delta)?;
        let (p_hat, gap_flag) = tangent_projector_estimate(&pi_hat, c.d)?;
        let mu_o = &p_hat * &mu_e;
        Ok(PointEstimates {
            base: Vector::from_column_slice(x),
            l_hat: self.occupation_density(delta, c),
            pi_hat,
            mu_e,
            p_hat,
            mu_o,
            n_active: self.n_active,
            gap_flag,
            low_support: self.n_active < c.min_neighbors,
        })
    }
}

fn check_inputs(t: &Trajectory, x: &[f64], c: &EstimatorConfig) -> Result<()> {
    c.validate(t.dim())?;
    if x.len() != t.dim() {
        return Err(Error::LengthMismatch(x.len(), t.dim()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("base point has non-finite coordinates".into()));
    }
    Ok(())
}

fn brute_sums(t: &Trajectory, x: &[f64], c: &EstimatorConfig) -> Result<LocalSums> {
    check_inputs(t, x, c)?;
    Ok(accumulate(t, x, c, 0..t.len() - 1))
}

/// `L̂(x)`; zero when no trajectory point lies within `L·h` of `x`.
pub fn occupation_density(t: &Trajectory, x: &[f64], c: &EstimatorConfig) -> Result<f64> {
    Ok(brute_sums(t, x, c)?.occupation_density(t.delta(), c))
}

/// `π̂(x)`, exactly symmetric.
pub fn diffusion_estimate(t: &Trajectory, x: &[f64], c: &EstimatorConfig) -> Result<Matrix> {
    brute_sums(t, x, c)?.diffusion(t.dim(), t.delta())
}

/// `μ̂_E(x)`, the drift of the embedded process including its normal part.
pub fn euclidean_drift_estimate(t: &Trajectory, x: &[f64], c: &EstimatorConfig) -> Result<Vector> {
    brute_sums(t, x, c)?.euclidean_drift(t.delta())
}

/// Projector onto the top-`d` eigenspace of `pi_hat`, with the small-gap flag.
pub fn tangent_projector_estimate(pi_hat: &Matrix, d: usize) -> Result<(Matrix, bool)> {
    let proj = top_d_projector(&sym_eig(pi_hat)?, d)?;
    Ok((proj.matrix, proj.small_gap))
}

/// All estimates at `x` from one pass over the trajectory.
pub fn drift_estimate(t: &Trajectory, x: &[f64], c: &EstimatorConfig) -> Result<PointEstimates> {
    brute_sums(t, x, c)?.point_estimates(x, t.delta(), c)
}

/// Estimates at many base points; a failing point does not abort the batch.
pub fn batch_estimate(t: &Trajectory, xs: &[Vector], c: &EstimatorConfig) -> Result<Vec<Result<PointEstimates>>> {
    let est = LocalEstimator::new(t, *c)?;
    Ok(est.estimate_batch(xs))
}

/// Estimator bound to one trajectory, with a spatial index so that each
/// base point only visits points inside the kernel support.
#[derive(Debug, Clone)]
pub struct LocalEstimator<'t> {
    traj: &'t Trajectory,
    cfg: EstimatorConfig,
    index: GridIndex,
}

impl<'t> LocalEstimator<'t> {
    pub fn new(traj: &'t Trajectory, cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate(traj.dim())?;
        let index = GridIndex::new(traj, cfg.support_radius(), traj.len() - 1);
        Ok(Self { traj, cfg, index })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn trajectory(&self) -> &Trajectory {
        self.traj
    }

    fn sums(&self, x: &[f64]) -> Result<LocalSums> {
        check_inputs(self.traj, x, &self.cfg)?;
        let mut ks = Vec::new();
        self.index.candidates(x, &mut ks);
        Ok(accumulate(self.traj, x, &self.cfg, ks.into_iter()))
    }

    pub fn occupation_density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.sums(x)?.occupation_density(self.traj.delta(), &self.cfg))
    }

    pub fn estimate(&self, x: &[f64]) -> Result<PointEstimates> {
        self.sums(x)?.point_estimates(x, self.traj.delta(), &self.cfg)
    }

    /// Parallel over base points on the current rayon pool; output order
    /// follows input order.
    pub fn estimate_batch(&self, xs: &[Vector]) -> Vec<Result<PointEstimates>> {
        xs.par_iter().map(|x| self.estimate(x.as_slice())).collect()
    }

    pub fn occupation_density_batch(&self, xs: &[Vector]) -> Vec<Result<f64>> {
        xs.par_iter().map(|x| self.occupation_density(x.as_slice())).collect()
    }
}
