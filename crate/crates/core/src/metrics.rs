//! Error metrics for drift and diffusion estimates, the paired Wilcoxon
//! signed-rank test, CLT standardization and normality diagnostics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::numerics::{sin_theta_distance, sym_eig, top_d_basis};
use crate::{Error, Matrix, Result, Vector};

/// Default stratification threshold on `|μ(x)| / sup |μ|`.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Largest number of nonzero differences handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    /// `|μ(x)| / sup|μ| >= c`: relative metrics are meaningful.
    Above,
    Below,
}

/// Drift errors at one base point. Relative fields are `None` in the
/// `Below` stratum; `angle_err` is also `None` when the estimate is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftErrorRecord {
    pub nrmse: Option<f64>,
    pub rel_norm_err: Option<f64>,
    pub angle_err: Option<f64>,
    pub abs_err: f64,
    pub stratum: Stratum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionErrorRecord {
    pub frob_rel_err: f64,
    pub sin_theta: f64,
}

/// Angle in `[0, π]` between two vectors, `None` if either is zero.
pub fn angle_between(a: &Vector, b: &Vector) -> Option<f64> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos())
}

pub fn drift_errors(mu_hat: &Vector, mu_true: &Vector, sup_norm: f64, threshold: f64) -> Result<DriftErrorRecord> {
    if mu_hat.len() != mu_true.len() {
        return Err(Error::LengthMismatch(mu_hat.len(), mu_true.len()));
    }
    if !(sup_norm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sup norm must be positive, got {sup_norm}"
        )));
    }
    let true_norm = mu_true.norm();
    let abs_err = (mu_hat - mu_true).norm();
    if true_norm > 0.0 && true_norm / sup_norm >= threshold {
        Ok(DriftErrorRecord {
            nrmse: Some(abs_err / true_norm),
            rel_norm_err: Some((mu_hat.norm() - true_norm).abs() / true_norm),
            angle_err: angle_between(mu_hat, mu_true),
            abs_err,
            stratum: Stratum::Above,
        })
    } else {
        Ok(DriftErrorRecord {
            nrmse: None,
            rel_norm_err: None,
            angle_err: None,
            abs_err,
            stratum: Stratum::Below,
        })
    }
}

/// Relative Frobenius error and `‖sin Θ‖_F` between the top-`d` eigenspaces.
pub fn diffusion_errors(pi_hat: &Matrix, pi_true: &Matrix, d: usize) -> Result<DiffusionErrorRecord> {
    if pi_hat.shape() != pi_true.shape() {
        return Err(Error::LengthMismatch(pi_hat.nrows(), pi_true.nrows()));
    }
    let norm = pi_true.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("reference diffusion matrix is zero".into()));
    }
    let u_hat = top_d_basis(&sym_eig(pi_hat)?, d)?;
    let u = top_d_basis(&sym_eig(pi_true)?, d)?;
    Ok(DiffusionErrorRecord {
        frob_rel_err: (pi_hat - pi_true).norm() / norm,
        sin_theta: sin_theta_distance(&u, &u_hat)?,
    })
}

/// Signed ranks of the nonzero paired differences `a − b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRanks {
    /// Average ranks of `|a − b|` over nonzero differences.
    pub ranks: Vec<f64>,
    /// Sign of each difference, `true` for `a > b`.
    pub positive: Vec<bool>,
    /// Sizes of tie groups.
    pub ties: Vec<usize>,
}

impl SignedRanks {
    pub fn new(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch(a.len(), b.len()));
        }
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        if diffs.iter().any(|d| d.is_nan()) {
            return Err(Error::InvalidInput("NaN in paired samples".into()));
        }
        if diffs.is_empty() {
            return Err(Error::AllDifferencesZero);
        }
        let mut order: Vec<usize> = (0..diffs.len()).collect();
        order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
        let mut ranks = vec![0.0; diffs.len()];
        let mut ties = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && diffs[order[end]].abs() == diffs[order[start]].abs() {
                end += 1;
            }
            // ranks start..end (1-based start+1 ..= end) share their mean
            let avg = (start + 1 + end) as f64 / 2.0;
            for &i in &order[start..end] {
                ranks[i] = avg;
            }
            ties.push(end - start);
            start = end;
        }
        Ok(Self {
            positive: diffs.iter().map(|d| *d > 0.0).collect(),
            ranks,
            ties,
        })
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// `W⁺`, the sum of ranks of positive differences.
    pub fn w_plus(&self) -> f64 {
        self.ranks
            .iter()
            .zip(&self.positive)
            .filter(|(_, p)| **p)
            .map(|(r, _)| r)
            .sum()
    }

    /// `P(W⁺ <= observed)` under the null of symmetric differences, counting
    /// all `2^m` sign assignments (by dynamic programming over doubled ranks).
    pub fn exact_lower_p(&self) -> f64 {
        let doubled: Vec<usize> = self.ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0u128; total + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let observed: usize = doubled
            .iter()
            .zip(&self.positive)
            .filter(|(_, p)| **p)
            .map(|(r, _)| r)
            .sum();
        let hits: u128 = counts[..=observed].iter().sum();
        hits as f64 / 2f64.powi(self.len() as i32)
    }

    /// Normal approximation to `P(W⁺ <= observed)` with tie-corrected
    /// variance and continuity correction.
    pub fn normal_lower_p(&self) -> f64 {
        let m = self.len() as f64;
        let mean = m * (m + 1.0) / 4.0;
        let tie_corr: f64 = self.ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_corr;
        let z = (self.w_plus() + 0.5 - mean) / var.sqrt();
        standard_normal().cdf(z)
    }
}

/// One-sided paired Wilcoxon signed-rank p-value for the alternative that
/// `a` tends to be smaller than `b`. Exact for at most 25 nonzero
/// differences, normal approximation above.
pub fn wilcoxon_one_sided(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 5 {
        return Err(Error::InvalidInput(format!("need at least 5 pairs, got {}", a.len())));
    }
    let sr = SignedRanks::new(a, b)?;
    Ok(if sr.len() <= WILCOXON_EXACT_MAX {
        sr.exact_lower_p()
    } else {
        sr.normal_lower_p()
    })
}

/// Bonferroni adjustment for `comparisons` tests, capped at 1.
pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons as f64).min(1.0)
}

/// `sqrt(Σ wᵢ (estᵢ − refᵢ)²)`.
pub fn l2_density_error(est: &[f64], reference: &[f64], weights: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::LengthMismatch(est.len(), reference.len()));
    }
    if est.len() != weights.len() {
        return Err(Error::LengthMismatch(est.len(), weights.len()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("quadrature weights must be nonnegative".into()));
    }
    let s: f64 = est
        .iter()
        .zip(reference)
        .zip(weights)
        .map(|((e, r), w)| w * (e - r) * (e - r))
        .sum();
    Ok(s.sqrt())
}

fn tangent_whitening(p_true: &Matrix, pi_true: &Matrix, kappa20: f64, d: usize) -> Result<(Matrix, Vec<f64>)> {
    if p_true.shape() != pi_true.shape() || p_true.nrows() != p_true.ncols() {
        return Err(Error::LengthMismatch(p_true.nrows(), pi_true.nrows()));
    }
    if !(kappa20 > 0.0) {
        return Err(Error::InvalidInput(format!("kappa20 must be positive, got {kappa20}")));
    }
    let cov = p_true * pi_true * p_true.transpose() * kappa20;
    let eig = sym_eig(&cov)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|l| **l > 1e-10 * top.max(0.0) && **l > 0.0)
        .count();
    if rank < d {
        return Err(Error::RankDeficient { rank, d });
    }
    Ok((top_d_basis(&eig, d)?, eig.eigenvalues[..d].to_vec()))
}

/// Standardizes drift errors `μ̂ᵢ − μ` across Monte-Carlo replicates:
/// subtract the sample mean, scale by `sqrt(h^d L̂ᵢ)`, and whiten with the
/// inverse square root of `κ₂₀ P π Pᵀ` restricted to its top-`d`
/// eigenspace. Returns the `d` tangential coordinates per replicate.
///
/// `kappa20` and `l_hats` must refer to the same kernel normalization; with
/// a kernel scaled so that `κ₁₀ = 1` the output is asymptotically `N(0, I_d)`.
pub fn standardize_drift_errors(
    errors: &[Vector],
    p_true: &Matrix,
    pi_true: &Matrix,
    kappa20: f64,
    h: f64,
    d: usize,
    l_hats: &[f64],
) -> Result<Vec<Vector>> {
    if errors.is_empty() {
        return Err(Error::InvalidInput("no errors to standardize".into()));
    }
    if errors.len() != l_hats.len() {
        return Err(Error::LengthMismatch(errors.len(), l_hats.len()));
    }
    let p = p_true.nrows();
    if let Some(e) = errors.iter().find(|e| e.len() != p) {
        return Err(Error::LengthMismatch(e.len(), p));
    }
    let (basis, lambda) = tangent_whitening(p_true, pi_true, kappa20, d)?;
    let mean = errors.iter().fold(Vector::zeros(p), |acc, e| acc + e) / errors.len() as f64;
    let hd = h.powi(d as i32);
    Ok(errors
        .iter()
        .zip(l_hats)
        .map(|(e, l)| {
            let scaled = (e - &mean) * (hd * l).sqrt();
            let coords = basis.transpose() * scaled;
            Vector::from_iterator(d, coords.iter().zip(&lambda).map(|(c, lam)| c / lam.sqrt()))
        })
        .collect())
}

/// Standardizes diffusion errors `π̂ᵢ − π` entrywise in the eigenbasis
/// `u₁ … u_d` of `π`: entry `(i, j)`, `i <= j`, is centred, scaled by
/// `sqrt(h^d L̂ / Δ)` and divided by `sqrt(κ₂₀ (λᵢλⱼ + δᵢⱼ λᵢλⱼ))`, the
/// Gaussian fourth-moment variance. Entries are returned row-major.
#[allow(clippy::too_many_arguments)]
pub fn standardize_diffusion_errors(
    errors: &[Matrix],
    pi_true: &Matrix,
    kappa20: f64,
    h: f64,
    d: usize,
    delta: f64,
    l_hats: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if errors.is_empty() {
        return Err(Error::InvalidInput("no errors to standardize".into()));
    }
    if errors.len() != l_hats.len() {
        return Err(Error::LengthMismatch(errors.len(), l_hats.len()));
    }
    let p = pi_true.nrows();
    let identity = Matrix::identity(p, p);
    let (basis, lambda) = tangent_whitening(&identity, pi_true, 1.0, d)?;
    let mean = errors.iter().fold(Matrix::zeros(p, p), |acc, e| acc + e) / errors.len() as f64;
    let hd = h.powi(d as i32);
    Ok(errors
        .iter()
        .zip(l_hats)
        .map(|(e, l)| {
            let rotated = basis.transpose() * (e - &mean) * &basis * (hd * l / delta).sqrt();
            let mut out = Vec::with_capacity(d * (d + 1) / 2);
            for i in 0..d {
                for j in i..d {
                    let factor = if i == j { 2.0 } else { 1.0 };
                    out.push(rotated[(i, j)] / (kappa20 * factor * lambda[i] * lambda[j]).sqrt());
                }
            }
            out
        })
        .collect())
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard-normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Sorted samples paired with standard-normal quantiles at plotting
/// positions `(i − 0.5)/n`, as `(theoretical, empirical)`.
pub fn qq_points(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("QQ needs at least two samples".into()));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| (normal_quantile((i as f64 + 0.5) / n), s))
        .collect())
}

/// Largest `|theoretical − empirical|` over QQ pairs whose plotting position
/// lies in the central `coverage` mass; `coverage = 1` uses every pair.
pub fn qq_max_deviation(pairs: &[(f64, f64)], coverage: f64) -> f64 {
    let n = pairs.len() as f64;
    let lo = 0.5 * (1.0 - coverage);
    let hi = 1.0 - lo;
    pairs
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let pos = (*i as f64 + 0.5) / n;
            pos >= lo && pos <= hi
        })
        .map(|(_, (t, e))| (t - e).abs())
        .fold(0.0, f64::max)
}

/// Sample skewness `m₃ / m₂^{3/2}` and excess kurtosis `m₄ / m₂² − 3`
/// from central moments.
pub fn moment_normality(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for s in samples {
        let c = s - mean;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 1e-300) {
        return Err(Error::ZeroVariance);
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Median (mean of the two central values for even counts).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `y` on `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("slope needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}
