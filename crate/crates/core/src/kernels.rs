//! The compactly supported bump kernel, its radial moments, and the
//! bandwidth rules used to pick `h` from a trajectory.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::simulate::Trajectory;
use crate::{Error, Result};

/// Support radius of the bump kernel, in units of the bandwidth.
pub const BUMP_SUPPORT: f64 = 3.0;

/// Points kept when estimating pairwise-distance quantiles.
const QUANTILE_SUBSAMPLE: usize = 1500;

/// Evaluation rule of a [`Kernel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `exp(-1 / (1 - (s/L)^2))` on `[0, L)`, zero outside.
    Bump,
}

/// A radial kernel `K(s)`, `s = distance / h`.
///
/// `amplitude` multiplies the profile. The ratio estimators are invariant
/// under it and the occupation density scales linearly with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub support: f64,
    pub amplitude: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self::bump()
    }
}

impl Kernel {
    /// The smooth bump with support `[0, 3)`, unnormalized.
    pub const fn bump() -> Self {
        Self {
            kind: KernelKind::Bump,
            support: BUMP_SUPPORT,
            amplitude: 1.0,
        }
    }

    /// Same profile multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            amplitude: self.amplitude * factor,
            ..self
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::NegativeArgument(s));
        }
        Ok(self.eval_sq(s * s))
    }

    /// Kernel value from the squared scaled distance `s²`. Hot path of every
    /// estimator; never fails.
    #[inline]
    pub fn eval_sq(&self, s_sq: f64) -> f64 {
        match self.kind {
            KernelKind::Bump => {
                let r = s_sq / (self.support * self.support);
                if r >= 1.0 {
                    0.0
                } else {
                    self.amplitude * (-1.0 / (1.0 - r)).exp()
                }
            }
        }
    }

    /// `κ_{p,q} = ∫_{R^d} K(|u|)^p |u|^q du`, by adaptive Gauss–Kronrod
    /// quadrature of the radial integral.
    pub fn moment(&self, pexp: u32, qexp: u32, d: u32) -> Result<f64> {
        if pexp == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "kernel moment needs pexp >= 1 and d >= 1, got pexp={pexp}, d={d}"
            )));
        }
        let radial_power = (qexp + d - 1) as i32;
        let integrand = |t: f64| {
            // t ∈ [0, L] so eval_sq cannot see a negative argument
            self.eval_sq(t * t).powi(pexp as i32) * t.powi(radial_power)
        };
        let integral = adaptive_gauss_kronrod(&integrand, 0.0, self.support, 1e-12, 0);
        Ok(unit_sphere_area(d) * integral)
    }
}

/// Free-function form of [`Kernel::moment`].
pub fn kernel_moment(k: &Kernel, pexp: u32, qexp: u32, d: u32) -> Result<f64> {
    k.moment(pexp, qexp, d)
}

/// Surface area of the unit sphere `S^{d-1}` in R^d.
pub fn unit_sphere_area(d: u32) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive_gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gauss_kronrod_15(f, a, b);
    if err <= tol || depth >= 40 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive_gauss_kronrod(f, a, mid, 0.5 * tol, depth + 1) + adaptive_gauss_kronrod(f, mid, b, 0.5 * tol, depth + 1)
}

/// How `h` is derived from a trajectory and a target fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `L·h = fraction × total ambient path length`.
    PathLength,
    /// `L·h = fraction-quantile of pairwise ambient distances`, i.e. the
    /// kernel support around a typical point holds about `fraction` of the
    /// trajectory.
    #[default]
    NeighborQuantile,
}

impl BandwidthRule {
    pub fn bandwidth(&self, t: &Trajectory, fraction: f64, kernel: &Kernel) -> Result<f64> {
        match self {
            BandwidthRule::PathLength => path_length_bandwidth(t, fraction, kernel),
            BandwidthRule::NeighborQuantile => neighbor_quantile_bandwidth(t, fraction, kernel),
        }
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "bandwidth fraction must lie in (0, 1), got {fraction}"
        )))
    }
}

/// Path-length rule with the bump kernel: `h = fraction · Σ|x_{k+1} − x_k| / 3`.
pub fn bandwidth_heuristic(t: &Trajectory, fraction: f64) -> Result<f64> {
    path_length_bandwidth(t, fraction, &Kernel::bump())
}

pub fn path_length_bandwidth(t: &Trajectory, fraction: f64, kernel: &Kernel) -> Result<f64> {
    check_fraction(fraction)?;
    let length = t.path_length();
    if length <= 0.0 {
        return Err(Error::DegenerateTrajectory);
    }
    Ok(fraction * length / kernel.support)
}

pub fn neighbor_quantile_bandwidth(t: &Trajectory, fraction: f64, kernel: &Kernel) -> Result<f64> {
    check_fraction(fraction)?;
    let n = t.len();
    let m = n.min(QUANTILE_SUBSAMPLE);
    let picks: Vec<&[f64]> = (0..m)
        .map(|i| {
            let k = if m == 1 { 0 } else { i * (n - 1) / (m - 1) };
            t.point(k)
        })
        .collect();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            let d2: f64 = picks[i].iter().zip(picks[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            dists.push(d2);
        }
    }
    if dists.is_empty() {
        return Err(Error::DegenerateTrajectory);
    }
    let rank = ((fraction * (dists.len() - 1) as f64).round() as usize).min(dists.len() - 1);
    let (_, radius_sq, _) = dists.select_nth_unstable_by(rank, f64::total_cmp);
    let radius = radius_sq.sqrt();
    if radius <= 0.0 {
        return Err(Error::DegenerateTrajectory);
    }
    Ok(radius / kernel.support)
}
