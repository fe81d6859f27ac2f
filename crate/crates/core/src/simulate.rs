//! Discretized trajectories: retraction-based Euler on S² mapped to an
//! ellipsoid, and Euler on the covering plane reduced to the Klein bottle's
//! fundamental domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::geometry::{klein_drift, reduce_fundamental_domain, sphere_drift, IntrinsicPoint, ManifoldSpec};
use crate::{Error, Result};

/// Identifier of the pseudo-random generator behind every simulation.
pub const RNG_NAME: &str = "chacha8 (rand_chacha 0.9)";

/// Consecutive degenerate tangent directions tolerated before giving up.
pub const MAX_DIRECTION_RESAMPLES: usize = 100;

/// Distribution of the tangent step radius in the sphere scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusLaw {
    /// Radius drawn from χ²(2) itself; `E r² = 8`.
    Chi2,
    /// Radius drawn from χ(2), the norm of a standard planar Gaussian;
    /// `E r² = 2`, matching Brownian motion.
    #[default]
    Chi,
}

impl RadiusLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let chi2: f64 = ChiSquared::new(2.0).expect("valid dof").sample(rng);
        match self {
            RadiusLaw::Chi2 => chi2,
            RadiusLaw::Chi => chi2.sqrt(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            RadiusLaw::Chi2 => 8.0,
            RadiusLaw::Chi => 2.0,
        }
    }

    /// Variance rate per tangent direction relative to Brownian motion.
    pub fn noise_rate(&self) -> f64 {
        self.second_moment() / 2.0
    }
}

/// How a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SphereRetraction {
        radius_law: RadiusLaw,
    },
    PlaneEuler,
    /// Data not produced by this crate.
    External,
}

impl Scheme {
    pub fn id(&self) -> String {
        match self {
            Scheme::SphereRetraction {
                radius_law: RadiusLaw::Chi,
            } => "sphere-retraction-euler/chi".into(),
            Scheme::SphereRetraction {
                radius_law: RadiusLaw::Chi2,
            } => "sphere-retraction-euler/chi2".into(),
            Scheme::PlaneEuler => "plane-euler/klein-reduction".into(),
            Scheme::External => "external".into(),
        }
    }

    /// Noise rate relative to Brownian motion; 1 unless a χ² radius was used.
    pub fn noise_rate(&self) -> f64 {
        match self {
            Scheme::SphereRetraction { radius_law } => radius_law.noise_rate(),
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Uniform on S² (normalized Gaussian) or on `[0, 2π)²`.
    Uniform,
    Point(IntrinsicPoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub manifold: ManifoldSpec,
    pub n_steps: usize,
    pub delta: f64,
    pub seed: u64,
    pub initial: InitialCondition,
    pub radius_law: RadiusLaw,
}

impl SimConfig {
    pub fn new(manifold: ManifoldSpec, n_steps: usize, delta: f64, seed: u64) -> Self {
        Self {
            manifold,
            n_steps,
            delta,
            seed,
            initial: InitialCondition::Uniform,
            radius_law: RadiusLaw::default(),
        }
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_radius_law(mut self, law: RadiusLaw) -> Self {
        self.radius_law = law;
        self
    }

    fn validate(&self) -> Result<()> {
        self.manifold.validate()?;
        if self.n_steps < 1 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Ambient points on a uniform time grid, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<f64>,
    dim: usize,
    delta: f64,
    manifold: ManifoldSpec,
    seed: u64,
    scheme: Scheme,
}

impl Trajectory {
    pub fn new(
        points: Vec<f64>,
        dim: usize,
        delta: f64,
        manifold: ManifoldSpec,
        seed: u64,
        scheme: Scheme,
    ) -> Result<Self> {
        if dim == 0 || dim != manifold.ambient_dim() {
            return Err(Error::InvalidInput(format!(
                "dimension {dim} does not match the manifold's ambient dimension {}",
                manifold.ambient_dim()
            )));
        }
        if !points.len().is_multiple_of(dim) || points.len() / dim < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two points of dimension {dim}, got {} values",
                points.len()
            )));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            points,
            dim,
            delta,
            manifold,
            seed,
            scheme,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn scheme_id(&self) -> String {
        self.scheme.id()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    /// Flat point-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    /// `(N − 1) · Δ`.
    pub fn physical_time(&self) -> f64 {
        (self.len() - 1) as f64 * self.delta
    }

    /// Sum of ambient chord lengths `Σ |x_{k+1} − x_k|`.
    pub fn path_length(&self) -> f64 {
        self.iter()
            .zip(self.iter().skip(1))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt())
            .sum()
    }

    /// Largest on-manifold residual over all points.
    pub fn max_residual(&self) -> f64 {
        self.iter().map(|x| self.manifold.residual(x)).fold(0.0, f64::max)
    }

    /// The first `n_points` observations.
    pub fn prefix(&self, n_points: usize) -> Result<Trajectory> {
        if n_points < 2 || n_points > self.len() {
            return Err(Error::InvalidInput(format!(
                "prefix of {n_points} points from a trajectory of {}",
                self.len()
            )));
        }
        Ok(Trajectory {
            points: self.points[..n_points * self.dim].to_vec(),
            ..*self
        })
    }

    /// Keeps observations `0, stride, 2·stride, …`.
    pub fn downsample(&self, stride: usize) -> Result<Trajectory> {
        downsample(self, stride)
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }
}

pub fn downsample(t: &Trajectory, stride: usize) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    let kept = (t.len() - 1) / stride + 1;
    if kept < 2 {
        return Err(Error::StrideExceedsLength { stride, len: t.len() });
    }
    let mut points = Vec::with_capacity(kept * t.dim);
    for k in (0..t.len()).step_by(stride) {
        points.extend_from_slice(t.point(k));
    }
    Ok(Trajectory {
        points,
        delta: t.delta * stride as f64,
        ..*t
    })
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of Monte-Carlo replicate `i`: `splitmix64(base ⊕ (i + 1))`.
pub fn replicate_seed(base: u64, i: u64) -> u64 {
    splitmix64(base ^ i.wrapping_add(1))
}

/// The generator used for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Whether the model drift is applied; tests switch it off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    Model,
    Zero,
}

/// Source of `(unit direction w, radius r)` pairs for the sphere scheme.
pub trait SphereNoise {
    fn draw(&mut self) -> ([f64; 3], f64);
}

pub struct RngSphereNoise<R> {
    rng: R,
    law: RadiusLaw,
}

impl<R: Rng> RngSphereNoise<R> {
    pub fn new(rng: R, law: RadiusLaw) -> Self {
        Self { rng, law }
    }
}

impl<R: Rng> SphereNoise for RngSphereNoise<R> {
    fn draw(&mut self) -> ([f64; 3], f64) {
        let w: [f64; 3] = UnitSphere.sample(&mut self.rng);
        let r = self.law.sample(&mut self.rng);
        (w, r)
    }
}

/// Retraction-based Euler iteration on S²:
/// `v = r · normalize(w − (wᵀY)Y)`, `δY = √Δ v + Δ μ(Y)`,
/// `Y ← (Y + δY) / |Y + δY|`.
pub struct SphereIntegrator<N> {
    state: [f64; 3],
    delta: f64,
    drift: DriftMode,
    noise: N,
}

impl<N: SphereNoise> SphereIntegrator<N> {
    pub fn new(start: [f64; 3], delta: f64, drift: DriftMode, noise: N) -> Self {
        Self {
            state: start,
            delta,
            drift,
            noise,
        }
    }

    pub fn state(&self) -> [f64; 3] {
        self.state
    }

    pub fn step(&mut self) -> Result<[f64; 3]> {
        let y = self.state;
        let mut resamples = 0;
        let (dir, r) = loop {
            let (w, r) = self.noise.draw();
            let wy = w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
            let t = [w[0] - wy * y[0], w[1] - wy * y[1], w[2] - wy * y[2]];
            let n = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
            if n >= 1e-12 {
                break ([t[0] / n, t[1] / n, t[2] / n], r);
            }
            resamples += 1;
            if resamples >= MAX_DIRECTION_RESAMPLES {
                return Err(Error::DegenerateDirection(resamples));
            }
        };
        let mu = match self.drift {
            DriftMode::Model => sphere_drift(&y),
            DriftMode::Zero => [0.0; 3],
        };
        let sd = self.delta.sqrt();
        let mut next = [0.0; 3];
        for i in 0..3 {
            next[i] = y[i] + sd * r * dir[i] + self.delta * mu[i];
        }
        let n = (next[0] * next[0] + next[1] * next[1] + next[2] * next[2]).sqrt();
        self.state = [next[0] / n, next[1] / n, next[2] / n];
        Ok(self.state)
    }
}

/// Source of planar Gaussian increments `(g₁, g₂)`.
pub trait PlaneNoise {
    fn draw(&mut self) -> [f64; 2];
}

pub struct RngPlaneNoise<R> {
    rng: R,
}

impl<R: Rng> RngPlaneNoise<R> {
    pub fn new(rng: R) -> Self {
        Self { rng }
    }
}

impl<R: Rng> PlaneNoise for RngPlaneNoise<R> {
    fn draw(&mut self) -> [f64; 2] {
        [
            StandardNormal.sample(&mut self.rng),
            StandardNormal.sample(&mut self.rng),
        ]
    }
}

/// Euler on the plane followed by reduction to `[0, 2π)²`.
pub struct PlaneIntegrator<N> {
    state: (f64, f64),
    delta: f64,
    drift: DriftMode,
    noise: N,
}

impl<N: PlaneNoise> PlaneIntegrator<N> {
    pub fn new(start: (f64, f64), delta: f64, drift: DriftMode, noise: N) -> Self {
        Self {
            state: start,
            delta,
            drift,
            noise,
        }
    }

    pub fn state(&self) -> (f64, f64) {
        self.state
    }

    pub fn step(&mut self) -> (f64, f64) {
        let (u, v) = self.state;
        let mu = match self.drift {
            DriftMode::Model => klein_drift(u, v),
            DriftMode::Zero => [0.0; 2],
        };
        let g = self.noise.draw();
        let sd = self.delta.sqrt();
        self.state = reduce_fundamental_domain(u + self.delta * mu[0] + sd * g[0], v + self.delta * mu[1] + sd * g[1]);
        self.state
    }
}

/// Simulates according to the manifold kind.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    match cfg.manifold {
        ManifoldSpec::Ellipsoid { .. } => simulate_sphere(cfg),
        ManifoldSpec::KleinBottle { .. } => simulate_plane(cfg),
    }
}

pub fn simulate_sphere(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if !matches!(cfg.manifold, ManifoldSpec::Ellipsoid { .. }) {
        return Err(Error::InvalidInput("sphere scheme requires an ellipsoid".into()));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let start = match cfg.initial {
        InitialCondition::Uniform => {
            let g: [f64; 3] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            match IntrinsicPoint::sphere_from(g)? {
                IntrinsicPoint::Sphere(y) => y,
                _ => unreachable!(),
            }
        }
        InitialCondition::Point(IntrinsicPoint::Sphere(y)) => match IntrinsicPoint::sphere_from(y)? {
            IntrinsicPoint::Sphere(y) => y,
            _ => unreachable!(),
        },
        InitialCondition::Point(q) => {
            return Err(Error::InvalidInput(format!("{q:?} is not a sphere point")));
        }
    };
    let mut integrator = SphereIntegrator::new(
        start,
        cfg.delta,
        DriftMode::Model,
        RngSphereNoise::new(rng, cfg.radius_law),
    );
    let mut points = vec![0.0; (cfg.n_steps + 1) * 3];
    let m = cfg.manifold;
    m.embed_into(&IntrinsicPoint::Sphere(start), &mut points[..3]);
    for k in 1..=cfg.n_steps {
        let y = integrator.step()?;
        m.embed_into(&IntrinsicPoint::Sphere(y), &mut points[3 * k..3 * k + 3]);
    }
    Trajectory::new(
        points,
        3,
        cfg.delta,
        m,
        cfg.seed,
        Scheme::SphereRetraction {
            radius_law: cfg.radius_law,
        },
    )
}

pub fn simulate_plane(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if !matches!(cfg.manifold, ManifoldSpec::KleinBottle { .. }) {
        return Err(Error::InvalidInput("plane scheme requires a Klein bottle".into()));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let start = match cfg.initial {
        InitialCondition::Uniform => (rng.random::<f64>() * TAU, rng.random::<f64>() * TAU),
        InitialCondition::Point(IntrinsicPoint::Angles { u, v }) => reduce_fundamental_domain(u, v),
        InitialCondition::Point(q) => {
            return Err(Error::InvalidInput(format!("{q:?} is not a pair of angles")));
        }
    };
    let mut integrator = PlaneIntegrator::new(start, cfg.delta, DriftMode::Model, RngPlaneNoise::new(rng));
    let m = cfg.manifold;
    let mut points = vec![0.0; (cfg.n_steps + 1) * 4];
    m.embed_into(&IntrinsicPoint::angles(start.0, start.1), &mut points[..4]);
    for k in 1..=cfg.n_steps {
        let (u, v) = integrator.step();
        m.embed_into(&IntrinsicPoint::angles(u, v), &mut points[4 * k..4 * k + 4]);
    }
    Trajectory::new(points, 4, cfg.delta, m, cfg.seed, Scheme::PlaneEuler)
}
