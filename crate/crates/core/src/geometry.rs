//! Embedded manifolds: scaled ellipsoids in R³ (images of the unit sphere)
//! and the Klein bottle in R⁴ (image of the plane modulo its deck group).
//!
//! Every truth field is expressed in observed ambient coordinates, i.e. after
//! the global ellipsoid scaling, because that is what the estimators see.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::{Error, Matrix, Result, Vector};

/// Maximum on-manifold residual accepted by [`ManifoldSpec::tangent_projector`].
pub const ON_MANIFOLD_TOL: f64 = 1e-8;

/// Which closed-form map sends the fundamental domain into R⁴.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KleinEmbedding {
    /// `(cos u (a + r cos v), sin u (a + r cos v), r cos(u/2) sin v, r sin(u/2) sin v)`.
    /// Invariant under `(u, v) ↦ (u + 2π, −v)` and an immersion everywhere.
    #[default]
    Standard,
    /// The same map with `a + r sin v` as radial profile. Not invariant
    /// under the deck group and singular at `cos v = 0`; kept to reproduce
    /// published closed-form values.
    SineRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    /// Image of S² under `y ↦ scale · (a y₁, b y₂, c y₃)`.
    Ellipsoid { a: f64, b: f64, c: f64, scale: f64 },
    /// Klein bottle with tube radius `r` around a circle of radius `a`.
    KleinBottle {
        a: f64,
        r: f64,
        #[serde(default)]
        embedding: KleinEmbedding,
    },
}

/// A point in the parameter space of a [`ManifoldSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrinsicPoint {
    /// Unit vector on S².
    Sphere([f64; 3]),
    /// Angles `(u, v)` in the fundamental domain `[0, 2π)²`.
    Angles { u: f64, v: f64 },
}

impl IntrinsicPoint {
    pub fn sphere(y: [f64; 3]) -> Self {
        IntrinsicPoint::Sphere(y)
    }

    pub fn angles(u: f64, v: f64) -> Self {
        IntrinsicPoint::Angles { u, v }
    }

    /// Normalizes a nonzero 3-vector onto S².
    pub fn sphere_from(y: [f64; 3]) -> Result<Self> {
        let n = norm3(&y);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(IntrinsicPoint::Sphere([y[0] / n, y[1] / n, y[2] / n]))
    }
}

impl ManifoldSpec {
    /// Ellipsoid with semi-axes `(a, b, c)` normalized by the global scaling
    /// `sqrt(3 / (a² + b² + c²))`.
    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self> {
        let scale = (3.0 / (a * a + b * b + c * c)).sqrt();
        Self::ellipsoid_with_scale(a, b, c, scale)
    }

    pub fn ellipsoid_with_scale(a: f64, b: f64, c: f64, scale: f64) -> Result<Self> {
        let m = ManifoldSpec::Ellipsoid { a, b, c, scale };
        m.validate()?;
        Ok(m)
    }

    /// The unit sphere.
    pub fn sphere() -> Self {
        ManifoldSpec::Ellipsoid {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            scale: 1.0,
        }
    }

    pub fn klein_bottle(a: f64, r: f64) -> Result<Self> {
        Self::klein_bottle_with(a, r, KleinEmbedding::Standard)
    }

    pub fn klein_bottle_with(a: f64, r: f64, embedding: KleinEmbedding) -> Result<Self> {
        let m = ManifoldSpec::KleinBottle { a, r, embedding };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ManifoldSpec::Ellipsoid { a, b, c, scale } => [a, b, c, scale].iter().all(|v| v.is_finite() && *v > 0.0),
            ManifoldSpec::KleinBottle { a, r, .. } => r.is_finite() && a.is_finite() && r > 0.0 && a > r,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid manifold parameters {self:?}")))
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        2
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Ellipsoid { .. } => 3,
            ManifoldSpec::KleinBottle { .. } => 4,
        }
    }

    /// Observed semi-axes `scale · (a, b, c)` of an ellipsoid.
    pub fn semi_axes(&self) -> Option<[f64; 3]> {
        match *self {
            ManifoldSpec::Ellipsoid { a, b, c, scale } => Some([scale * a, scale * b, scale * c]),
            ManifoldSpec::KleinBottle { .. } => None,
        }
    }

    fn check_point(&self, q: &IntrinsicPoint) -> Result<()> {
        match (self, q) {
            (ManifoldSpec::Ellipsoid { .. }, IntrinsicPoint::Sphere(y)) => {
                if (norm3(y) - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidInput(format!("{y:?} is not a unit vector")));
                }
                Ok(())
            }
            (ManifoldSpec::KleinBottle { .. }, IntrinsicPoint::Angles { u, v }) => {
                if u.is_finite() && v.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("non-finite angles".into()))
                }
            }
            _ => Err(Error::InvalidInput(format!(
                "intrinsic point {q:?} does not parameterize {self:?}"
            ))),
        }
    }

    /// Writes the ambient image of `q` into `out` (length `ambient_dim`).
    ///
    /// Panics if `q` is of the wrong kind for this manifold.
    pub fn embed_into(&self, q: &IntrinsicPoint, out: &mut [f64]) {
        match (*self, *q) {
            (ManifoldSpec::Ellipsoid { .. }, IntrinsicPoint::Sphere(y)) => {
                let s = self.semi_axes().unwrap();
                for i in 0..3 {
                    out[i] = s[i] * y[i];
                }
            }
            (ManifoldSpec::KleinBottle { a, r, embedding }, IntrinsicPoint::Angles { u, v }) => {
                let radial = a + r * profile(embedding, v).0;
                let (su, cu) = u.sin_cos();
                let (sh, ch) = (0.5 * u).sin_cos();
                let sv = v.sin();
                out[0] = cu * radial;
                out[1] = su * radial;
                out[2] = r * ch * sv;
                out[3] = r * sh * sv;
            }
            _ => panic!("intrinsic point {q:?} does not parameterize {self:?}"),
        }
    }

    pub fn embed(&self, q: &IntrinsicPoint) -> Result<Vector> {
        self.check_point(q)?;
        let mut out = Vector::zeros(self.ambient_dim());
        self.embed_into(q, out.as_mut_slice());
        Ok(out)
    }

    /// Distance-like defect of `x` from the manifold (zero on it).
    pub fn residual(&self, x: &[f64]) -> f64 {
        if x.len() != self.ambient_dim() || x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        match *self {
            ManifoldSpec::Ellipsoid { .. } => {
                let s = self.semi_axes().unwrap();
                let q: f64 = (0..3).map(|i| (x[i] / s[i]).powi(2)).sum();
                (q - 1.0).abs()
            }
            ManifoldSpec::KleinBottle { a, r, embedding } => {
                let rho = x[0].hypot(x[1]);
                let u = x[1].atan2(x[0]);
                let (sh, ch) = (0.5 * u).sin_cos();
                let tube = x[2] * ch + x[3] * sh;
                let off_plane = (-x[2] * sh + x[3] * ch).abs();
                let radial = match embedding {
                    KleinEmbedding::Standard => ((rho - a).hypot(tube) - r).abs(),
                    KleinEmbedding::SineRadial => ((rho - a) - tube).abs() + (tube.abs() - r).max(0.0),
                };
                off_plane.max(radial)
            }
        }
    }

    /// Recovers parameters of an ambient point. Angles are returned in the
    /// fundamental domain; for [`KleinEmbedding::SineRadial`] the branch with
    /// `cos v >= 0` is chosen.
    pub fn intrinsic_of(&self, x: &[f64]) -> Result<IntrinsicPoint> {
        let residual = self.residual(x);
        if !(residual <= ON_MANIFOLD_TOL) {
            return Err(Error::OffManifold { residual });
        }
        match *self {
            ManifoldSpec::Ellipsoid { .. } => {
                let s = self.semi_axes().unwrap();
                IntrinsicPoint::sphere_from([x[0] / s[0], x[1] / s[1], x[2] / s[2]])
            }
            ManifoldSpec::KleinBottle { a, r, embedding } => {
                let u = x[1].atan2(x[0]).rem_euclid(TAU);
                let (sh, ch) = (0.5 * u).sin_cos();
                let sin_v = (x[2] * ch + x[3] * sh) / r;
                let v = match embedding {
                    KleinEmbedding::Standard => {
                        let cos_v = (x[0].hypot(x[1]) - a) / r;
                        sin_v.atan2(cos_v)
                    }
                    KleinEmbedding::SineRadial => sin_v.clamp(-1.0, 1.0).asin(),
                };
                let (u, v) = reduce_fundamental_domain(u, v);
                Ok(IntrinsicPoint::Angles { u, v })
            }
        }
    }

    /// Orthogonal projector onto the tangent space at the ambient point `x`.
    pub fn tangent_projector(&self, x: &[f64]) -> Result<Matrix> {
        let q = self.intrinsic_of(x)?;
        match self {
            ManifoldSpec::Ellipsoid { .. } => Ok(self.ellipsoid_projector(x)),
            ManifoldSpec::KleinBottle { .. } => {
                let (p, rank) = self.klein_projector(&q);
                if rank < self.intrinsic_dim() {
                    return Err(Error::SingularJacobian);
                }
                Ok(p)
            }
        }
    }

    /// Tangent projector evaluated from parameters. At singular points of
    /// [`KleinEmbedding::SineRadial`] this is the projector onto the image
    /// of the Jacobian, of rank below 2.
    pub fn tangent_projector_at(&self, q: &IntrinsicPoint) -> Result<Matrix> {
        self.check_point(q)?;
        Ok(match self {
            ManifoldSpec::Ellipsoid { .. } => {
                let x = self.embed(q)?;
                self.ellipsoid_projector(x.as_slice())
            }
            ManifoldSpec::KleinBottle { .. } => self.klein_projector(q).0,
        })
    }

    /// `I − n nᵀ / |n|²` with `n = (x/a², y/b², z/c²)` over the observed axes.
    fn ellipsoid_projector(&self, x: &[f64]) -> Matrix {
        let s = self.semi_axes().unwrap();
        let n = Vector::from_iterator(3, (0..3).map(|i| x[i] / (s[i] * s[i])));
        let nn = n.norm_squared();
        Matrix::identity(3, 3) - &n * n.transpose() / nn
    }

    fn klein_projector(&self, q: &IntrinsicPoint) -> (Matrix, usize) {
        let frame = self.klein_frame(q);
        let basis = gram_schmidt(&[frame.du, frame.dv]);
        let mut p = Matrix::zeros(4, 4);
        for e in &basis {
            p += e * e.transpose();
        }
        (p, basis.len())
    }

    fn klein_frame(&self, q: &IntrinsicPoint) -> KleinFrame {
        let (a, r, embedding) = match *self {
            ManifoldSpec::KleinBottle { a, r, embedding } => (a, r, embedding),
            _ => unreachable!(),
        };
        let (u, v) = match *q {
            IntrinsicPoint::Angles { u, v } => (u, v),
            _ => unreachable!(),
        };
        let (g, dg, ddg) = profile(embedding, v);
        let radial = a + r * g;
        let (su, cu) = u.sin_cos();
        let (sh, ch) = (0.5 * u).sin_cos();
        let (sv, cv) = v.sin_cos();
        KleinFrame {
            du: Vector::from_column_slice(&[-su * radial, cu * radial, -0.5 * r * sh * sv, 0.5 * r * ch * sv]),
            dv: Vector::from_column_slice(&[r * dg * cu, r * dg * su, r * ch * cv, r * sh * cv]),
            duu: Vector::from_column_slice(&[-cu * radial, -su * radial, -0.25 * r * ch * sv, -0.25 * r * sh * sv]),
            dvv: Vector::from_column_slice(&[r * ddg * cu, r * ddg * su, -r * ch * sv, -r * sh * sv]),
        }
    }

    /// Analytic `4 × 2` Jacobian `(∂φ/∂u, ∂φ/∂v)` of the Klein bottle map.
    pub fn klein_jacobian(&self, q: &IntrinsicPoint) -> Result<Matrix> {
        self.check_point(q)?;
        match self {
            ManifoldSpec::KleinBottle { .. } => {
                let f = self.klein_frame(q);
                Ok(Matrix::from_columns(&[f.du, f.dv]))
            }
            _ => Err(Error::InvalidInput("Jacobian only defined for the Klein bottle".into())),
        }
    }

    /// Drift of the observed process driven by unit-rate Brownian motion.
    pub fn true_drift(&self, q: &IntrinsicPoint) -> Result<Vector> {
        self.true_drift_with_rate(q, 1.0)
    }

    /// Drift when the noise has covariance rate `noise_rate` times that of
    /// Brownian motion in each tangent direction (`E r² / 2` for the sphere
    /// scheme). Only the Itô correction scales with the rate.
    pub fn true_drift_with_rate(&self, q: &IntrinsicPoint, noise_rate: f64) -> Result<Vector> {
        self.check_point(q)?;
        match (self, q) {
            (ManifoldSpec::Ellipsoid { .. }, IntrinsicPoint::Sphere(y)) => {
                let s = self.semi_axes().unwrap();
                let x = self.embed(q)?;
                let m = sphere_drift(y);
                let pushed = Vector::from_iterator(3, (0..3).map(|i| s[i] * m[i]));
                let p = self.ellipsoid_projector(x.as_slice());
                Ok(pushed - noise_rate * (p * x))
            }
            (ManifoldSpec::KleinBottle { .. }, IntrinsicPoint::Angles { u, v }) => {
                let f = self.klein_frame(q);
                let (p, _) = self.klein_projector(q);
                let mu = klein_drift(*u, *v);
                Ok(&f.du * mu[0] + &f.dv * mu[1] + 0.5 * noise_rate * (p * (f.duu + f.dvv)))
            }
            _ => unreachable!(),
        }
    }

    /// Diffusion matrix `Σ_α (ι_*σ_α)(ι_*σ_α)ᵀ` for unit-rate Brownian motion.
    pub fn true_diffusion(&self, q: &IntrinsicPoint) -> Result<Matrix> {
        self.true_diffusion_with_rate(q, 1.0)
    }

    pub fn true_diffusion_with_rate(&self, q: &IntrinsicPoint, noise_rate: f64) -> Result<Matrix> {
        self.check_point(q)?;
        let m = match self {
            ManifoldSpec::Ellipsoid { .. } => {
                let s = self.semi_axes().unwrap();
                let x = self.embed(q)?;
                let sq = Vector::from_iterator(3, s.iter().map(|v| v * v));
                Matrix::from_diagonal(&sq) - &x * x.transpose()
            }
            ManifoldSpec::KleinBottle { .. } => {
                let f = self.klein_frame(q);
                &f.du * f.du.transpose() + &f.dv * f.dv.transpose()
            }
        };
        Ok(m * noise_rate)
    }
}

struct KleinFrame {
    du: Vector,
    dv: Vector,
    duu: Vector,
    dvv: Vector,
}

/// Radial profile `g(v)` of the Klein bottle tube and its first two derivatives.
fn profile(embedding: KleinEmbedding, v: f64) -> (f64, f64, f64) {
    let (s, c) = v.sin_cos();
    match embedding {
        KleinEmbedding::Standard => (c, -s, -c),
        KleinEmbedding::SineRadial => (s, c, -s),
    }
}

/// Modified Gram–Schmidt in the given order, dropping numerically dependent
/// columns.
fn gram_schmidt(cols: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::with_capacity(cols.len());
    for c in cols {
        let scale = c.norm().max(1.0);
        let mut w = c.clone();
        for e in &basis {
            let proj = e.dot(&w);
            w -= e * proj;
        }
        let n = w.norm();
        if n > 1e-12 * scale {
            basis.push(w / n);
        }
    }
    basis
}

fn norm3(y: &[f64; 3]) -> f64 {
    (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()
}

/// Intrinsic drift `(y, −x, 0)` of the sphere process.
pub fn sphere_drift(y: &[f64; 3]) -> [f64; 3] {
    [y[1], -y[0], 0.0]
}

/// Drift `(1 + ½cos(u/2) sin v, ½ sin 2v)` on the covering plane of the
/// Klein bottle; invariant under the deck group.
pub fn klein_drift(u: f64, v: f64) -> [f64; 2] {
    [1.0 + 0.5 * (0.5 * u).cos() * v.sin(), 0.5 * (2.0 * v).sin()]
}

/// Maps `(u, v)` to the representative of its deck-group orbit in
/// `[0, 2π)²`, using `(u, v) ~ (u, v + 2π) ~ (u + 2π, −v)`.
pub fn reduce_fundamental_domain(u: f64, v: f64) -> (f64, f64) {
    let turns = (u / TAU).floor();
    let mut ur = u - TAU * turns;
    let mut odd = turns.rem_euclid(2.0) == 1.0;
    if ur >= TAU {
        ur -= TAU;
        odd = !odd;
    }
    if ur < 0.0 {
        ur = 0.0;
    }
    let mut vr = (if odd { -v } else { v }).rem_euclid(TAU);
    if vr >= TAU {
        vr = 0.0;
    }
    (ur, vr)
}

/// Free-function forms mirroring the methods.
pub fn embed(m: &ManifoldSpec, q: &IntrinsicPoint) -> Result<Vector> {
    m.embed(q)
}

pub fn tangent_projector(m: &ManifoldSpec, x: &[f64]) -> Result<Matrix> {
    m.tangent_projector(x)
}

pub fn true_drift(m: &ManifoldSpec, q: &IntrinsicPoint) -> Result<Vector> {
    m.true_drift(q)
}

pub fn true_diffusion(m: &ManifoldSpec, q: &IntrinsicPoint) -> Result<Matrix> {
    m.true_diffusion(q)
}

/// Uniform `rows × cols` grid of cell-centred angles covering `[0, 2π)²`
/// when `centered`, or cell corners starting at 0 otherwise.
pub fn angle_grid(rows: usize, cols: usize, centered: bool) -> Vec<IntrinsicPoint> {
    let off = if centered { 0.5 } else { 0.0 };
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let u = TAU * (i as f64 + off) / rows as f64;
            let v = TAU * (j as f64 + off) / cols as f64;
            out.push(IntrinsicPoint::Angles { u, v });
        }
    }
    out
}
