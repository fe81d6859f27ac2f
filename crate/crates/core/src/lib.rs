//! Simulation of time-homogeneous diffusions on embedded manifolds and
//! Nadaraya–Watson estimation of their occupation density, diffusion matrix,
//! tangent space and drift from a single discretized trajectory.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: ellipsoids in R³ and the Klein bottle in R⁴, with analytic
//!   tangent projectors and ground-truth drift/diffusion fields.
//! * [`simulate`]: retraction-based Euler on the sphere, Euler on the
//!   covering plane of the Klein bottle, downsampling.
//! * [`kernels`]: the compactly supported bump kernel, its moments, and
//!   bandwidth rules.
//! * [`numerics`]: cyclic Jacobi eigensolver and subspace utilities.
//! * [`estimators`]: the kernel estimators and batched evaluation.
//! * [`metrics`]: error metrics, Wilcoxon signed-rank test, CLT
//!   standardization and normality diagnostics.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod kernels;
pub mod metrics;
pub mod neighbors;
pub mod numerics;
pub mod simulate;

mod sum;

pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, LocalEstimator, PointEstimates};
pub use geometry::{IntrinsicPoint, KleinEmbedding, ManifoldSpec};
pub use kernels::{BandwidthRule, Kernel};
pub use numerics::SymEigResult;
pub use simulate::{InitialCondition, RadiusLaw, Scheme, SimConfig, Trajectory};

/// Dense column vector used for ambient points and drift values.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for projectors and diffusion matrices.
pub type Matrix = nalgebra::DMatrix<f64>;
