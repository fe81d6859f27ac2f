use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("off-manifold point (residual {residual:e})")]
    OffManifold { residual: f64 },
    #[error("singular embedding Jacobian at the requested point")]
    SingularJacobian,
    #[error("degenerate direction: {0} consecutive resamples of the tangent direction")]
    DegenerateDirection(usize),
    #[error("stride {stride} exceeds length: trajectory has {len} points")]
    StrideExceedsLength { stride: usize, len: usize },
    #[error("negative argument {0} to kernel")]
    NegativeArgument(f64),
    #[error("degenerate trajectory: total path length is zero")]
    DegenerateTrajectory,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("basis is not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),
    #[error("insufficient local data: all kernel weights vanish at the base point")]
    InsufficientLocalData,
    #[error("all paired differences are zero")]
    AllDifferencesZero,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("rank deficient: tangent covariance has rank {rank} < {d}")]
    RankDeficient { rank: usize, d: usize },
    #[error("zero variance sample")]
    ZeroVariance,
}

pub type Result<T> = std::result::Result<T, Error>;
