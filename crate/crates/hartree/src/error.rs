//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("riesz exponent must satisfy 0 < alpha < dim; got alpha = {alpha} with dim = {dim}")]
    Domain { alpha: f64, dim: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("direct convolution is capped at {cap} grid points, this grid has {points}")]
    Size { points: usize, cap: usize },

    #[error("density masses differ: {m1} vs {m2} (relative gap {rel:.3e})")]
    MassMismatch { m1: f64, m2: f64, rel: f64 },

    #[error("density is negative at index {index}: {value}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("field is identically zero")]
    ZeroField,

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("no convergence after {max_iter} iterations (last update rate {last_update:.3e})")]
    MaxIterExceeded { max_iter: usize, last_update: f64 },

    #[error(
        "field magnitude {max_abs:.3e} on the boundary shell exceeds {tol:.3e} {when}; \
         the domain is too small for this state, increase --half-width"
    )]
    BoundaryContamination {
        max_abs: f64,
        tol: f64,
        when: String,
    },

    #[error("converged state has residual {residual:.3e} above the acceptance threshold {threshold:.3e}")]
    ResidualTooLarge { residual: f64, threshold: f64 },

    #[error(
        "phase increment {delta:.3} rad between recorded rows is too close to the branch cut; \
         reduce --stride"
    )]
    PhaseUnwrap { delta: f64 },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("stability experiment failed: {0}")]
    StabilityFailed(String),

    #[error("malformed file {path}: {reason}")]
    FileFormat { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code contract: 0 ok, 1 config, 2 runtime, 3 assertion failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Domain { .. }
            | Error::Size { .. }
            | Error::MassMismatch { .. }
            | Error::NegativeDensity { .. }
            | Error::ZeroField
            | Error::FileFormat { .. } => 1,
            Error::CheckFailed(_) | Error::StabilityFailed(_) => 3,
            _ => 2,
        }
    }
}
