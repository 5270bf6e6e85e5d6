use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("angle {0}° outside [-90°, 90°]")]
    AngleOutOfRange(f64),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error(
        "sector quadrature did not converge after {intervals} intervals \
         (relative change {change:.3e}); try at least {suggested} intervals"
    )]
    QuadratureNotConverged {
        intervals: usize,
        change: f64,
        suggested: usize,
    },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e}, residual {residual:.3e})")]
    SolverNotConverged { iterations: usize, gap: f64, residual: f64 },

    #[error("phase lookup table is not monotone near {0:.4}°; design unsuitable for ESPRIT inversion")]
    NonMonotonePhase(f64),

    #[error("beam response too small ({magnitude:.3e}) at {theta_deg:.4}°")]
    WeakBeam { theta_deg: f64, magnitude: f64 },

    #[error("singular Fisher information: {0}")]
    SingularFisher(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
