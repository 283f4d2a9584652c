use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (relative skew {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix pencil is not positive definite (min eigenvalue {0:.3e})")]
    NotDefinite(f64),
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("matrix is not quasi-sectorial")]
    NotQuasiSectorial,
    #[error("no rotation yields a positive definite real part")]
    DegenerateRotation,
    #[error("invalid block structure: {0}")]
    InvalidStructure(String),
    #[error("LMI solver stalled (gap {gap:.3e} after {iterations} iterations)")]
    SolverStall { gap: f64, iterations: usize },
    #[error("eigenvalue is not simple")]
    NonSimpleEigenvalue,
    #[error("left/right eigenvector pair is ill conditioned (|v*u| = {0:.3e})")]
    IllConditionedPair(f64),
    #[error("I + M is numerically singular")]
    SingularScattering,
    #[error("frequency {0} rad/s is at a pole of the system")]
    FrequencyAtPole(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("feedback interconnection is ill-posed")]
    IllPosed,
    #[error("perturbation response is not in the structured set at omega = {0}")]
    StructureViolation(f64),
    #[error("IQC certificate failed: {0}")]
    CertificateFailure(String),
    #[error("no value of a reproduces the instability interval: {0}")]
    CalibrationFailure(String),
    #[error("at omega = {omega}: {source}")]
    AtFrequency {
        omega: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
