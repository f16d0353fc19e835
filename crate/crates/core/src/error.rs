use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("equilibrium solver did not converge after {iterations} iterations (max residual {max_residual:e})")]
    EquilibriumNotConverged { iterations: usize, max_residual: f64 },

    #[error("non-positive Hessian eigenvalue {value:e} at index {index}")]
    NonPositiveMode { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Hilbert-space dimension {dim} exceeds the memory budget of {limit} amplitudes")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("Fock occupation {occupation} out of range for cutoff {n_max}")]
    OccupationOutOfRange { occupation: usize, n_max: usize },

    #[error("Fock cutoff {n_max} too small: Fock tail mass {leakage:e} exceeds {tolerance:e}")]
    CutoffTooSmall { n_max: usize, leakage: f64, tolerance: f64 },

    #[error("propagator tolerance not met (error estimate {estimate:e})")]
    Propagator { estimate: f64 },

    #[error("observable is insensitive to the phase (derivative {derivative:e})")]
    InsensitiveObservable { derivative: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("quadrature order insufficient: doubling the nodes changed the result by {relative_change:e}")]
    QuadratureOrder { relative_change: f64 },

    #[error("{excluded} of {total} trajectories failed to integrate")]
    TrajectoryFailures { excluded: usize, total: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
