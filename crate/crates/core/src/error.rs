use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {grid} points cannot represent band limit {max_freq} (need at least {required})")]
    Aliasing {
        grid: usize,
        max_freq: usize,
        required: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration cap exceeded: N = {requested} > {cap}")]
    CapExceeded { requested: usize, cap: usize },
    #[error("time grid is not uniform (spacing deviates by {deviation:.3e})")]
    NonUniformGrid { deviation: f64 },
    #[error("step size underflow at t = {time:.6e}: dt = {dt:.3e}")]
    StepUnderflow { time: f64, dt: f64 },
    #[error("non-finite state encountered at t = {time:.6e}")]
    NonFinite { time: f64 },
    #[error("input is not a solution of the truncated mKdV: {quantity} drifts by {drift:.3e}")]
    NotConserved { quantity: &'static str, drift: f64 },
    #[error("all sample weights vanish ({samples} samples)")]
    DegenerateWeights { samples: usize },
    #[error("{excluded} of {count} samples failed, above the allowed exclusion rate")]
    ExcessiveExclusion { excluded: usize, count: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
