use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("sample too small: need at least {required} observations, got {got}")]
    SampleSize { required: usize, got: usize },

    #[error("lag {lag} out of range for sample of size {n}")]
    Lag { lag: isize, n: usize },

    #[error("invalid matrix shape: {0}")]
    Shape(String),

    #[error("eigenvalue {index} is numerically zero ({value:e})")]
    DegenerateSpectrum { index: usize, value: f64 },

    #[error("aligned component is undefined: v1/n^gamma + s*u vanishes")]
    DegenerateAlignment,

    #[error("invalid trend: {0}")]
    Trend(String),

    #[error("unstable autoregression: operator norm {0} must be below 1")]
    Stability(f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
