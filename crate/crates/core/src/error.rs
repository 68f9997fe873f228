use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Iteration left the representable range (or the requested cutoff) at `index`.
    #[error("orbit escaped at step {index}")]
    Escape { index: usize },

    #[error("no saddle orbit of period dividing {period} found from {seeds} seeds")]
    NoSaddles { period: usize, seeds: usize },

    #[error("declared C^2 bound {declared} violated: measured {measured} on the verification grid")]
    DeclaredBoundViolated { declared: f64, measured: f64 },

    #[error("Hessian bound search exceeded cap {cap} (largest |eigenvalue| seen: {seen})")]
    HessianBoundCap { cap: f64, seen: f64 },

    #[error("sample was built for map {sample} but the supplied map is {map}")]
    FingerprintMismatch { sample: String, map: String },

    #[error("malformed sample file: {0}")]
    MalformedSample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
