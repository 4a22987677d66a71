use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation budget exceeded: {0}")]
    Budget(String),

    #[error("cube {0} does not intersect the spatial window")]
    OutsideWindow(String),

    #[error("level {level} violates the Nyquist bound (max level {max})")]
    Nyquist { level: i32, max: i32 },

    #[error("aliasing margin violated: {fraction:.3e} of the energy sits in the top octave")]
    Aliasing { fraction: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("ill-conditioned moment correction (cond {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
