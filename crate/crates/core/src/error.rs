use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("region side {side} is not divisible by merge factor {m}")]
    Divisibility { side: usize, m: usize },

    #[error("region out of bounds: {0}")]
    OutOfBounds(String),

    #[error("unsupported regime: alpha = {alpha}, d = {d} ({reason})")]
    UnsupportedRegime { alpha: f64, d: u32, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("K_alpha has a pole: m^(alpha-2d) = {value} must exceed 3")]
    Pole { value: f64 },

    #[error("size {target} is not reachable (nearest reachable: {below:?} below, {above:?} above)")]
    Unreachable {
        target: u64,
        below: Option<u64>,
        above: Option<u64>,
    },

    #[error("gate is not unitary (max deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    Unnormalized { norm_sqr: f64 },

    #[error("state of {requested} amplitudes exceeds memory cap of {cap}")]
    MemoryCap { requested: u128, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid site: {0}")]
    InvalidSite(String),

    #[error("plan does not match region: {0}")]
    PlanMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization failed: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
