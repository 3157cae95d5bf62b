use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample")]
    EmptySample,

    #[error("sample size {size} exceeds exact-oracle cap {cap}")]
    OracleSizeCap { size: usize, cap: usize },

    #[error("operation requires labeled samples")]
    MissingLabels,

    #[error("loss does not carry a Lipschitz constant")]
    NonLipschitzLoss,

    #[error("interval outside component domain: {0}")]
    DomainViolation(String),

    #[error(
        "component on coordinate {coord} is not monotone: \
         slope is positive near t={t_pos} and negative near t={t_neg}"
    )]
    NonMonotone { coord: usize, t_pos: f64, t_neg: f64 },

    #[error("models are not comparable: {0}")]
    ModelMismatch(String),

    #[error("model is not centered: {0}")]
    NotCentered(String),

    #[error("unknown verifier method `{0}`")]
    UnknownMethod(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
