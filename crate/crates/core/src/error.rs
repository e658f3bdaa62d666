use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("horizon too large: {needed} evaluations exceeds cap {cap}")]
    HorizonTooLarge { needed: u128, cap: u64 },

    #[error("frequency box of size {size:.0} exceeds cap {cap}")]
    BoxTooLarge { size: f64, cap: u64 },

    #[error("enumeration cap exceeded: {0}")]
    Cap(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at {field}: {msg}")]
    Parse { field: String, msg: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input")]
    EmptyInput,

    #[error("singular matrix")]
    Singular,

    #[error("linearly dependent basis")]
    Dependent,

    #[error("rounding radius 2^{radius_log2:.1} exceeds limit 2^{limit_log2:.1}")]
    Precision { radius_log2: f64, limit_log2: f64 },

    #[error("no integral solution: {0}")]
    IntegralityFailure(String),

    #[error("degenerate horizon y = {y}")]
    DegenerateHorizon { y: f64 },

    #[error("lift verification failed for constraint {index}: dist {dist} >= eps {eps}")]
    LiftVerification { index: usize, dist: String, eps: String },

    #[error("lifted n = {n} is not below the parent horizon {y}")]
    HorizonOverflow { n: String, y: String },

    #[error("invalid approximation: {0}")]
    InvalidApproximation(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
