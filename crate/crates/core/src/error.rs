use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),
    #[error("unnormalized series diverges: {0}")]
    NonSummable(String),
    #[error("interarrival mean is infinite")]
    InfiniteMean,
    #[error("series diverges: {0}")]
    Diverges(String),
    #[error("support has fewer than two atoms")]
    DegenerateSupport,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("c = {c} is not above the threshold {threshold}")]
    BelowThreshold { c: f64, threshold: f64 },
    #[error("window {window} is smaller than the required {required}")]
    WindowTooSmall { window: u64, required: u64 },
    #[error("event window violation: {0}")]
    BadEventWindow(String),
    #[error("environment covers {have} columns but {need} are needed")]
    EnvTooShort { have: u64, need: u64 },
    #[error("rectangle {0} is outside the window")]
    RectOutOfWindow(String),
    #[error("parent interval {0} has too many bad children")]
    TooManyBadChildren(u64),
    #[error("site grid {have} is smaller than {need}")]
    GridTooSmall { have: String, need: String },
    #[error("rejection sampling acceptance {0} is below 1e-4")]
    ConditioningFailed(f64),
    #[error("no result records in {0}")]
    NoResults(String),
    #[error("overflow in log-space: {0}")]
    Overflow(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
