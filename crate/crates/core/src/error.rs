use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group mismatch: expected {expected}, found {found}")]
    GroupMismatch { expected: String, found: String },

    #[error("invalid group descriptor: {0}")]
    InvalidGroup(String),

    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("cannot parse element {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("element {element} not reachable within radius {radius}")]
    Unreachable { element: String, radius: usize },

    #[error("gauge undefined at {0}")]
    GaugeUndefined(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// Operation requires a probability measure (mass 1).
    #[error("expected a probability measure, got mass {0}")]
    NotProbability(f64),

    #[error("truncation budget exceeded: dropped mass {dropped:e} > allowed {allowed:e}")]
    Truncation { dropped: f64, allowed: f64 },

    #[error("sampled element {0} was dropped from the truncated table; raise the support cap")]
    VisitedAtomDropped(String),

    #[error("invalid stopping rule: {0}")]
    InvalidRule(String),

    #[error("all {0} paths were censored")]
    AllCensored(usize),

    #[error("hitting frequency is zero at {0}; horizon or path count too small")]
    ZeroHittingFrequency(String),

    #[error("usage: {0}")]
    Usage(String),
}
