use thiserror::Error;

/// Errors shared across the whole toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("empty aggregation")]
    EmptyAggregation,

    #[error("zero weight in harmonic mean")]
    ZeroWeightInHarmonicMean,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("beta out of range: {0}")]
    BetaOutOfRange(f64),

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("infeasible start: state violates the likelihood cutoff")]
    InfeasibleStart,

    #[error("reverse chain requires an exact posterior sample: {0}")]
    MissingProvenance(String),

    #[error("star point unreachable: all transition probabilities are zero")]
    StarPointUnreachable,

    #[error("stop criterion never met within the step cap")]
    StopCriterionNeverMet,

    #[error("monotonicity violated: bound decreased by {0} nats")]
    MonotonicityViolated(f64),

    #[error("no bound to audit: estimator direction is none")]
    NoBoundToAudit,

    #[error("unregistered conditional: {0}")]
    UnregisteredConditional(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
