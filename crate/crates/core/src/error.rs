use thiserror::Error;

/// Errors produced by the measure, transport and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A measure could not be built from the given atoms and weights.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The pair is not in the convex order, so no martingale coupling exists.
    #[error("measures are not in the convex order: {0}")]
    NotInConvexOrder(String),

    /// Both marginals coincide; the inverse-transform construction degenerates.
    #[error("measures are equal")]
    EqualMeasures,

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    /// Two couplings cannot be composed because the shared marginal differs.
    #[error("marginal mismatch (residual {0:e})")]
    MarginalMismatch(f64),

    /// Some fibres of the direction map do not have conditional mean equal to the mean.
    #[error("conditional mean violated on {} direction(s)", .0.len())]
    ConditionalMeanViolation(Vec<Vec<f64>>),

    #[error("linear program {0}")]
    Lp(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
