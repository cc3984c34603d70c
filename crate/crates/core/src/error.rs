use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The instrumental density produced a non-finite value where the target
    /// was finite.
    #[error("estimator breakdown at draw {index}: {reason}")]
    EstimatorBreakdown { index: usize, reason: String },

    /// The IDR denominator `mean(ratio) - 1` was not positive.
    #[error("estimator undefined for k = {k:e}: mean density ratio minus one is {excess:e}")]
    EstimatorUndefined { k: f64, excess: f64 },

    #[error("no grid value of k produced a defined estimate")]
    NoValidK,

    /// Sample covariance is (numerically) singular.
    #[error("degenerate sample: covariance collapses along {} direction(s) {directions:?}", directions.len())]
    DegenerateSample { directions: Vec<Vec<f64>> },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("parameter block `{block}` is invalid: {message}")]
    InvalidBlock { block: String, message: String },

    #[error("taxon names do not match: {0}")]
    NameMismatch(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("evidence estimates refer to different data ({0} vs {1})")]
    DataMismatch(String, String),

    #[error("likelihood evaluation failed at iteration {iteration}: {message}")]
    ChainAborted { iteration: usize, message: String },
}
