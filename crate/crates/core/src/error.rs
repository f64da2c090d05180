use thiserror::Error;

/// Errors raised by channel generation, schedule construction, estimation and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("insufficient duration for {what}: need at least {required}, got {got}")]
    InsufficientDuration {
        what: &'static str,
        required: usize,
        got: usize,
    },

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("rank deficient: rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },

    /// `element` is 1-based, matching the usual IRS element numbering.
    #[error("typical-antenna coefficient vanishes at IRS element n={element}")]
    DivisionDegenerate { element: usize },

    #[error("covariance model inconsistent: {0}")]
    ModelInconsistency(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("pilot budget {total} is below the minimum {minimum}")]
    InsufficientBudget { total: usize, minimum: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("too many degenerate trials: {replaced} of {trials} resampled")]
    ResampleLimit { replaced: usize, trials: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
