use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty scores")]
    EmptyScores,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no judgments")]
    NoJudgments,

    #[error("judgment kind mismatch: {0}")]
    JudgmentKind(String),

    #[error("comparison graph disconnected")]
    Disconnected,

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize, last: Vec<f64> },

    #[error("infinite log-odds; supply smoothing")]
    InfiniteLogOdds,

    #[error("degenerate gains")]
    DegenerateGains,

    #[error("brute force cap: m = {0} exceeds 7")]
    BruteForceCap(usize),

    #[error("epsilon too large for instance")]
    EpsilonTooLarge,

    #[error("non-finite gradient at iteration {iteration} (sample {sample})")]
    NonFiniteGradient { iteration: usize, sample: String },

    #[error("no witness found after {0} candidates")]
    NoWitness(usize),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
