use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coefficient sequence is empty")]
    EmptyCoefficients,

    #[error("marble coefficients not normalized: |a|^2 + |b|^2 = {0}")]
    NotNormalized(f64),

    #[error("marble index {index} out of range for {n} marbles")]
    MarbleIndex { index: usize, n: usize },

    #[error("marble index {0} appears more than once")]
    DuplicateMarble(usize),

    #[error("{n} marbles exceeds the dense limit of {limit}")]
    TooManyMarbles { n: usize, limit: usize },

    #[error("state norm is {0}, expected 1")]
    StateNorm(f64),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("state is not permutation symmetric: {0}")]
    Asymmetric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("invalid {name} = {value}: expected {range}")]
    Parameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("unknown cell {0}")]
    UnknownCell(usize),

    #[error("state already carries registers")]
    AlreadyCoupled,

    #[error("configuration has no registers or pointer")]
    MissingRegisters,

    #[error("subsystem {0} does not exist in this layout")]
    InvalidSubsystem(String),

    #[error("outcome {outcome} out of range for subsystem {subsystem}")]
    InvalidOutcome { subsystem: String, outcome: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks `low < value < high` style ranges and builds the matching error.
pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    range: &'static str,
) -> Result<f64> {
    if ok && !value.is_nan() {
        Ok(value)
    } else {
        Err(Error::Parameter { name, value, range })
    }
}
