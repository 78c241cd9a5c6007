use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value {value} is outside the range of phi on [0, lambda0); sup of range is {bound}")]
    OutOfRange { value: f64, bound: f64 },

    #[error(
        "exact enumeration needs {states} states but the budget is {budget}; use the convolution or monte_carlo engine"
    )]
    BudgetExceeded { states: f64, budget: usize },

    #[error("engine `{engine}` cannot handle {what}")]
    EngineUnsupported { engine: &'static str, what: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error in `{field}`: {reason}")]
    Parse { field: &'static str, reason: String },

    #[error("metric space: {0}")]
    Metric(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Parse {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
