use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interferometer parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(
        "inconsistent exposure: p_iii = {value:.4} is more than 3 sigma ({sigma:.4}) below zero"
    )]
    InconsistentExposure { value: f64, sigma: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("likelihood ratio undefined: both group-ii probabilities are zero")]
    UndefinedRatio,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing {0}")]
    Missing(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
