use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid floating-point format e{exp_bits}m{man_bits}: {reason}")]
    InvalidFormat { exp_bits: u32, man_bits: u32, reason: &'static str },

    #[error("unknown format name `{0}`")]
    UnknownFormat(String),

    #[error("format {0} is too large to enumerate (need at most 8 exponent and 12 mantissa bits)")]
    EnumerationTooLarge(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite values in {context} ({count} elements)")]
    NonFinite { context: &'static str, count: usize },

    #[error("{0} did not converge")]
    NotConverged(&'static str),

    #[error("reference has zero norm")]
    ZeroNorm,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("container: {0}")]
    Container(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }
}
