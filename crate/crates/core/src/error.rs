use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid tree configuration: {0}")]
    InvalidConfig(String),

    #[error("vertex {0} is outside the truncation")]
    VertexOutOfRange(String),

    #[error("set rooted at {root} (depth band {lo}..{hi}) leaves the truncation")]
    Containment { root: String, lo: u32, hi: u32 },

    #[error("ball or sphere of radius {radius} around {center} is not contained in the truncation")]
    BallNotContained { center: String, radius: u32 },

    #[error("invalid exponent {0}")]
    InvalidExponent(f64),

    #[error("exact arithmetic needs an integer exponent, got {0}")]
    NonIntegerExponent(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function has length {got}, truncation has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },

    #[error("function does not have vanishing integral")]
    NonZeroMean,

    #[error("support is not contained in {0}")]
    SupportNotContained(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
