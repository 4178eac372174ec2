use std::io;

use thiserror::Error;

/// Errors raised anywhere in the data-generation, pipeline, and training stack.
#[derive(Debug, Error)]
pub enum Error {
    /// An explicit scheme was asked to step past its stability bound.
    #[error("stability violation: {scheme} ratio {ratio:.6} exceeds 1")]
    Stability { scheme: &'static str, ratio: f64 },

    /// Input data is malformed or contains non-finite values.
    #[error("data error: {0}")]
    Data(String),

    /// Two operands disagree on shape.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A caller-supplied parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A non-finite value appeared during a numerical computation.
    #[error("numeric divergence in {location}")]
    Numeric { location: String },

    /// An interchange or model file failed to parse.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
