//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, transforms, solving, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix lengths do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A coordinate lies outside the basis domain.
    #[error("coordinate {value} outside domain in dimension {dim}")]
    OutOfDomain { dim: usize, value: f64 },

    /// A frequency index lies outside the basis frequency range.
    #[error("frequency {k} invalid for this basis kind")]
    InvalidFrequency { k: i64 },

    /// Bandwidth entries must be even (and positive where a full hypercube is built).
    #[error("invalid bandwidth: {0}")]
    InvalidBandwidth(String),

    /// A subset family violates its support constraint or is empty.
    #[error("invalid family: {0}")]
    InvalidFamily(String),

    /// The weight function diverges at the requested point.
    #[error("weight singular at {value} in dimension {dim}")]
    SingularWeight { dim: usize, value: f64 },

    /// Forward and adjoint callbacks fail the bilinear pairing self-test.
    #[error("operator adjoint mismatch: pairing error {0:.3e}")]
    AdjointMismatch(f64),

    /// The solver met non-finite values.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// A model without variance cannot yield sensitivity indices.
    #[error("degenerate model: total variance is zero")]
    DegenerateModel,

    /// Threshold or option outside its legal range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Text parse failure with position information.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
