//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by the propagator library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data: non-finite entries, shape mismatches, asymmetry
    /// beyond tolerance, invalid packet exponents.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Parameter outside the operation's domain (t <= 0, p outside [1,2], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Grid dimension not supported by the requested backend.
    #[error("unsupported dimension: {0}")]
    Dimension(String),

    /// Operation applied to a field in the wrong space (position vs frequency).
    #[error("field space error: {0}")]
    State(String),

    /// The system is not hypoelliptic where a positive covariance is required.
    #[error("singular covariance: {0}")]
    Singular(String),

    /// Spectral and Kalman hypoellipticity criteria disagree; the tolerance
    /// configuration cannot be trusted for this system.
    #[error("criterion inconsistency: {0}")]
    Inconsistency(String),

    /// An eigenvalue left the closed right half-plane, so the analytic branch
    /// of the square-root determinant is undefined.
    #[error("branch error: {0}")]
    Branch(String),

    /// Standalone Fourier transform of a pure chirp (Re M singular) requested.
    #[error("unsupported limit: {0}")]
    UnsupportedLimit(String),

    /// An internal invariant that must hold by construction was violated.
    #[error("internal invariant violation: {0}")]
    InvariantViolation(String),

    /// The flow map carries evaluation points outside the sampled box.
    #[error("domain coverage error: {0}")]
    Coverage(String),

    /// The quadratic chirp changes phase by more than pi per grid cell.
    #[error("chirp resolution error: {0}")]
    Resolution(String),

    /// A measured ratio exceeded a bound the theory states as sharp.
    #[error("sharpness violation: {0}")]
    SharpnessViolation(String),

    /// File or JSON parse failure on an external interface.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
