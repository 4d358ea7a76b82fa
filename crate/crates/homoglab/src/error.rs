//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by field construction, solvers, and the study harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A field spec or study config failed validation.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// A coefficient evaluated outside (0, ∞) or outside its declared
    /// ellipticity bounds.
    #[error("coefficient out of range at x = {x:?}: value {value}")]
    CoefficientOutOfRange { x: Vec<f64>, value: f64 },

    /// The iterative solver did not reach the requested tolerance.
    #[error("CG did not converge: {iterations} iterations, residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    /// Too many ensemble members failed to deliver an estimate.
    #[error("ensemble quorum not met: {ok} of {total} realizations succeeded")]
    QuorumNotMet { ok: usize, total: usize },

    /// Configuration file I/O or parse problem.
    #[error("config: {0}")]
    Config(String),

    /// Output I/O problem.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shorthand result alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;
