//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::pilots::UserId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid argument combination (shape mismatch, weights off the simplex, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Invalid network or optimizer configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Shadow-fading or placement regeneration did not converge for a user.
    #[error("layout generation failed for user {user} after {attempts} attempts: {reason}")]
    Generation {
        user: UserId,
        attempts: usize,
        reason: &'static str,
    },

    /// A user has no pilot energy so its estimator is undefined.
    #[error("user {0} has zero pilot power")]
    DegeneratePilot(UserId),

    /// The requested operation needs `tau_p == K`.
    #[error("unsupported pilot structure: tau_p = {pilot_len}, K = {users_per_cell}")]
    UnsupportedStructure {
        pilot_len: usize,
        users_per_cell: usize,
    },

    /// Exhaustive enumeration would exceed the configured cap.
    #[error("enumeration needs {required} assignments, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    /// A covariance matrix is not Hermitian positive semidefinite.
    #[error("covariance is not positive semidefinite: {0}")]
    NotPsd(String),

    /// Every sub-problem of an optimization failed.
    #[error("optimization failed: {0}")]
    Solver(String),
}
