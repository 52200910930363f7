//! Shared error type for configuration validation and the criterion stack.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {index} is not a unit vector (norm = {norm})")]
    NonUnitPoint { index: usize, norm: f64 },

    #[error("bodies {i} and {j} are collided or antipodal (q_i . q_j = {dot})")]
    SingularPair { i: usize, j: usize, dot: f64 },

    #[error("configuration has rank {rank}, but rank {needed} is required")]
    DegenerateConfiguration { rank: usize, needed: usize },

    #[error(
        "{n_bodies} bodies on S^{dim} do not form a Dziobek configuration \
         (need dim = {expected})"
    )]
    WrongCodimension {
        n_bodies: usize,
        dim: usize,
        expected: usize,
    },

    #[error("signed minor {index} is numerically zero")]
    DegenerateMinor { index: usize },

    #[error(
        "signed minors change sign: the bodies lie in a closed hemisphere \
         and admit no positive mass solution"
    )]
    MixedMinorSigns,

    #[error("mass {index} must be positive and finite (got {value})")]
    NonPositiveMass { index: usize, value: f64 },

    #[error("{name} = {value} violates {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("trajectory reached the singular set at t = {t}")]
    SingularEncounter { t: f64 },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}
