//! Arithmetic random waves on the flat torus `R^2 / Z^2`.
//!
//! The crate enumerates the frequency sets of toral Laplace eigenspaces,
//! counts their additive correlations, builds lattice sets with prescribed
//! angular limits, samples the Gaussian eigenfunctions, and measures their
//! nodal length on the whole torus and on small balls.

pub mod correlations;
pub mod field;
pub mod lattice;
pub mod moments;
pub mod nodal;
pub mod quad;
pub mod rng;
pub mod sectors;

use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default cap on hash operations for correlation enumeration.
pub const DEFAULT_WORK_LIMIT: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a sum of two squares")]
    NotInS(u64),
    #[error("work limit exceeded: {estimated} operations > {limit}")]
    WorkLimit { estimated: u64, limit: u64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular displacement: 1 - r^2 = {0:e}")]
    SingularDisplacement(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("sector {index} has no admissible Gaussian prime within radius {radius}")]
    EmptySector { index: usize, radius: f64 },
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T, Error> {
    Err(Error::Invalid(msg.into()))
}
