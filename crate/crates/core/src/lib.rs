//! Exact discrete-time stochastic calculus for filtration enlargements.
//!
//! Everything is generic over [`Scalar`]: [`Rational`] gives bit-exact
//! results, `f64` compares with a global tolerance.

pub mod calculus;
pub mod enlarge;
pub mod error;
pub mod fixtures;
pub mod jumpkernel;
pub mod linalg;
pub mod mrp;
pub mod random;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod selftest;
pub mod space;
pub mod viability;

pub use error::Error;
pub use scalar::{Rational, Scalar};
pub use space::{EnlargementPair, Filtration, Partition, Process, RandomTime, SampleSpace};
