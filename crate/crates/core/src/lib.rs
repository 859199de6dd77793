//! Revealed-preference stability tests for marriage markets with children's
//! consumption, stability indices, and set-identified bounds on
//! intrahousehold allocations.
//!
//! The LP layer and the stability builders are generic over [`scalar::Scalar`];
//! the pipeline stages run on `f64`.

pub mod allocation;
pub mod cli;
pub mod error;
pub mod identification;
pub mod ingest;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod stability;

pub use error::{Error, Result};

/// Double-precision linear program.
pub type LinearProgramF64 = lp::LinearProgram<f64>;
/// Exact rational linear program.
pub type RationalProgram = lp::LinearProgram<num_rational::BigRational>;
/// Double-precision stability program.
pub type StabilityProgramF64 = stability::StabilityProgram<f64>;
/// Exact rational stability program.
pub type RationalStabilityProgram = stability::StabilityProgram<num_rational::BigRational>;
