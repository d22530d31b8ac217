//! Weak values of quantum operators inferred from strong (projective)
//! measurement statistics.

// `!(x > 0.0)` is deliberate throughout: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohmian;
pub mod error;
pub mod evolution;
pub mod operator;
pub mod sampling;
pub mod spectral;
pub mod spin;
pub mod state;
pub mod tof;
pub mod weak;

pub use error::{Error, Result};
