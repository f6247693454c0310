//! Variable-exponent function spaces, rigidity estimators and
//! linearization experiments on uniform grids.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exponent;
pub mod grid;
pub mod linearize;
pub mod par;
pub mod rigidity;
pub mod rng;
pub mod rotgeo;
pub mod scenario;
pub mod varnorm;

pub use error::{Error, Result};
