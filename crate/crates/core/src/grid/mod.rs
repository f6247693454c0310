//! Grids over Lipschitz domains, fields on them, and finite-difference calculus.

mod calculus;
mod domain;
mod field;
pub mod geometry;
mod whitney;

pub use calculus::{
    distance_weight, divergence, gradient, laplacian, mean_gradient, mean_gradient_on, skew_part,
    sym_gradient, sym_part, weighted_mean,
};
pub use domain::{make_domain, make_domain_aligned, GridDomain, GridSummary};
pub use field::{FieldRecord, TensorField};
pub use geometry::{Point, Shape};
pub use whitney::{whitney_decomposition, Cube, WhitneyStats, WHITNEY_UPPER};
pub(crate) use whitney::nodes_in_cube;
