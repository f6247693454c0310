//! Rigidity, Korn and Poincaré estimators and the mixed-growth decompositions.

mod korn;
mod lusin;
mod mixed;
mod nitsche;
mod poisson;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{ExponentField, ExponentSummary};
use crate::grid::{distance_weight, gradient, mean_gradient, GridDomain, TensorField};
use crate::rotgeo::{dist_so, nearest_rotation, sym_skew_split};
use crate::varnorm::{g_modular, norm};

pub use korn::{
    mixed_korn_decompose, mixed_korn_decompose_on, MixedKornReport, MixedKornResult, MixedSplit, SkewRegion,
};
pub use lusin::{lusin_truncate, LusinReport, LusinResult};
pub use mixed::{
    mixed_rigidity_decompose, MixedBranch, MixedRigidityReport, MixedRigidityResult, MAX_MU, TAYLOR_CONSTANT,
};
pub use nitsche::{
    affine_extension, kernel_moments, nitsche_extend, AffineGraph, NitscheReport, NitscheResult, KERNEL_NAME,
};
pub use poisson::solve_poisson_dirichlet;

/// Both sides at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Outcome of one inequality estimator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RigidityReport {
    /// Row-major rotation, skew matrix or constant vector selected by the estimator.
    pub rotation_or_skew: Vec<f64>,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    /// `lhs / rhs`; `None` when both sides vanish.
    pub ratio: Option<f64>,
    pub exact_zero: bool,
    pub grid_h: f64,
    pub exponent_summary: ExponentSummary,
}

impl RigidityReport {
    fn new(matrix: Vec<f64>, lhs: f64, rhs: f64, domain: &GridDomain, p: &ExponentField) -> Self {
        let exact_zero = lhs <= ZERO_TOL && rhs <= ZERO_TOL;
        let ratio = if exact_zero {
            None
        } else if rhs > ZERO_TOL {
            Some(lhs / rhs)
        } else {
            Some(f64::INFINITY)
        };
        Self {
            rotation_or_skew: matrix,
            lhs_norm: lhs,
            rhs_norm: rhs,
            ratio,
            exact_zero,
            grid_h: domain.spacing(),
            exponent_summary: p.summary(),
        }
    }

    /// The selected matrix (square reports only).
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = (self.rotation_or_skew.len() as f64).sqrt().round() as usize;
        DMatrix::from_row_slice(n, n, &self.rotation_or_skew)
    }
}

/// Row-major copy of a matrix.
pub(crate) fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            out.push(a[(r, c)]);
        }
    }
    out
}

/// Applies `f(node, matrix)` at every active node of a rank-2 field.
pub(crate) fn map_matrices<F>(field: &TensorField, f: F) -> TensorField
where
    F: Fn(usize, DMatrix<f64>) -> DMatrix<f64>,
{
    let mut out = TensorField::zeros(field.domain(), 2);
    for i in 0..field.domain().len() {
        if field.domain().is_active(i) {
            out.set_matrix(i, &f(i, field.matrix_at(i)));
        }
    }
    out
}

/// Pointwise `dist(A(x), SO(n))` as a scalar field.
pub fn dist_field(grad: &TensorField) -> TensorField {
    let d = grad.domain();
    let values = (0..d.len())
        .map(|i| if d.is_active(i) { dist_so(&grad.matrix_at(i)) } else { 0.0 })
        .collect();
    TensorField::from_values(d, 0, values).expect("one value per node")
}

fn check_inputs(u: &TensorField, p: &ExponentField, need_vector: bool) -> Result<()> {
    if !u.domain().same_grid(p.domain()) {
        return Err(Error::DomainMismatch);
    }
    if need_vector && u.rank() != 1 {
        return Err(Error::RankMismatch {
            expected: 1,
            found: u.rank(),
        });
    }
    if p.p_minus() <= 1.0 {
        return Err(Error::ExponentRange(format!("estimator needs p⁻ > 1, got {}", p.p_minus())));
    }
    Ok(())
}

/// `‖∇u − R‖_{p(·)}` against `‖dist(∇u, SO(n))‖_{p(·)}` with `R` the
/// rotation nearest to the mean gradient.
pub fn rigidity_report(u: &TensorField, p: &ExponentField) -> Result<RigidityReport> {
    check_inputs(u, p, true)?;
    let grad = gradient(u)?;
    let r = nearest_rotation(&mean_gradient(u)?).rotation;
    let lhs = norm(&grad.sub_matrix(&r), p)?;
    let rhs = norm(&dist_field(&grad), p)?;
    Ok(RigidityReport::new(row_major(&r), lhs, rhs, u.domain(), p))
}

/// `‖∇u − S‖_{p(·)}` against `‖eu‖_{p(·)}` with `S = (⟨∇u⟩)_skew`.
pub fn korn_report(u: &TensorField, p: &ExponentField) -> Result<RigidityReport> {
    check_inputs(u, p, true)?;
    let grad = gradient(u)?;
    let (_, s) = sym_skew_split(&mean_gradient(u)?);
    let lhs = norm(&grad.sub_matrix(&s), p)?;
    let rhs = norm(&crate::grid::sym_part(&grad), p)?;
    Ok(RigidityReport::new(row_major(&s), lhs, rhs, u.domain(), p))
}

/// Same rotation as [`rigidity_report`], with g-modulars in place of norms.
pub fn g_rigidity_report(u: &TensorField, p: &ExponentField) -> Result<RigidityReport> {
    check_inputs(u, p, true)?;
    if p.p_plus() > 2.0 {
        return Err(Error::ExponentRange(format!("g-rigidity needs p⁺ <= 2, got {}", p.p_plus())));
    }
    let grad = gradient(u)?;
    let r = nearest_rotation(&mean_gradient(u)?).rotation;
    let lhs = g_modular(&grad.sub_matrix(&r), p)?;
    let rhs = g_modular(&dist_field(&grad), p)?;
    Ok(RigidityReport::new(row_major(&r), lhs, rhs, u.domain(), p))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_section<F: Fn(f64) -> f64>(mut a: f64, mut b: f64, f: F) -> f64 {
    if b - a <= 0.0 {
        return a;
    }
    let tol = 1e-12 * (b - a).max(a.abs().max(b.abs()) * 1e-3);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `min_a ‖f − a‖_{p(·)}` against `‖d(·, ∂Ω) ∇f‖_{p(·)}`.
///
/// The constant `a` is found component by component with golden-section
/// search over the sampled range (two coordinate sweeps for vector fields).
pub fn weighted_poincare_report(f: &TensorField, p: &ExponentField) -> Result<RigidityReport> {
    check_inputs(f, p, false)?;
    if f.rank() > 1 {
        return Err(Error::RankMismatch {
            expected: 1,
            found: f.rank(),
        });
    }
    let d = Arc::clone(f.domain());
    let c = f.ncomp();
    let active = d.active_nodes();
    let mut a = vec![0.0; c];
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); c];
    for &i in &active {
        for (k, v) in f.node(i).iter().enumerate() {
            ranges[k].0 = ranges[k].0.min(*v);
            ranges[k].1 = ranges[k].1.max(*v);
        }
    }
    for k in 0..c {
        a[k] = 0.5 * (ranges[k].0 + ranges[k].1);
    }
    let shifted = |a: &[f64]| {
        let mut g = f.clone();
        for &i in &active {
            for (k, v) in g.node_mut(i).iter_mut().enumerate() {
                *v -= a[k];
            }
        }
        g
    };
    let sweeps = if c == 1 { 1 } else { 2 };
    for _ in 0..sweeps {
        for k in 0..c {
            let (lo, hi) = ranges[k];
            let best = golden_section(lo, hi, |t| {
                let mut trial = a.clone();
                trial[k] = t;
                norm(&shifted(&trial), p).unwrap_or(f64::INFINITY)
            });
            a[k] = best;
        }
    }
    let lhs = norm(&shifted(&a), p)?;
    let grad = gradient(f)?;
    let rhs = norm(&grad.mul_scalar_field(&distance_weight(&d))?, p)?;
    Ok(RigidityReport::new(a, lhs, rhs, &d, p))
}
