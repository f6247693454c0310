//! Local mixed-growth Korn decomposition through Poisson potentials.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::map_matrices;
use super::poisson::solve_poisson_dirichlet;
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{divergence, gradient, laplacian, mean_gradient_on, sym_part, TensorField};
use crate::rotgeo::sym_skew_split;
use crate::varnorm::luxemburg_norm_weighted;

/// Pair `(f, g)` with exponents `(p, q)`, `q ≥ p`.
#[derive(Clone, Debug)]
pub struct MixedSplit {
    pub f: TensorField,
    pub g: TensorField,
    pub p: ExponentField,
    pub q: ExponentField,
}

impl MixedSplit {
    pub fn new(f: TensorField, g: TensorField, p: ExponentField, q: ExponentField) -> Result<Self> {
        let d = f.domain();
        if !d.same_grid(g.domain()) || !d.same_grid(p.domain()) || !d.same_grid(q.domain()) {
            return Err(Error::DomainMismatch);
        }
        if f.rank() != g.rank() {
            return Err(Error::RankMismatch {
                expected: f.rank(),
                found: g.rank(),
            });
        }
        for i in 0..d.len() {
            if d.is_active(i) && q.value(i) < p.value(i) - 1e-12 {
                return Err(Error::ExponentRange(format!("q < p at node {i}")));
            }
        }
        Ok(Self { f, g, p, q })
    }
}

/// Region whose mean gradient fixes the skew matrix `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkewRegion {
    /// Nodes at distance at least half the maximal boundary distance
    /// (the concentric half-ball on a ball).
    InnerHalf,
    Whole,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixedKornReport {
    /// `‖∇u − S − F − G‖_∞` on the region.
    pub residual: f64,
    /// `‖Δ_h w‖_∞` at inside nodes of the region, `w = u − u_f − u_g`.
    pub harmonic_defect: f64,
    /// `‖F‖_{p} / ‖f‖_{p}` on the region.
    pub ratio_f: f64,
    /// `‖G‖_{q} / (‖f‖_{p} + ‖g‖_{q})` on the region.
    pub ratio_g: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    pub norm_big_f: f64,
    pub norm_big_g: f64,
    pub region_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct MixedKornResult {
    pub skew: DMatrix<f64>,
    pub big_f: TensorField,
    pub big_g: TensorField,
    pub region: Vec<bool>,
    pub report: MixedKornReport,
}

fn potential_rhs(f: &TensorField) -> TensorField {
    map_matrices(f, |_, m| {
        let n = m.nrows();
        DMatrix::identity(n, n) * m.trace() - m * 2.0
    })
}

pub(crate) fn safe_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num <= super::ZERO_TOL {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Decomposes `∇u − S = F + G` on the concentric half-region.
pub fn mixed_korn_decompose(u: &TensorField, split: &MixedSplit) -> Result<MixedKornResult> {
    mixed_korn_decompose_on(u, split, SkewRegion::InnerHalf)
}

/// Decomposition with an explicit region for `S` and the reported norms.
///
/// `Ψ_f, Ψ_g` solve `−ΔΨ = (tr ·)I − 2·` with zero boundary values,
/// `u_f = div Ψ_f`, `u_g = div Ψ_g`, `w = u − u_f − u_g`,
/// `S = (⟨∇w⟩)_skew`, `F = ∇u_f` and `G = ∇w + ∇u_g − S`.
pub fn mixed_korn_decompose_on(u: &TensorField, split: &MixedSplit, region: SkewRegion) -> Result<MixedKornResult> {
    let d = Arc::clone(u.domain());
    if !d.same_grid(split.f.domain()) {
        return Err(Error::DomainMismatch);
    }
    if u.rank() != 1 || split.f.rank() != 2 {
        return Err(Error::RankMismatch {
            expected: 2,
            found: split.f.rank(),
        });
    }
    let h = d.spacing();
    let eu = sym_part(&gradient(u)?);
    let mismatch = eu.sub(&split.f.add(&split.g)?)?.sup_norm();
    if mismatch > 10.0 * h {
        return Err(Error::InvalidParameter(format!(
            "eu differs from f + g by {mismatch:e} > 10h"
        )));
    }
    let psi_f = solve_poisson_dirichlet(&potential_rhs(&split.f))?;
    let psi_g = solve_poisson_dirichlet(&potential_rhs(&split.g))?;
    let u_f = divergence(&psi_f)?;
    let u_g = divergence(&psi_g)?;
    let w = u.sub(&u_f)?.sub(&u_g)?;

    let mask: Vec<bool> = match region {
        SkewRegion::Whole => d.active_mask().to_vec(),
        SkewRegion::InnerHalf => {
            let dmax = d.boundary_distances().iter().cloned().fold(0.0, f64::max);
            (0..d.len())
                .map(|i| d.is_inside(i) && d.boundary_distances()[i] >= 0.5 * dmax)
                .collect()
        }
    };
    let (_, skew) = sym_skew_split(&mean_gradient_on(&w, &mask)?);
    let grad_u = gradient(u)?;
    let big_f = gradient(&u_f)?;
    let big_g = gradient(&w)?.add(&gradient(&u_g)?)?.sub_matrix(&skew);

    let recon = grad_u.sub_matrix(&skew).sub(&big_f)?.sub(&big_g)?;
    let residual = recon.sup_norm_on(&mask);
    let lap = laplacian(&w);
    let inner: Vec<bool> = (0..d.len()).map(|i| mask[i] && d.is_inside(i)).collect();
    let harmonic_defect = lap.sup_norm_on(&inner);

    let weights: Vec<f64> = (0..d.len())
        .map(|i| if mask[i] { d.weights()[i] } else { 0.0 })
        .collect();
    let nf = luxemburg_norm_weighted(&split.f, &split.p, &weights)?.value;
    let ng = luxemburg_norm_weighted(&split.g, &split.q, &weights)?.value;
    let n_big_f = luxemburg_norm_weighted(&big_f, &split.p, &weights)?.value;
    let n_big_g = luxemburg_norm_weighted(&big_g, &split.q, &weights)?.value;
    Ok(MixedKornResult {
        skew,
        big_f,
        big_g,
        report: MixedKornReport {
            residual,
            harmonic_defect,
            ratio_f: safe_ratio(n_big_f, nf),
            ratio_g: safe_ratio(n_big_g, nf + ng),
            norm_f: nf,
            norm_g: ng,
            norm_big_f: n_big_f,
            norm_big_g: n_big_g,
            region_nodes: mask.iter().filter(|m| **m).count(),
        },
        region: mask,
    })
}
