//! Finite-difference calculus on grid fields.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::domain::GridDomain;
use super::field::TensorField;
use crate::error::{Error, Result};
use crate::par;

fn apply_stencil(values: &[f64], ncomp: usize, comp: usize, s: &[(u32, f64); 3]) -> f64 {
    s.iter()
        .map(|(j, c)| if *c == 0.0 { 0.0 } else { c * values[*j as usize * ncomp + comp] })
        .sum()
}

/// Gradient of a scalar (rank 0 → 1) or vector field (rank 1 → 2).
///
/// For vector fields the result stores `(∇u)_{ij} = ∂_j u_i`.
pub fn gradient(u: &TensorField) -> Result<TensorField> {
    if u.rank() > 1 {
        return Err(Error::RankMismatch {
            expected: 1,
            found: u.rank(),
        });
    }
    let domain = Arc::clone(u.domain());
    let n = domain.dim();
    let in_comp = u.ncomp();
    let stencils = domain.stencils();
    let mut out = TensorField::zeros(&domain, u.rank() + 1);
    let values = u.values();
    par::for_each_chunk_mut(out.values_mut(), in_comp * n, |i, chunk| {
        if !domain.is_active(i) {
            return;
        }
        for c in 0..in_comp {
            for axis in 0..n {
                chunk[c * n + axis] = apply_stencil(values, in_comp, c, &stencils[i * n + axis]);
            }
        }
    });
    Ok(out)
}

/// Symmetric part of the gradient, `eu = ½(∇u + ∇uᵀ)`.
pub fn sym_gradient(u: &TensorField) -> Result<TensorField> {
    if u.rank() != 1 {
        return Err(Error::RankMismatch {
            expected: 1,
            found: u.rank(),
        });
    }
    let grad = gradient(u)?;
    Ok(sym_part(&grad))
}

/// Pointwise symmetric part of a matrix field.
pub fn sym_part(a: &TensorField) -> TensorField {
    let n = a.dim();
    let mut out = a.clone();
    for chunk in out.values_mut().chunks_mut(n * n) {
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (chunk[i * n + j] + chunk[j * n + i]);
                chunk[i * n + j] = s;
                chunk[j * n + i] = s;
            }
        }
    }
    out
}

/// Pointwise skew part of a matrix field.
pub fn skew_part(a: &TensorField) -> TensorField {
    let n = a.dim();
    let mut out = a.clone();
    for chunk in out.values_mut().chunks_mut(n * n) {
        for i in 0..n {
            chunk[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let s = 0.5 * (chunk[i * n + j] - chunk[j * n + i]);
                chunk[i * n + j] = s;
                chunk[j * n + i] = -s;
            }
        }
    }
    out
}

/// Row-wise divergence of a matrix field: `(div Ψ)_i = Σ_j ∂_j Ψ_{ij}`.
pub fn divergence(psi: &TensorField) -> Result<TensorField> {
    if psi.rank() != 2 {
        return Err(Error::RankMismatch {
            expected: 2,
            found: psi.rank(),
        });
    }
    let domain = Arc::clone(psi.domain());
    let n = domain.dim();
    let stencils = domain.stencils();
    let values = psi.values();
    let mut out = TensorField::zeros(&domain, 1);
    par::for_each_chunk_mut(out.values_mut(), n, |i, chunk| {
        if !domain.is_active(i) {
            return;
        }
        for r in 0..n {
            chunk[r] = (0..n)
                .map(|j| apply_stencil(values, n * n, r * n + j, &stencils[i * n + j]))
                .sum();
        }
    });
    Ok(out)
}

/// Quadrature mean of a field over the nodes selected by `weights`.
pub fn weighted_mean(field: &TensorField, weights: &[f64]) -> Vec<f64> {
    let c = field.ncomp();
    let mut acc = vec![0.0; c];
    let mut total = 0.0;
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        total += w;
        for (a, v) in acc.iter_mut().zip(field.node(i)) {
            *a += w * v;
        }
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}

/// `⟨∇u⟩_Ω`, the quadrature average of the gradient.
pub fn mean_gradient(u: &TensorField) -> Result<DMatrix<f64>> {
    let grad = gradient(u)?;
    let n = u.dim();
    let mean = weighted_mean(&grad, u.domain().weights());
    Ok(DMatrix::from_row_slice(n, n, &mean))
}

/// Mean gradient over the nodes where `mask` holds.
pub fn mean_gradient_on(u: &TensorField, mask: &[bool]) -> Result<DMatrix<f64>> {
    let grad = gradient(u)?;
    let n = u.dim();
    let w: Vec<f64> = u
        .domain()
        .weights()
        .iter()
        .zip(mask)
        .map(|(w, m)| if *m { *w } else { 0.0 })
        .collect();
    Ok(DMatrix::from_row_slice(n, n, &weighted_mean(&grad, &w)))
}

/// `d(·, ∂Ω)` as a scalar field.
pub fn distance_weight(domain: &Arc<GridDomain>) -> TensorField {
    TensorField::from_values(domain, 0, domain.boundary_distances().to_vec())
        .expect("one value per node")
}

/// Five/seven-point Laplacian at inside nodes (zero elsewhere).
pub fn laplacian(u: &TensorField) -> TensorField {
    let domain = Arc::clone(u.domain());
    let n = domain.dim();
    let c = u.ncomp();
    let h2 = domain.spacing().powi(2);
    let values = u.values();
    let mut out = TensorField::zeros(&domain, u.rank());
    par::for_each_chunk_mut(out.values_mut(), c, |i, chunk| {
        if !domain.is_inside(i) {
            return;
        }
        for k in 0..c {
            let mut s = -2.0 * n as f64 * values[i * c + k];
            for axis in 0..n {
                for step in [-1, 1] {
                    if let Some(j) = domain.neighbor(i, axis, step) {
                        s += values[j * c + k];
                    }
                }
            }
            chunk[k] = s / h2;
        }
    });
    out
}
