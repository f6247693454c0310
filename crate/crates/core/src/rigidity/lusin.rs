//! Lipschitz truncation through the local maximal function.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, TensorField};
use crate::par;
use crate::varnorm::{maximal_function, MaximalMode};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LusinReport {
    pub lambda: f64,
    /// `‖∇v‖_∞ / λ`.
    pub lipschitz_ratio: f64,
    pub changed_nodes: usize,
    /// Quadrature measure of `{u ≠ v}`.
    pub changed_measure: f64,
    /// Quadrature measure of `{M_Ω(|∇u|) > λ}`.
    pub bad_measure: f64,
    /// `∫_{|∇u| > λ} |∇u| / λ`.
    pub tail_bound: f64,
    /// `{u ≠ v} ⊆ {M_Ω(|∇u|) > λ}` as node sets.
    pub inclusion_holds: bool,
    /// No node satisfied `M_Ω(|∇u|) ≤ λ`; `v` is the componentwise median.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct LusinResult {
    pub v: TensorField,
    /// Nodes where `v ≠ u`.
    pub changed: Vec<bool>,
    /// Good set `{M_Ω(|∇u|) ≤ λ}` (active nodes only).
    pub good: Vec<bool>,
    pub report: LusinReport,
}

/// Keeps `u` on `G = {M_Ω(|∇u|) ≤ λ}` and replaces it elsewhere by the
/// componentwise McShane extension `min_{y∈G} u_i(y) + λ|x − y|`.
pub fn lusin_truncate(u: &TensorField, lambda: f64) -> Result<LusinResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if u.rank() != 1 {
        return Err(Error::RankMismatch {
            expected: 1,
            found: u.rank(),
        });
    }
    let d = Arc::clone(u.domain());
    let n = d.dim();
    let grad = gradient(u)?;
    let gmag = grad.magnitude_field();
    let maximal = maximal_function(&gmag, MaximalMode::Local);
    let good: Vec<bool> = (0..d.len())
        .map(|i| d.is_active(i) && maximal.values()[i] <= lambda)
        .collect();
    let good_nodes: Vec<usize> = (0..d.len()).filter(|&i| good[i]).collect();
    let degenerate = good_nodes.is_empty();

    let mut v = u.clone();
    if degenerate {
        let active = d.active_nodes();
        for k in 0..n {
            let mut vals: Vec<f64> = active.iter().map(|&i| u.node(i)[k]).collect();
            vals.sort_by(f64::total_cmp);
            let med = vals[vals.len() / 2];
            for &i in &active {
                v.node_mut(i)[k] = med;
            }
        }
    } else {
        let pos: Vec<_> = good_nodes.iter().map(|&i| d.position(i)).collect();
        let vals: Vec<&[f64]> = good_nodes.iter().map(|&i| u.node(i)).collect();
        let ext = par::map_range(d.len(), |i| {
            if !d.is_active(i) || good[i] {
                return None;
            }
            let x = d.position(i);
            let mut best = [f64::INFINITY; 3];
            for (y, uy) in pos.iter().zip(&vals) {
                let r = (0..n).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>().sqrt();
                for k in 0..n {
                    best[k] = best[k].min(uy[k] + lambda * r);
                }
            }
            Some(best)
        });
        for (i, e) in ext.into_iter().enumerate() {
            if let Some(b) = e {
                v.node_mut(i).copy_from_slice(&b[..n]);
            }
        }
    }

    let changed: Vec<bool> = (0..d.len())
        .map(|i| d.is_active(i) && u.node(i) != v.node(i))
        .collect();
    let weights = d.weights();
    let inclusion_holds = (0..d.len()).all(|i| !changed[i] || !good[i]);
    let changed_measure = (0..d.len()).filter(|&i| changed[i]).map(|i| weights[i]).sum();
    let bad_measure = (0..d.len())
        .filter(|&i| d.is_active(i) && !good[i])
        .map(|i| weights[i])
        .sum();
    let tail_bound = (0..d.len())
        .filter(|&i| gmag.values()[i] > lambda)
        .map(|i| weights[i] * gmag.values()[i] / lambda)
        .sum();
    let lipschitz_ratio = gradient(&v)?.sup_norm() / lambda;
    Ok(LusinResult {
        report: LusinReport {
            lambda,
            lipschitz_ratio,
            changed_nodes: changed.iter().filter(|c| **c).count(),
            changed_measure,
            bad_measure,
            tail_bound,
            inclusion_holds,
            degenerate,
        },
        v,
        changed,
        good,
    })
}
