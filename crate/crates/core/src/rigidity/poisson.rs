//! Dirichlet Poisson problems on the grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridDomain, TensorField};
use crate::par;

const REL_TOL: f64 = 1e-10;

/// Five/seven-point negative Laplacian on inside nodes with zero values elsewhere.
struct Laplace<'a> {
    domain: &'a GridDomain,
    unknowns: Vec<usize>,
    slot: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl<'a> Laplace<'a> {
    fn new(domain: &'a GridDomain) -> Self {
        let unknowns: Vec<usize> = (0..domain.len()).filter(|&i| domain.is_inside(i)).collect();
        let mut slot = vec![NONE; domain.len()];
        for (k, &i) in unknowns.iter().enumerate() {
            slot[i] = k as u32;
        }
        Self { domain, unknowns, slot }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.domain;
        let n = d.dim();
        let inv_h2 = 1.0 / d.spacing().powi(2);
        par::for_each_chunk_mut(out, 1, |k, o| {
            let i = self.unknowns[k];
            let mut s = 2.0 * n as f64 * x[k];
            for axis in 0..n {
                for step in [-1, 1] {
                    if let Some(j) = d.neighbor(i, axis, step) {
                        let sj = self.slot[j];
                        if sj != NONE {
                            s -= x[sj as usize];
                        }
                    }
                }
            }
            o[0] = s * inv_h2;
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient(op: &Laplace, b: &[f64]) -> Result<Vec<f64>> {
    let m = b.len();
    let mut x = vec![0.0; m];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut dir = r.clone();
    let mut ad = vec![0.0; m];
    let mut rr = dot(&r, &r);
    let cap = (20 * m).max(200);
    for _ in 0..cap {
        if rr.sqrt() <= REL_TOL * bnorm {
            return Ok(x);
        }
        op.apply(&dir, &mut ad);
        let alpha = rr / dot(&dir, &ad);
        for k in 0..m {
            x[k] += alpha * dir[k];
            r[k] -= alpha * ad[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..m {
            dir[k] = r[k] + beta * dir[k];
        }
    }
    if rr.sqrt() <= REL_TOL * bnorm {
        return Ok(x);
    }
    Err(Error::NotConverged {
        iterations: cap,
        residual: rr.sqrt() / bnorm,
    })
}

/// Solves `−Δu = f` with `u = 0` off the inside nodes, component by component.
pub fn solve_poisson_dirichlet(f: &TensorField) -> Result<TensorField> {
    let domain = Arc::clone(f.domain());
    let op = Laplace::new(&domain);
    let c = f.ncomp();
    let mut out = TensorField::zeros(&domain, f.rank());
    for comp in 0..c {
        let b: Vec<f64> = op.unknowns.iter().map(|&i| f.values()[i * c + comp]).collect();
        if let Some(k) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(op.unknowns[k]));
        }
        let x = conjugate_gradient(&op, &b)?;
        let values = out.values_mut();
        for (k, &i) in op.unknowns.iter().enumerate() {
            values[i * c + comp] = x[k];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian, make_domain, Shape};
    use std::f64::consts::PI;

    fn manufactured_error(res: usize) -> f64 {
        let d = make_domain(Shape::unit_square(), res).unwrap();
        let exact = |x: &crate::grid::Point| (PI * x[0]).sin() * (PI * x[1]).sin();
        let f = TensorField::scalar_fn(&d, |x| 2.0 * PI * PI * exact(x));
        let u = solve_poisson_dirichlet(&f).unwrap();
        let mut err = 0.0;
        for i in d.active_nodes() {
            err += d.weights()[i] * (u.values()[i] - exact(&d.position(i))).powi(2);
        }
        err.sqrt()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let d = make_domain(Shape::Lshape, 17).unwrap();
        let u = solve_poisson_dirichlet(&TensorField::zeros(&d, 2)).unwrap();
        assert_eq!(u.sup_norm(), 0.0);
    }

    #[test]
    fn second_order_convergence() {
        let e: Vec<f64> = [17, 33, 65].iter().map(|&r| manufactured_error(r)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{e:?}");
        }
    }

    #[test]
    fn discrete_maximum_principle() {
        let d = make_domain(
            Shape::Disk {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            25,
        )
        .unwrap();
        let f = TensorField::scalar_fn(&d, |x| (3.0 * x[0]).sin().abs() + x[1] * x[1]);
        let u = solve_poisson_dirichlet(&f).unwrap();
        assert!(u.values().iter().all(|v| *v >= -1e-10));
        let res = laplacian(&u).add(&f).unwrap();
        let scale = f.sup_norm();
        for i in 0..d.len() {
            if d.is_inside(i) {
                assert!(res.values()[i].abs() <= 1e-8 * scale);
            }
        }
    }
}
