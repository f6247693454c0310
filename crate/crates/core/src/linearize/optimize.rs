//! Limited-memory BFGS with Armijo backtracking, and conjugate gradients.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop once `‖∇E‖_∞` on free nodes is at or below this.
    pub gradient_tolerance: f64,
    pub memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            memory: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    /// Backtracking found no decrease; the best iterate is returned.
    LineSearchFailed,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub status: MinimizeStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

pub(crate) fn lbfgs<F>(eval: F, x0: Vec<f64>, opts: &MinimizeOptions) -> Outcome
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = eval(&x);
    let mut energies = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut status = MinimizeStatus::MaxIterations;
    let mut direction = vec![0.0; x.len()];
    let mut alpha_buf = Vec::with_capacity(opts.memory);
    while iterations < opts.max_iterations {
        if inf_norm(&g) <= opts.gradient_tolerance {
            status = MinimizeStatus::Converged;
            break;
        }
        // Two-loop recursion.
        direction.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        alpha_buf.clear();
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &direction);
            direction.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
            alpha_buf.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            direction.iter_mut().for_each(|d| *d *= gamma);
        } else {
            let scale = 1.0 / inf_norm(&g).max(1e-300);
            direction.iter_mut().for_each(|d| *d *= scale.min(1.0));
        }
        for ((s, y, rho), a) in history.iter().zip(alpha_buf.iter().rev()) {
            let b = rho * dot(y, &direction);
            direction.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            history.clear();
            direction.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &direction);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = eval(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((xn, fnew, gn)) = accepted else {
            if history.is_empty() {
                status = MinimizeStatus::LineSearchFailed;
                break;
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fnew;
        g = gn;
        energies.push(fx);
    }
    if status == MinimizeStatus::MaxIterations && inf_norm(&g) <= opts.gradient_tolerance {
        status = MinimizeStatus::Converged;
    }
    Outcome {
        gradient_norm: inf_norm(&g),
        x,
        energies,
        iterations,
        status,
    }
}

pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
pub(crate) fn conjugate_gradient<A>(apply: A, b: &[f64], tol: f64, max_iter: usize) -> CgOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let m = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; m];
    if bnorm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        };
    }
    let mut r = b.to_vec();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while iterations < max_iter && rr.sqrt() > tol * bnorm {
        let ad = apply(&d);
        let alpha = rr / dot(&d, &ad);
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += alpha * di);
        r.iter_mut().zip(&ad).for_each(|(ri, ai)| *ri -= alpha * ai);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        d.iter_mut().zip(&r).for_each(|(di, ri)| *di = ri + beta * *di);
        rr = rr_new;
        iterations += 1;
    }
    CgOutcome {
        x,
        iterations,
        relative_residual: rr.sqrt() / bnorm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let eval = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (f, g)
        };
        let out = lbfgs(eval, vec![-1.2, 1.0], &MinimizeOptions::default());
        assert_eq!(out.status, MinimizeStatus::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cg_solves_spd_system() {
        // Tridiagonal (2, −1) matrix.
        let n = 50;
        let apply = |v: &[f64]| {
            (0..n)
                .map(|i| {
                    let mut s = 2.0 * v[i];
                    if i > 0 {
                        s -= v[i - 1];
                    }
                    if i + 1 < n {
                        s -= v[i + 1];
                    }
                    s
                })
                .collect::<Vec<f64>>()
        };
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = apply(&xs);
        let out = conjugate_gradient(apply, &b, 1e-12, 500);
        assert!(out.relative_residual <= 1e-12);
        for (a, e) in out.x.iter().zip(&xs) {
            assert!((a - e).abs() < 1e-9);
        }
    }
}
