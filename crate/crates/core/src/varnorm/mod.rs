//! Modulars and Luxemburg norms on grid fields.

mod maximal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{nodes_in_cube, Cube, TensorField};
use crate::par;
use crate::rotgeo::g_value;

pub use maximal::{maximal_function, MaximalMode};

/// Result of the Luxemburg-norm bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    /// Modular of `f / value` (1 up to solver tolerance unless `value = 0`).
    pub modular_at_value: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

/// Magnitudes, exponents and quadrature weights of one integrand.
#[derive(Clone, Debug)]
pub struct Integrand<'a> {
    pub magnitudes: &'a [f64],
    pub exponents: &'a [f64],
    pub weights: &'a [f64],
}

impl Integrand<'_> {
    fn check(&self) -> Result<()> {
        for (i, (m, w)) in self.magnitudes.iter().zip(self.weights).enumerate() {
            if *w != 0.0 && !m.is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(())
    }

    /// `Σ w |f|^p`.
    pub fn modular(&self) -> f64 {
        self.scaled_modular(1.0)
    }

    /// `Σ w |f/λ|^p`.
    pub fn scaled_modular(&self, lambda: f64) -> f64 {
        let ln_l = lambda.ln();
        par::sum_range(self.magnitudes.len(), |i| {
            let w = self.weights[i];
            let m = self.magnitudes[i];
            if w == 0.0 || m == 0.0 {
                0.0
            } else {
                w * (self.exponents[i] * (m.ln() - ln_l)).exp()
            }
        })
    }

    fn p_minus(&self) -> f64 {
        self.exponents
            .iter()
            .zip(self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(p, _)| *p)
            .fold(f64::INFINITY, f64::min)
    }

    /// Luxemburg norm by bisection on `λ ↦ modular(f/λ)`.
    pub fn norm(&self) -> Result<NormResult> {
        self.check()?;
        let sup = self
            .magnitudes
            .iter()
            .zip(self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(m, _)| *m)
            .fold(0.0, f64::max);
        if sup == 0.0 {
            return Ok(NormResult {
                value: 0.0,
                modular_at_value: 0.0,
                iterations: 0,
                bracket: (0.0, 0.0),
            });
        }
        let measure: f64 = self.weights.iter().sum();
        let pm = self.p_minus();
        let mut lo = sup * measure.min(1.0).powf(1.0 / pm) / 2.0;
        let mut hi = sup * measure.max(1.0).powf(1.0 / pm) * 2.0;
        let mut iterations = 0;
        while self.scaled_modular(lo) < 1.0 {
            lo *= 0.5;
            iterations += 1;
        }
        while self.scaled_modular(hi) > 1.0 {
            hi *= 2.0;
            iterations += 1;
        }
        let bracket = (lo, hi);
        let mut mid = 0.5 * (lo + hi);
        let mut m = self.scaled_modular(mid);
        while (m - 1.0).abs() > 1e-13 && hi - lo > 4.0 * f64::EPSILON * hi {
            if m > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            mid = 0.5 * (lo + hi);
            m = self.scaled_modular(mid);
            iterations += 1;
        }
        Ok(NormResult {
            value: mid,
            modular_at_value: m,
            iterations,
            bracket,
        })
    }
}

fn check_pair(f: &TensorField, p: &ExponentField) -> Result<()> {
    if !f.domain().same_grid(p.domain()) {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

/// `∫ |f|^{p(x)} dx` under the domain quadrature.
pub fn modular(f: &TensorField, p: &ExponentField) -> Result<f64> {
    modular_weighted(f, p, f.domain().weights())
}

/// Modular with explicit quadrature weights (e.g. restricted to a subset).
pub fn modular_weighted(f: &TensorField, p: &ExponentField, weights: &[f64]) -> Result<f64> {
    check_pair(f, p)?;
    let mags = f.magnitudes();
    let it = Integrand {
        magnitudes: &mags,
        exponents: p.values(),
        weights,
    };
    it.check()?;
    Ok(it.modular())
}

/// Luxemburg norm `inf{λ > 0 : modular(f/λ) ≤ 1}`.
pub fn luxemburg_norm(f: &TensorField, p: &ExponentField) -> Result<NormResult> {
    luxemburg_norm_weighted(f, p, f.domain().weights())
}

pub fn luxemburg_norm_weighted(f: &TensorField, p: &ExponentField, weights: &[f64]) -> Result<NormResult> {
    check_pair(f, p)?;
    let mags = f.magnitudes();
    Integrand {
        magnitudes: &mags,
        exponents: p.values(),
        weights,
    }
    .norm()
}

/// Norm value only.
pub fn norm(f: &TensorField, p: &ExponentField) -> Result<f64> {
    Ok(luxemburg_norm(f, p)?.value)
}

/// Returns `(‖f g‖_{s}, 2 ‖f‖_{p} ‖g‖_{q})` for `1/s = 1/p + 1/q`.
pub fn holder_product_check(
    f: &TensorField,
    g: &TensorField,
    p: &ExponentField,
    q: &ExponentField,
    s: &ExponentField,
) -> Result<(f64, f64)> {
    check_pair(f, p)?;
    check_pair(g, q)?;
    check_pair(f, s)?;
    let d = f.domain();
    for i in 0..d.len() {
        if !d.is_active(i) {
            continue;
        }
        let defect = (1.0 / s.value(i) - 1.0 / p.value(i) - 1.0 / q.value(i)).abs();
        if defect > 1e-9 {
            return Err(Error::ExponentRange(format!(
                "1/s != 1/p + 1/q at node {i} (defect {defect:e})"
            )));
        }
    }
    let prod: Vec<f64> = f.magnitudes().iter().zip(g.magnitudes()).map(|(a, b)| a * b).collect();
    let lhs = Integrand {
        magnitudes: &prod,
        exponents: s.values(),
        weights: d.weights(),
    }
    .norm()?
    .value;
    let rhs = 2.0 * norm(f, p)? * norm(g, q)?;
    Ok((lhs, rhs))
}

/// Outcome of the localization comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// `‖Σ χ_Q f‖`.
    pub direct: f64,
    /// `‖Σ χ_Q ‖χ_Q f‖ / ‖χ_Q‖‖`.
    pub middle: f64,
    pub ratio_middle_over_direct: f64,
    pub ratio_direct_over_middle: f64,
    pub cubes: usize,
}

/// Compares `‖Σ χ_Q f‖` with the cube-averaged norm field (constant 1 on both sides).
pub fn localization_check(f: &TensorField, p: &ExponentField, cubes: &[Cube]) -> Result<LocalizationReport> {
    check_pair(f, p)?;
    let d = f.domain();
    let mags = f.magnitudes();
    let memberships: Vec<Vec<usize>> = par::map_slice(cubes, |q| {
        nodes_in_cube(d, q, 1.0).into_iter().filter(|&i| d.is_active(i)).collect()
    });
    let cube_ratios: Vec<Result<f64>> = par::map_slice(&memberships, |nodes| {
        let m: Vec<f64> = nodes.iter().map(|&i| mags[i]).collect();
        let e: Vec<f64> = nodes.iter().map(|&i| p.value(i)).collect();
        let w: Vec<f64> = nodes.iter().map(|&i| d.weights()[i]).collect();
        let ones = vec![1.0; nodes.len()];
        let num = Integrand {
            magnitudes: &m,
            exponents: &e,
            weights: &w,
        }
        .norm()?
        .value;
        let den = Integrand {
            magnitudes: &ones,
            exponents: &e,
            weights: &w,
        }
        .norm()?
        .value;
        Ok(if den > 0.0 { num / den } else { 0.0 })
    });
    let mut summed = vec![0.0; d.len()];
    let mut middle_field = vec![0.0; d.len()];
    for (nodes, r) in memberships.iter().zip(cube_ratios) {
        let r = r?;
        for &i in nodes {
            summed[i] += mags[i];
            middle_field[i] += r;
        }
    }
    let direct = Integrand {
        magnitudes: &summed,
        exponents: p.values(),
        weights: d.weights(),
    }
    .norm()?
    .value;
    let middle = Integrand {
        magnitudes: &middle_field,
        exponents: p.values(),
        weights: d.weights(),
    }
    .norm()?
    .value;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else if a > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(LocalizationReport {
        direct,
        middle,
        ratio_middle_over_direct: ratio(middle, direct),
        ratio_direct_over_middle: ratio(direct, middle),
        cubes: cubes.len(),
    })
}

/// `tail(M) = ∫_{|f| > M} |f|^{p(x)}` for each threshold.
pub fn equi_integrability_profile(
    f: &TensorField,
    p: &ExponentField,
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_pair(f, p)?;
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("thresholds must be increasing".into()));
    }
    let mags = f.magnitudes();
    tail_profile(&mags, p.values(), f.domain().weights(), thresholds)
}

pub(crate) fn tail_profile(
    mags: &[f64],
    exponents: &[f64],
    weights: &[f64],
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let it = Integrand {
        magnitudes: mags,
        exponents,
        weights,
    };
    it.check()?;
    Ok(thresholds
        .iter()
        .map(|&m| {
            let tail = par::sum_range(mags.len(), |i| {
                let w = weights[i];
                if w == 0.0 || mags[i] <= m {
                    0.0
                } else {
                    w * mags[i].powf(exponents[i])
                }
            });
            (m, tail)
        })
        .collect())
}

/// `∫ g(p(x), |f(x)|) dx`; requires `1 ≤ p ≤ 2` on active nodes.
pub fn g_modular(f: &TensorField, p: &ExponentField) -> Result<f64> {
    check_pair(f, p)?;
    if p.p_minus() < 1.0 || p.p_plus() > 2.0 {
        return Err(Error::ExponentRange(format!(
            "g-modular needs 1 <= p <= 2, got [{}, {}]",
            p.p_minus(),
            p.p_plus()
        )));
    }
    let mags = f.magnitudes();
    let w = f.domain().weights();
    for (i, m) in mags.iter().enumerate() {
        if w[i] != 0.0 && !m.is_finite() {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(par::sum_range(mags.len(), |i| {
        if w[i] == 0.0 {
            0.0
        } else {
            w[i] * g_value(p.value(i), mags[i])
        }
    }))
}
