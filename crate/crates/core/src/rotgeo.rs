//! Pointwise matrix geometry around the well SO(n).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Nearest rotation together with a uniqueness flag.
#[derive(Clone, Debug, PartialEq)]
pub struct NearestRotation {
    pub rotation: DMatrix<f64>,
    /// False when the minimizer is not unique; `rotation` is then one
    /// deterministic choice.
    pub unique: bool,
}

const DEGENERACY_TOL: f64 = 1e-12;

/// Invariants of a row-major 2×2 matrix: `Q = |(a+d, c−b)|/2`,
/// `R = |(a−d, b+c)|/2`, so the singular values are `Q ± R` and `det = Q² − R²`.
fn planar_invariants_raw(a: [f64; 4]) -> (f64, f64, f64, f64) {
    let e = 0.5 * (a[0] + a[3]);
    let h = 0.5 * (a[2] - a[1]);
    let f = 0.5 * (a[0] - a[3]);
    let g = 0.5 * (a[2] + a[1]);
    (e.hypot(h), f.hypot(g), e, h)
}

fn planar_invariants(a: &DMatrix<f64>) -> (f64, f64, f64, f64) {
    planar_invariants_raw([a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]])
}

/// Distance to SO(2) and a nearest rotation (row-major) without allocation.
pub(crate) fn planar_dist_rotation(a: [f64; 4]) -> (f64, [f64; 4]) {
    let (q, r, e, h) = planar_invariants_raw(a);
    let dist = (2.0 * ((q - 1.0).powi(2) + r * r)).sqrt();
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if q <= DEGENERACY_TOL * scale {
        return (dist, [1.0, 0.0, 0.0, 1.0]);
    }
    let (c, s) = (e / q, h / q);
    (dist, [c, -s, s, c])
}

struct SortedSvd {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v_t: DMatrix<f64>,
}

fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let n = a.nrows();
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut su = DMatrix::zeros(n, n);
    let mut sv = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        su.set_column(k, &u.column(i));
        sv.set_row(k, &v_t.row(i));
        sigma.push(svd.singular_values[i]);
    }
    SortedSvd { u: su, sigma, v_t: sv }
}

/// Euclidean (Frobenius) distance from `a` to SO(n).
pub fn dist_so(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 2 {
        let (q, r, _, _) = planar_invariants(a);
        return (2.0 * ((q - 1.0).powi(2) + r * r)).sqrt();
    }
    let svd = sorted_svd(a);
    let det = a.determinant();
    let mut s: f64 = svd.sigma.iter().map(|x| (x - 1.0).powi(2)).sum();
    if det < 0.0 {
        let last = svd.sigma[n - 1];
        s += (last + 1.0).powi(2) - (last - 1.0).powi(2);
    }
    s.max(0.0).sqrt()
}

/// Nearest rotation `U diag(1, …, det(UVᵀ)) Vᵀ` from the SVD `A = UΣVᵀ`.
pub fn nearest_rotation(a: &DMatrix<f64>) -> NearestRotation {
    let n = a.nrows();
    if n == 2 {
        let (q, _, e, h) = planar_invariants(a);
        let scale = a.abs().max().max(1.0);
        if q <= DEGENERACY_TOL * scale {
            return NearestRotation {
                rotation: DMatrix::identity(2, 2),
                unique: false,
            };
        }
        let (c, s) = (e / q, h / q);
        return NearestRotation {
            rotation: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
            unique: true,
        };
    }
    let svd = sorted_svd(a);
    let flip = (&svd.u * &svd.v_t).determinant() < 0.0;
    let mut d = DMatrix::identity(n, n);
    if flip {
        d[(n - 1, n - 1)] = -1.0;
    }
    let scale = svd.sigma[0].max(1.0);
    let unique = if a.determinant() < 0.0 {
        svd.sigma[n - 2] - svd.sigma[n - 1] > DEGENERACY_TOL * scale
    } else {
        svd.sigma[n - 2] + svd.sigma[n - 1] > DEGENERACY_TOL * scale
    };
    NearestRotation {
        rotation: &svd.u * d * &svd.v_t,
        unique,
    }
}

/// The growth function `g(q, t)`: `t²/2` for `t ≤ 1`, `t^q/q + ½ − 1/q` beyond.
pub fn g_eval(q: f64, t: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&q) {
        return Err(Error::ExponentRange(format!("g needs q in [1,2], got {q}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("g needs t >= 0, got {t}")));
    }
    Ok(g_value(q, t))
}

/// Unchecked [`g_eval`].
#[inline]
pub fn g_value(q: f64, t: f64) -> f64 {
    if t <= 1.0 {
        0.5 * t * t
    } else {
        t.powf(q) / q + 0.5 - 1.0 / q
    }
}

/// `∂g/∂t`: `t` for `t ≤ 1`, `t^{q−1}` beyond.
#[inline]
pub fn g_derivative(q: f64, t: f64) -> f64 {
    if t <= 1.0 {
        t
    } else {
        t.powf(q - 1.0)
    }
}

/// `(A_sym, A_skew)` with `A_sym + A_skew = A`.
pub fn sym_skew_split(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let skew = (a - a.transpose()) * 0.5;
    (sym, skew)
}

/// Cofactor matrix, `A (cof A)ᵀ = det(A) I`.
pub fn cofactor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    match n {
        1 => DMatrix::from_element(1, 1, 1.0),
        2 => DMatrix::from_row_slice(2, 2, &[a[(1, 1)], -a[(1, 0)], -a[(0, 1)], a[(0, 0)]]),
        _ => DMatrix::from_fn(n, n, |i, j| {
            let minor = a.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * minor.determinant()
        }),
    }
}

/// `|dist(A, SO(n)) − |A_sym − I|| / |A − I|²`; rejected when `|A − I| < 1e−8`.
pub fn taylor_defect(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let dev = (a - &id).norm();
    if dev < 1e-8 {
        return Err(Error::InvalidParameter(format!("|A - I| = {dev:e} too small")));
    }
    let (sym, _) = sym_skew_split(a);
    Ok((dist_so(a) - (sym - id).norm()).abs() / (dev * dev))
}

/// Rotation by angle `theta` in the plane.
pub fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `R ∈ SO(3)` from an axis-angle vector (Rodrigues).
pub fn rotation_3d(axis_angle: [f64; 3]) -> DMatrix<f64> {
    let k = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            -axis_angle[2],
            axis_angle[1],
            axis_angle[2],
            0.0,
            -axis_angle[0],
            -axis_angle[1],
            axis_angle[0],
            0.0,
        ],
    );
    k.exp()
}
