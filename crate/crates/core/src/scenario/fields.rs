//! Seeded input fields for the scenarios.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::config::BoundaryData;
use crate::error::Result;
use crate::grid::{gradient, GridDomain, Point, TensorField};
use crate::rigidity::dist_field;
use crate::rng::SeededRng;
use crate::rotgeo::{rotation_2d, rotation_3d};

fn center(d: &GridDomain) -> Point {
    let (lo, hi) = d.shape().bounds();
    [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])]
}

/// Smooth trigonometric perturbation with random phases and frequencies.
struct Wiggle {
    freq: [[f64; 3]; 3],
    phase: [f64; 3],
}

impl Wiggle {
    fn new(rng: &mut SeededRng) -> Self {
        let mut freq = [[0.0; 3]; 3];
        let mut phase = [0.0; 3];
        for i in 0..3 {
            for f in freq[i].iter_mut() {
                *f = rng.range(0.5, 2.0);
            }
            phase[i] = rng.range(0.0, std::f64::consts::TAU);
        }
        Self { freq, phase }
    }

    fn eval(&self, x: &Point) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let f = &self.freq[i];
            *o = (f[0] * x[(i + 1) % 3] + self.phase[i]).sin() + 0.3 * (f[1] * x[i] * x[(i + 2) % 3]).cos()
                - 0.2 * (f[2] * x[i]).sin();
        }
        out
    }
}

fn random_rotation(dim: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    if dim == 2 {
        rotation_2d(rng.range(-std::f64::consts::PI, std::f64::consts::PI))
    } else {
        rotation_3d([rng.normal(), rng.normal(), rng.normal()])
    }
}

fn apply(a: &DMatrix<f64>, x: &Point) -> [f64; 3] {
    let mut out = [0.0; 3];
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            out[r] += a[(r, c)] * x[c];
        }
    }
    out
}

/// `scale · (a₀ + a₁ sin(3x₁ + a₂) + a₃ cos(5x₁x₂) + a₄x₂ + a₅x₁²)` with
/// normal coefficients and a uniform `scale ∈ [0, amplitude)`.
pub fn scalar_field(d: &Arc<GridDomain>, rng: &mut SeededRng, amplitude: f64) -> TensorField {
    let a: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
    let scale = amplitude * rng.uniform();
    TensorField::scalar_fn(d, move |x| {
        scale * (a[0] + a[1] * (3.0 * x[0] + a[2]).sin() + a[3] * (5.0 * x[1] * x[0]).cos() + a[4] * x[1] + a[5] * x[0] * x[0])
    })
}

/// `R x + eps · w(x)` with a random rotation `R` and wiggle `w`.
pub fn perturbed_rotation(d: &Arc<GridDomain>, rng: &mut SeededRng, eps: f64) -> TensorField {
    let r = random_rotation(d.dim(), rng);
    let w = Wiggle::new(rng);
    TensorField::vector_fn(d, move |x| {
        let rx = apply(&r, x);
        let wx = w.eval(x);
        [rx[0] + eps * wx[0], rx[1] + eps * wx[1], rx[2] + eps * wx[2]]
    })
}

/// `S x + eps · w(x)` with a random skew `S`.
pub fn perturbed_skew(d: &Arc<GridDomain>, rng: &mut SeededRng, eps: f64) -> TensorField {
    let n = d.dim();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.normal();
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    let w = Wiggle::new(rng);
    TensorField::vector_fn(d, move |x| {
        let sx = apply(&s, x);
        let wx = w.eval(x);
        [sx[0] + eps * wx[0], sx[1] + eps * wx[1], sx[2] + eps * wx[2]]
    })
}

/// `amplitude · w(x)` plus a small random affine part.
pub fn smooth_vector_field(d: &Arc<GridDomain>, rng: &mut SeededRng, amplitude: f64) -> TensorField {
    let n = d.dim();
    let a = DMatrix::from_fn(n, n, |_, _| 0.5 * rng.normal());
    let w = Wiggle::new(rng);
    TensorField::vector_fn(d, move |x| {
        let ax = apply(&a, x);
        let wx = w.eval(x);
        [ax[0] + amplitude * wx[0], ax[1] + amplitude * wx[1], ax[2] + amplitude * wx[2]]
    })
}

/// Smooth field plus a narrow Gaussian spike at a random interior point.
pub fn spiked_field(d: &Arc<GridDomain>, rng: &mut SeededRng, amplitude: f64) -> TensorField {
    let base = smooth_vector_field(d, rng, amplitude);
    let (lo, hi) = d.shape().bounds();
    let mut c = [0.0; 3];
    for k in 0..d.dim() {
        c[k] = rng.range(lo[k] + 0.3 * (hi[k] - lo[k]), hi[k] - 0.3 * (hi[k] - lo[k]));
    }
    let width = 3.0 * d.spacing();
    let height = 20.0 * amplitude * width;
    let spike = TensorField::vector_fn(d, move |x| {
        let r2: f64 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum();
        let v = height * (-r2 / (width * width)).exp();
        [v, -v, v]
    });
    base.add(&spike).expect("same grid")
}

/// `f = eu` on `{x₁ < c₁}` and `g = eu` elsewhere, `c` the box center.
pub fn indicator_split(eu: &TensorField) -> (TensorField, TensorField) {
    let d = eu.domain();
    let c = center(d);
    let a: Vec<bool> = (0..d.len()).map(|i| d.position(i)[0] < c[0]).collect();
    let not_a: Vec<bool> = a.iter().map(|b| !b).collect();
    (eu.masked(&a), eu.masked(&not_a))
}

/// `dist(∇u, SO(n))` split along the last axis at the box center.
pub fn dist_split(u: &TensorField) -> Result<(TensorField, TensorField)> {
    let dist = dist_field(&gradient(u)?);
    let d = u.domain();
    let c = center(d);
    let last = d.dim() - 1;
    let a: Vec<bool> = (0..d.len()).map(|i| d.position(i)[last] > c[last]).collect();
    let not_a: Vec<bool> = a.iter().map(|b| !b).collect();
    Ok((dist.masked(&a), dist.masked(&not_a)))
}

/// Dirichlet data of the limit experiment.
pub fn energy_boundary(d: &Arc<GridDomain>, kind: BoundaryData, bump: f64) -> TensorField {
    match kind {
        BoundaryData::Zero => TensorField::zeros(d, 1),
        BoundaryData::Skew => TensorField::vector_fn(d, |x| [0.3 * x[1], -0.3 * x[0], 0.0]),
        BoundaryData::Generic => {
            let (lo, hi) = d.shape().bounds();
            let c = [lo[0], lo[1] + 0.25 * (hi[1] - lo[1])];
            TensorField::vector_fn(d, move |x| {
                let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                let b = bump * (-r2 / 0.01).exp();
                [0.1 * x[1] + b, 0.1 * x[0] + b, 0.0]
            })
        }
    }
}
