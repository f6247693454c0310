//! Reflection-type extension across an affine graph.

use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{make_domain_aligned, sym_gradient, GridDomain, Point, Shape, TensorField};
use crate::par;
use crate::varnorm::{luxemburg_norm_weighted, modular_weighted};

/// Kernel `ψ(λ) = 28 − 18λ` on `[1, 2]`.
pub const KERNEL_NAME: &str = "affine psi(l) = 28 - 18 l on [1, 2]";

/// Constant with `δ(x) ≤ c₁ (x_n − φ(x′))` for `δ = 2(x_n − φ)`.
const C1: f64 = 2.0;

const QUADRATURE_NODES: usize = 17;

fn psi(lambda: f64) -> f64 {
    28.0 - 18.0 * lambda
}

/// Closed-form `(∫ψ, ∫λψ, ∫λ²ψ)` over `[1, 2]`.
pub fn kernel_moments() -> (f64, f64, f64) {
    let prim = |k: i32, l: f64| 28.0 * l.powi(k + 1) / (k + 1) as f64 - 18.0 * l.powi(k + 2) / (k + 2) as f64;
    let m = |k: i32| prim(k, 2.0) - prim(k, 1.0);
    (m(0), m(1), m(2))
}

/// `φ(x′) = slope · x′ + intercept`; the domain lies below the graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineGraph {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffineGraph {
    pub fn eval(&self, x_prime: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(x_prime).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn lipschitz(&self) -> f64 {
        self.slope.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Graph bounding a graph-halfspace shape.
    pub fn from_shape(shape: &Shape) -> Result<Self> {
        match shape {
            Shape::GraphHalfspace { slope, intercept, .. } => Ok(Self {
                slope: vec![*slope],
                intercept: *intercept,
            }),
            _ => Err(Error::Unsupported("extension needs a graph-halfspace domain".into())),
        }
    }

    /// `∇δ` for `δ = 2(x_n − φ(x′))`.
    fn delta_gradient(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.slope.iter().map(|a| -2.0 * a).collect();
        d.push(2.0);
        d
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NitscheReport {
    pub kernel: String,
    pub moments: [f64; 3],
    pub outer_radius: f64,
    pub radius: f64,
    pub lipschitz: f64,
    pub below_nodes: usize,
    pub above_nodes: usize,
    /// Above-graph nodes whose difference stencil stays above the graph.
    pub checked_nodes: usize,
    /// `‖eũ − f̃ − g̃‖_∞` over the checked nodes.
    pub residual: f64,
    /// `∫_{B_r∖Ω} |f̃/‖f‖|^{p̃}`.
    pub modular_bound: f64,
    /// `p⁻ ≤ p̃ ≤ p⁺`, `q⁻ ≤ q̃ ≤ q⁺` and `p̃ ≤ q̃` at every node.
    pub exponent_bounds_hold: bool,
}

#[derive(Clone, Debug)]
pub struct NitscheResult {
    pub u_ext: TensorField,
    pub f_ext: TensorField,
    pub g_ext: TensorField,
    pub p_ext: ExponentField,
    pub q_ext: ExponentField,
    pub radius: f64,
    /// Input node copied to each below-graph node.
    pub source: Vec<Option<usize>>,
    pub report: NitscheReport,
}

struct NodeOut {
    u: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    p: f64,
    q: f64,
    source: Option<usize>,
}

struct Inputs<'a> {
    din: &'a GridDomain,
    u: &'a TensorField,
    f: &'a TensorField,
    g: &'a TensorField,
    p: &'a ExponentField,
    q: &'a ExponentField,
}

fn reflect_matrix(m: &[f64], n: usize, lambda: f64, d: &[f64], acc: &mut [f64], weight: f64) {
    let mnn = m[n * n - 1];
    for i in 0..n {
        for j in 0..n {
            let col_i = m[i * n + n - 1];
            let col_j = m[j * n + n - 1];
            acc[i * n + j] += weight
                * (m[i * n + j] + lambda * lambda * mnn * d[i] * d[j] - lambda * (col_i * d[j] + d[i] * col_j));
        }
    }
}

/// Extends `u`, `f`, `g`, `p`, `q` from `B_R(x₀) ∩ Ω` to `B_r(x₀)`,
/// `x₀ = (anchor, φ(anchor))`, `r = 0.9 R / (2c₁(1 + L))`.
///
/// Above the graph, with `δ = 2(x_n − φ)`, `d = ∇δ` and `y_λ = x − λδ e_n`:
/// `ũ = ∫ψ(λ)[u(y_λ) − λ d u_n(y_λ)]`,
/// `f̃ = ∫ψ[f + λ² f_nn d⊗d](y_λ) − ∫λψ[f e_n⊗d + d⊗f e_n](y_λ)`,
/// `p̃ = min_λ p(y_λ)` over the quadrature nodes. Below the graph every
/// field is copied node by node.
#[allow(clippy::too_many_arguments)]
pub fn nitsche_extend(
    u: &TensorField,
    f: &TensorField,
    g: &TensorField,
    p: &ExponentField,
    q: &ExponentField,
    graph: &AffineGraph,
    anchor: &[f64],
    outer_radius: f64,
) -> Result<NitscheResult> {
    let din = Arc::clone(u.domain());
    let n = din.dim();
    for other in [f.domain(), g.domain(), p.domain(), q.domain()] {
        if !din.same_grid(other) {
            return Err(Error::DomainMismatch);
        }
    }
    if u.rank() != 1 || f.rank() != 2 || g.rank() != 2 {
        return Err(Error::RankMismatch {
            expected: 2,
            found: f.rank(),
        });
    }
    if graph.slope.len() + 1 != n || anchor.len() + 1 != n {
        return Err(Error::InvalidParameter("graph and anchor need n - 1 coordinates".into()));
    }
    if !(outer_radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {outer_radius}")));
    }
    let lip = graph.lipschitz();
    let r = 0.9 * outer_radius / (2.0 * C1 * (1.0 + lip));
    let mut x0 = anchor.to_vec();
    x0.push(graph.eval(anchor));
    let disk = make_domain_aligned(
        Shape::Disk {
            center: x0.clone(),
            radius: r,
        },
        &din,
    )?;
    let offset = disk.lattice_offset(&din).ok_or(Error::DomainMismatch)?;
    let dgrad = graph.delta_gradient();
    let rule = GaussLegendre::new(QUADRATURE_NODES.try_into().expect("nonzero"));
    let quad: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (1.5 + 0.5 * x, 0.5 * w))
        .collect();
    let inputs = Inputs {
        din: &din,
        u,
        f,
        g,
        p,
        q,
    };
    let height = |x: &Point| x[n - 1] - graph.eval(&x[..n - 1]);

    let outs = par::map_range(disk.len(), |i| -> Result<Option<NodeOut>> {
        if !disk.is_active(i) {
            return Ok(None);
        }
        let x = disk.position(i);
        let t = height(&x);
        let src = disk.map_node(i, offset, &din).filter(|&j| din.is_active(j));
        if t < 0.0 || (t == 0.0 && src.is_some()) {
            let j = src.ok_or_else(|| Error::OutsideDomain(format!("{:?}", &x[..n])))?;
            return Ok(Some(NodeOut {
                u: u.node(j).to_vec(),
                f: f.node(j).to_vec(),
                g: g.node(j).to_vec(),
                p: p.value(j),
                q: q.value(j),
                source: Some(j),
            }));
        }
        extend_node(&inputs, &x, 2.0 * t, &dgrad, &quad, &x0, outer_radius).map(Some)
    });

    let mut u_ext = TensorField::zeros(&disk, 1);
    let mut f_ext = TensorField::zeros(&disk, 2);
    let mut g_ext = TensorField::zeros(&disk, 2);
    let mut pv = vec![0.0; disk.len()];
    let mut qv = vec![0.0; disk.len()];
    let mut source = vec![None; disk.len()];
    for (i, o) in outs.into_iter().enumerate() {
        if let Some(o) = o? {
            u_ext.node_mut(i).copy_from_slice(&o.u);
            f_ext.node_mut(i).copy_from_slice(&o.f);
            g_ext.node_mut(i).copy_from_slice(&o.g);
            pv[i] = o.p;
            qv[i] = o.q;
            source[i] = o.source;
        }
    }
    let p_ext = ExponentField::from_values(&disk, pv)?;
    let q_ext = ExponentField::from_values(&disk, qv)?;

    let above: Vec<bool> = (0..disk.len())
        .map(|i| disk.is_active(i) && source[i].is_none())
        .collect();
    let strictly_above = |j: usize| disk.is_active(j) && height(&disk.position(j)) > 0.0;
    let checked: Vec<bool> = (0..disk.len())
        .map(|i| {
            disk.is_inside(i)
                && strictly_above(i)
                && (0..n).all(|k| {
                    [-1isize, 1]
                        .iter()
                        .all(|&s| disk.neighbor(i, k, s).is_some_and(strictly_above))
                })
        })
        .collect();
    let eu = sym_gradient(&u_ext)?;
    let residual = eu.sub(&f_ext.add(&g_ext)?)?.sup_norm_on(&checked);

    let in_ball: Vec<f64> = (0..din.len())
        .map(|j| {
            let y = din.position(j);
            let dist2: f64 = (0..n).map(|k| (y[k] - x0[k]).powi(2)).sum();
            if dist2 < outer_radius * outer_radius {
                din.weights()[j]
            } else {
                0.0
            }
        })
        .collect();
    let nf = luxemburg_norm_weighted(f, p, &in_ball)?.value;
    let above_weights: Vec<f64> = (0..disk.len())
        .map(|i| if above[i] { disk.weights()[i] } else { 0.0 })
        .collect();
    let modular_bound = if nf > 0.0 {
        modular_weighted(&f_ext.scale(1.0 / nf), &p_ext, &above_weights)?
    } else {
        0.0
    };
    let active_in: Vec<usize> = (0..din.len()).filter(|&j| in_ball[j] > 0.0).collect();
    let range = |e: &ExponentField| {
        active_in.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &j| {
            (lo.min(e.value(j)), hi.max(e.value(j)))
        })
    };
    let (p_lo, p_hi) = range(p);
    let (q_lo, q_hi) = range(q);
    let tol = 1e-12;
    let exponent_bounds_hold = (0..disk.len()).filter(|&i| disk.is_active(i)).all(|i| {
        let (a, b) = (p_ext.value(i), q_ext.value(i));
        a >= p_lo - tol && a <= p_hi + tol && b >= q_lo - tol && b <= q_hi + tol && a <= b + tol
    });
    let (m0, m1, m2) = kernel_moments();
    let report = NitscheReport {
        kernel: KERNEL_NAME.to_string(),
        moments: [m0, m1, m2],
        outer_radius,
        radius: r,
        lipschitz: lip,
        below_nodes: source.iter().filter(|s| s.is_some()).count(),
        above_nodes: above.iter().filter(|a| **a).count(),
        checked_nodes: checked.iter().filter(|c| **c).count(),
        residual,
        modular_bound,
        exponent_bounds_hold,
    };
    Ok(NitscheResult {
        u_ext,
        f_ext,
        g_ext,
        p_ext,
        q_ext,
        radius: r,
        source,
        report,
    })
}

fn extend_node(
    inp: &Inputs<'_>,
    x: &Point,
    delta: f64,
    d: &[f64],
    quad: &[(f64, f64)],
    x0: &[f64],
    outer_radius: f64,
) -> Result<NodeOut> {
    let n = inp.din.dim();
    let nn = n * n;
    let mut out = NodeOut {
        u: vec![0.0; n],
        f: vec![0.0; nn],
        g: vec![0.0; nn],
        p: f64::INFINITY,
        q: f64::INFINITY,
        source: None,
    };
    let mut uy = vec![0.0; n];
    let mut fy = vec![0.0; nn];
    let mut gy = vec![0.0; nn];
    let mut s = [0.0];
    for &(lambda, w) in quad {
        let mut y = *x;
        y[n - 1] -= lambda * delta;
        let dist2: f64 = (0..n).map(|k| (y[k] - x0[k]).powi(2)).sum();
        if dist2 >= outer_radius * outer_radius {
            return Err(Error::OutsideDomain(format!(
                "reflected point {:?} leaves the outer ball",
                &y[..n]
            )));
        }
        inp.din.interpolate_active(inp.u.values(), n, &y, &mut uy)?;
        inp.din.interpolate_active(inp.f.values(), nn, &y, &mut fy)?;
        inp.din.interpolate_active(inp.g.values(), nn, &y, &mut gy)?;
        let wp = w * psi(lambda);
        for k in 0..n {
            out.u[k] += wp * (uy[k] - lambda * d[k] * uy[n - 1]);
        }
        reflect_matrix(&fy, n, lambda, d, &mut out.f, wp);
        reflect_matrix(&gy, n, lambda, d, &mut out.g, wp);
        inp.din.interpolate_active(inp.p.values(), 1, &y, &mut s)?;
        out.p = out.p.min(s[0]);
        inp.din.interpolate_active(inp.q.values(), 1, &y, &mut s)?;
        out.q = out.q.min(s[0]);
    }
    Ok(out)
}

/// `A_sym + c₂ A_nn d⊗d`, the extension of a constant matrix `A` with
/// `c₂ = ∫λ²ψ`.
pub fn affine_extension(a: &DMatrix<f64>, graph: &AffineGraph) -> DMatrix<f64> {
    let n = a.nrows();
    let d = graph.delta_gradient();
    let (_, _, c2) = kernel_moments();
    let sym = (a + a.transpose()) * 0.5;
    DMatrix::from_fn(n, n, |i, j| sym[(i, j)] + c2 * sym[(n - 1, n - 1)] * d[i] * d[j])
}
