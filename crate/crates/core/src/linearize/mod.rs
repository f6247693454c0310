//! Nonlinear and linearized elastic energies on Kuhn simplices, their
//! minimizers, and the small-strain limit experiment.

mod experiment;
mod mesh;
mod optimize;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{GridDomain, TensorField};
use crate::par;
use crate::rotgeo::{dist_so, g_derivative, g_value, nearest_rotation, planar_dist_rotation};
use crate::varnorm::Integrand;

pub use experiment::{
    gamma_convergence_experiment, ConvergenceRow, ConvergenceTable, RowDiagnostics, CSV_HEADER, TAIL_THRESHOLDS,
};
pub use optimize::{MinimizeOptions, MinimizeStatus};

use mesh::Mesh;
use optimize::{conjugate_gradient, lbfgs};

/// Stored-energy density `W(x, F)` as a function of `d = dist(F, SO(n))`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Density {
    /// `W = g(p(x), d)`.
    #[default]
    GDist,
    /// `W = d²/2`.
    QuadraticWell,
}

impl Density {
    #[inline]
    fn of_distance(self, p: f64, d: f64) -> f64 {
        match self {
            Density::GDist => g_value(p, d),
            Density::QuadraticWell => 0.5 * d * d,
        }
    }

    /// `W'(d)/d`, finite at `d = 0`.
    #[inline]
    fn slope_ratio(self, p: f64, d: f64) -> f64 {
        match self {
            Density::GDist if d > 1.0 => g_derivative(p, d) / d,
            _ => 1.0,
        }
    }

    /// `W(x, F)` at exponent `p`.
    pub fn evaluate(self, p: f64, f: &DMatrix<f64>) -> f64 {
        self.of_distance(p, dist_so(f))
    }
}

/// Admissible data of the elastic problem.
#[derive(Clone, Debug)]
pub struct EnergySpec {
    domain: Arc<GridDomain>,
    p: ExponentField,
    boundary: TensorField,
    density: Density,
    epsilons: Vec<f64>,
    mesh: Arc<Mesh>,
    free: Vec<bool>,
}

/// Largest admissible Dirichlet mismatch.
pub const BC_TOLERANCE: f64 = 1e-10;

impl EnergySpec {
    /// `boundary` supplies the Dirichlet values on the domain's Dirichlet
    /// nodes and the starting guess elsewhere.
    pub fn new(p: ExponentField, boundary: TensorField, density: Density, epsilons: Vec<f64>) -> Result<Self> {
        let domain = Arc::clone(p.domain());
        if !domain.same_grid(boundary.domain()) {
            return Err(Error::DomainMismatch);
        }
        if boundary.rank() != 1 {
            return Err(Error::RankMismatch {
                expected: 1,
                found: boundary.rank(),
            });
        }
        if !(p.p_minus() > 1.0) || p.p_plus() > 2.0 {
            return Err(Error::ExponentRange(format!(
                "energies need 1 < p <= 2, got [{}, {}]",
                p.p_minus(),
                p.p_plus()
            )));
        }
        if epsilons.is_empty()
            || epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite())
            || epsilons.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidParameter(
                "epsilons must be a nonempty strictly decreasing list of positive numbers".into(),
            ));
        }
        let mesh = Mesh::build(&domain, &p)?;
        let free = (0..domain.len())
            .map(|i| domain.is_active(i) && mesh.used[i] && !domain.is_dirichlet(i))
            .collect();
        Ok(Self {
            domain,
            p,
            boundary,
            density,
            epsilons,
            mesh: Arc::new(mesh),
            free,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn p(&self) -> &ExponentField {
        &self.p
    }

    pub fn boundary(&self) -> &TensorField {
        &self.boundary
    }

    pub fn density(&self) -> Density {
        self.density
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    /// Nodes optimized over (active, in some simplex, not Dirichlet).
    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    /// Measure of the simplicial domain.
    pub fn measure(&self) -> f64 {
        self.mesh.measure()
    }

    /// `∫_{∂Ω_h} |h|` over the boundary faces of the meshed cells, each face
    /// weighted by the mean of `|h|` at its corners.
    pub fn boundary_integral(&self) -> f64 {
        let area = self.domain.spacing().powi(self.domain.dim() as i32 - 1);
        let mag = self.boundary.magnitudes();
        self.mesh
            .boundary_faces
            .iter()
            .map(|face| area * face.iter().map(|&i| mag[i]).sum::<f64>() / face.len() as f64)
            .sum()
    }

    fn check_admissible(&self, u: &TensorField) -> Result<()> {
        if !self.domain.same_grid(u.domain()) {
            return Err(Error::DomainMismatch);
        }
        if u.rank() != 1 {
            return Err(Error::RankMismatch {
                expected: 1,
                found: u.rank(),
            });
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.domain.len() {
            if self.domain.is_dirichlet(i) {
                for (a, b) in u.node(i).iter().zip(self.boundary.node(i)) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        if worst > BC_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet data violated by {worst:e}"
            )));
        }
        Ok(())
    }

    fn free_indices(&self) -> Vec<usize> {
        let n = self.domain.dim();
        (0..self.domain.len())
            .filter(|&i| self.free[i])
            .flat_map(|i| (0..n).map(move |k| i * n + k))
            .collect()
    }

    /// `u` with every Dirichlet node reset to the boundary data.
    pub fn project_admissible(&self, u: &TensorField) -> Result<TensorField> {
        if !self.domain.same_grid(u.domain()) {
            return Err(Error::DomainMismatch);
        }
        let mut out = u.clone();
        for i in 0..self.domain.len() {
            if self.domain.is_dirichlet(i) || !self.free[i] {
                out.node_mut(i).copy_from_slice(self.boundary.node(i));
            }
        }
        Ok(out)
    }
}

/// `(d, ∂d/∂F · W'(d)/d)` style evaluation: returns `W` and `∂W/∂F`.
fn density_and_derivative(density: Density, p: f64, f: &[f64; 9], n: usize) -> (f64, [f64; 9]) {
    let mut out = [0.0; 9];
    let (d, r) = if n == 2 {
        let (d, r) = planar_dist_rotation([f[0], f[1], f[2], f[3]]);
        let mut rr = [0.0; 9];
        rr[..4].copy_from_slice(&r);
        (d, rr)
    } else {
        let m = DMatrix::from_row_slice(n, n, &f[..n * n]);
        let r = nearest_rotation(&m).rotation;
        let mut rr = [0.0; 9];
        for a in 0..n {
            for b in 0..n {
                rr[a * n + b] = r[(a, b)];
            }
        }
        (dist_so(&m), rr)
    };
    let ratio = density.slope_ratio(p, d);
    for k in 0..n * n {
        out[k] = ratio * (f[k] - r[k]);
    }
    (density.of_distance(p, d), out)
}

fn distance_of(f: &[f64; 9], n: usize) -> f64 {
    if n == 2 {
        planar_dist_rotation([f[0], f[1], f[2], f[3]]).0
    } else {
        dist_so(&DMatrix::from_row_slice(n, n, &f[..n * n]))
    }
}

/// Per-simplex gradients `∇u` (row-major, `n²` entries each).
fn simplex_gradients(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 9]> {
    par::map_slice(&mesh.simplices, |s| {
        let mut g = [0.0; 9];
        mesh.gradient(s, u, &mut g);
        g
    })
}

fn nonlinear_value(spec: &EnergySpec, u: &[f64], eps: f64) -> f64 {
    let mesh = &spec.mesh;
    let n = mesh.dim;
    par::sum_range(mesh.simplices.len(), |k| {
        let s = &mesh.simplices[k];
        let mut f = [0.0; 9];
        mesh.gradient(s, u, &mut f);
        for v in f.iter_mut().take(n * n) {
            *v *= eps;
        }
        for a in 0..n {
            f[a * n + a] += 1.0;
        }
        s.weight * spec.density.of_distance(s.p, distance_of(&f, n)) / (eps * eps)
    })
}

fn nonlinear_value_and_gradient(spec: &EnergySpec, u: &[f64], eps: f64) -> (f64, Vec<f64>) {
    let mesh = &spec.mesh;
    let n = mesh.dim;
    let parts = par::map_slice(&mesh.simplices, |s| {
        let mut f = [0.0; 9];
        mesh.gradient(s, u, &mut f);
        for v in f.iter_mut().take(n * n) {
            *v *= eps;
        }
        for a in 0..n {
            f[a * n + a] += 1.0;
        }
        let (w, mut dw) = density_and_derivative(spec.density, s.p, &f, n);
        let scale = s.weight / eps;
        for v in dw.iter_mut() {
            *v *= scale;
        }
        (s.weight * w / (eps * eps), dw)
    });
    let mut grad = vec![0.0; u.len()];
    let mut energy = 0.0;
    for (s, (e, dw)) in mesh.simplices.iter().zip(&parts) {
        energy += e;
        mesh.scatter(s, dw, &mut grad);
    }
    (energy, grad)
}

fn linear_value(spec: &EnergySpec, u: &[f64]) -> f64 {
    let mesh = &spec.mesh;
    let n = mesh.dim;
    par::sum_range(mesh.simplices.len(), |k| {
        let s = &mesh.simplices[k];
        let mut g = [0.0; 9];
        mesh.gradient(s, u, &mut g);
        let mut sq = 0.0;
        for a in 0..n {
            for b in 0..n {
                let e = 0.5 * (g[a * n + b] + g[b * n + a]);
                sq += e * e;
            }
        }
        0.5 * s.weight * sq
    })
}

/// Gradient of the linear energy (linear in `u`).
fn linear_operator(spec: &EnergySpec, u: &[f64]) -> Vec<f64> {
    let mesh = &spec.mesh;
    let n = mesh.dim;
    let parts = par::map_slice(&mesh.simplices, |s| {
        let mut g = [0.0; 9];
        mesh.gradient(s, u, &mut g);
        let mut e = [0.0; 9];
        for a in 0..n {
            for b in 0..n {
                e[a * n + b] = s.weight * 0.5 * (g[a * n + b] + g[b * n + a]);
            }
        }
        e
    });
    let mut out = vec![0.0; u.len()];
    for (s, e) in mesh.simplices.iter().zip(&parts) {
        mesh.scatter(s, e, &mut out);
    }
    out
}

/// `F_ε(u) = ε⁻² ∫ W(x, I + ε∇u)` on the simplices.
pub fn energy_nonlinear(u: &TensorField, eps: f64, spec: &EnergySpec) -> Result<f64> {
    check_eps(eps)?;
    spec.check_admissible(u)?;
    Ok(nonlinear_value(spec, u.values(), eps))
}

/// [`energy_nonlinear`] and its gradient with respect to every nodal value.
pub fn energy_nonlinear_gradient(u: &TensorField, eps: f64, spec: &EnergySpec) -> Result<(f64, TensorField)> {
    check_eps(eps)?;
    spec.check_admissible(u)?;
    let (e, g) = nonlinear_value_and_gradient(spec, u.values(), eps);
    Ok((e, TensorField::from_values(spec.domain(), 1, g)?))
}

/// `F(u) = ½ ∫ |eu|²`.
pub fn energy_linear(u: &TensorField, spec: &EnergySpec) -> Result<f64> {
    spec.check_admissible(u)?;
    Ok(linear_value(spec, u.values()))
}

/// Smallest `W − g(p, d)` over the simplices (zero for the default density).
pub fn lower_bound_defect(u: &TensorField, eps: f64, spec: &EnergySpec) -> Result<f64> {
    check_eps(eps)?;
    spec.check_admissible(u)?;
    let mesh = &spec.mesh;
    let n = mesh.dim;
    let mut worst = f64::INFINITY;
    for s in &mesh.simplices {
        let mut f = [0.0; 9];
        mesh.gradient(s, u.values(), &mut f);
        for v in f.iter_mut().take(n * n) {
            *v *= eps;
        }
        for a in 0..n {
            f[a * n + a] += 1.0;
        }
        let d = distance_of(&f, n);
        worst = worst.min(spec.density.of_distance(s.p, d) - g_value(s.p, d));
    }
    Ok(worst)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Outcome of [`minimize_nonlinear`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeTrace {
    /// Energy after every accepted step (first entry at the initial guess).
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub status: MinimizeStatus,
}

fn embed(base: &TensorField, idx: &[usize], x: &[f64]) -> Vec<f64> {
    let mut v = base.values().to_vec();
    for (k, &i) in idx.iter().enumerate() {
        v[i] = x[k];
    }
    v
}

/// Minimizes `F_ε` over the free nodes starting from `init`.
pub fn minimize_nonlinear(spec: &EnergySpec, eps: f64, init: &TensorField) -> Result<(TensorField, MinimizeTrace)> {
    minimize_nonlinear_with(spec, eps, init, &MinimizeOptions::default())
}

pub fn minimize_nonlinear_with(
    spec: &EnergySpec,
    eps: f64,
    init: &TensorField,
    opts: &MinimizeOptions,
) -> Result<(TensorField, MinimizeTrace)> {
    check_eps(eps)?;
    spec.check_admissible(init)?;
    let idx = spec.free_indices();
    let x0: Vec<f64> = idx.iter().map(|&i| init.values()[i]).collect();
    let eval = |x: &[f64]| {
        let full = embed(init, &idx, x);
        let (e, g) = nonlinear_value_and_gradient(spec, &full, eps);
        (e, idx.iter().map(|&i| g[i]).collect())
    };
    let out = lbfgs(eval, x0, opts);
    let u = TensorField::from_values(spec.domain(), 1, embed(init, &idx, &out.x))?;
    Ok((
        u,
        MinimizeTrace {
            energies: out.energies,
            iterations: out.iterations,
            gradient_norm: out.gradient_norm,
            status: out.status,
        },
    ))
}

/// Relative residual target of [`minimize_linear`].
pub const LINEAR_TOLERANCE: f64 = 1e-10;

/// Minimizer of `½ Σ |eu|²` with the Dirichlet data, by conjugate gradients.
pub fn minimize_linear(spec: &EnergySpec) -> Result<TensorField> {
    let idx = spec.free_indices();
    let base = spec.project_admissible(spec.boundary())?;
    let mut fixed = base.values().to_vec();
    for &i in &idx {
        fixed[i] = 0.0;
    }
    let k_fixed = linear_operator(spec, &fixed);
    let b: Vec<f64> = idx.iter().map(|&i| -k_fixed[i]).collect();
    let apply = |x: &[f64]| {
        let mut full = vec![0.0; fixed.len()];
        for (k, &i) in idx.iter().enumerate() {
            full[i] = x[k];
        }
        let y = linear_operator(spec, &full);
        idx.iter().map(|&i| y[i]).collect::<Vec<f64>>()
    };
    let cap = (20 * idx.len()).max(1000);
    let out = conjugate_gradient(apply, &b, LINEAR_TOLERANCE, cap);
    if out.relative_residual > LINEAR_TOLERANCE {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            residual: out.relative_residual,
        });
    }
    for (k, &i) in idx.iter().enumerate() {
        fixed[i] = out.x[k];
    }
    TensorField::from_values(spec.domain(), 1, fixed)
}

/// Compactness estimate `∫|∇u|^{p} ≤ C[1 + F_ε(u) + (∫_{∂_DΩ}|h|)²]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub lhs: f64,
    pub rhs: f64,
    pub boundary_term: f64,
    pub ratio: f64,
}

pub fn compactness_check(u: &TensorField, eps: f64, spec: &EnergySpec) -> Result<CompactnessReport> {
    let energy = energy_nonlinear(u, eps, spec)?;
    let lhs = gradient_modular(spec, u)?;
    let b = spec.boundary_integral();
    let rhs = 1.0 + energy + b * b;
    Ok(CompactnessReport {
        lhs,
        rhs,
        boundary_term: b * b,
        ratio: lhs / rhs,
    })
}

/// `∫ |∇u|^{p}` on the simplices.
pub fn gradient_modular(spec: &EnergySpec, u: &TensorField) -> Result<f64> {
    if !spec.domain.same_grid(u.domain()) {
        return Err(Error::DomainMismatch);
    }
    let mags = gradient_magnitudes(spec, u.values());
    let exps = spec.mesh.exponents();
    let weights = spec.mesh.weights();
    Ok(Integrand {
        magnitudes: &mags,
        exponents: &exps,
        weights: &weights,
    }
    .modular())
}

/// `‖∇u − ∇v‖_{p(·)}` on the simplices.
pub fn gradient_distance(spec: &EnergySpec, u: &TensorField, v: &TensorField) -> Result<f64> {
    let diff = u.sub(v)?;
    let mags = gradient_magnitudes(spec, diff.values());
    let exps = spec.mesh.exponents();
    let weights = spec.mesh.weights();
    Ok(Integrand {
        magnitudes: &mags,
        exponents: &exps,
        weights: &weights,
    }
    .norm()?
    .value)
}

fn gradient_magnitudes(spec: &EnergySpec, u: &[f64]) -> Vec<f64> {
    let n = spec.mesh.dim;
    simplex_gradients(&spec.mesh, u)
        .iter()
        .map(|g| g[..n * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

#[cfg(test)]
mod tests;
