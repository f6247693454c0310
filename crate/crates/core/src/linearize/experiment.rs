//! The small-strain limit experiment over a decreasing list of `ε`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    distance_of, energy_linear, energy_nonlinear, gradient_distance, gradient_modular, minimize_linear,
    minimize_nonlinear, simplex_gradients, EnergySpec, MinimizeStatus,
};
use crate::error::Result;
use crate::grid::TensorField;
use crate::par;
use crate::rotgeo::nearest_rotation;
use crate::varnorm::tail_profile;

pub const CSV_HEADER: [&str; 12] = [
    "eps",
    "F_eps",
    "gap",
    "wp_dist",
    "modular",
    "compactness_rhs",
    "tail_1",
    "tail_2",
    "tail_5",
    "tail_10",
    "iters",
    "flag",
];

/// Thresholds `M` of the tails `∫_{ε⁻¹d > M} (ε⁻¹d)^{p}`, `d = dist(I + ε∇u_ε, SO(n))`.
pub const TAIL_THRESHOLDS: [f64; 4] = [1.0, 2.0, 5.0, 10.0];

/// Relative energy difference above which a cold restart is flagged.
const COLD_START_TOLERANCE: f64 = 0.01;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// `F_ε(u_ε)`.
    pub energy: f64,
    /// `|F_ε(u_ε) − F(u*)|`.
    pub gap: f64,
    /// `‖∇u_ε − ∇u*‖_{p(·)}`.
    pub wp_dist: f64,
    /// `∫ |∇u_ε|^{p}`.
    pub modular: f64,
    /// `1 + F_ε(u_ε) + (∫_{∂_DΩ}|h|)²`.
    pub compactness_rhs: f64,
    pub tails: [f64; 4],
    pub iterations: usize,
    /// `ok`, or `+`-joined labels.
    pub flag: String,
}

impl ConvergenceRow {
    /// True when the minimization did not converge or a value is not finite.
    pub fn failed(&self) -> bool {
        self.flag.split('+').any(|f| matches!(f, "max-iter" | "line-search" | "non-finite" | "error"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowDiagnostics {
    pub status: Option<MinimizeStatus>,
    pub gradient_norm: f64,
    /// `F_ε` reached from the boundary data instead of the warm start.
    pub cold_start_energy: f64,
    pub cold_start_differs: bool,
    /// `∫|∇u_ε|^{p} / (1 + F_ε + (∫|h|)²)`.
    pub compactness_ratio: f64,
    /// `‖eu_ε χ_B − eu*‖_{L²}` with `B = {ε^{1/2}|∇u_ε| ≤ 1}`.
    pub recovery_strain_l2: f64,
    /// `ε⁻² ∫_{Ω∖B} W(x, I + ε∇u_ε)`.
    pub recovery_outside_energy: f64,
    /// `|I − R| / (∫|I + ε∇u_ε − R| + ε∫|h|)` with `R` nearest to the mean.
    pub poincare_constant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    /// `F(u*) = min F`.
    pub limit_energy: f64,
    /// `‖∇u*‖_{p(·)}`.
    pub limit_gradient_norm: f64,
    pub boundary_integral: f64,
    pub rows: Vec<ConvergenceRow>,
    pub diagnostics: Vec<RowDiagnostics>,
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![
                fmt(r.eps),
                fmt(r.energy),
                fmt(r.gap),
                fmt(r.wp_dist),
                fmt(r.modular),
                fmt(r.compactness_rhs),
            ];
            cells.extend(r.tails.iter().map(|t| fmt(*t)));
            cells.push(r.iterations.to_string());
            cells.push(r.flag.clone());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn failed(&self) -> bool {
        self.rows.iter().any(ConvergenceRow::failed)
    }
}

struct Measured {
    row: ConvergenceRow,
    diag: RowDiagnostics,
}

fn measure_row(
    spec: &EnergySpec,
    eps: f64,
    u: &TensorField,
    u_star: &TensorField,
    limit_energy: f64,
    boundary_integral: f64,
) -> Result<Measured> {
    let mesh = &spec.mesh;
    let n = mesh.dim;
    let energy = energy_nonlinear(u, eps, spec)?;
    let wp_dist = gradient_distance(spec, u, u_star)?;
    let modular = gradient_modular(spec, u)?;
    let compactness_rhs = 1.0 + energy + boundary_integral * boundary_integral;

    let grads = simplex_gradients(mesh, u.values());
    let star_grads = simplex_gradients(mesh, u_star.values());
    let deformations: Vec<[f64; 9]> = grads
        .iter()
        .map(|g| {
            let mut f = [0.0; 9];
            for k in 0..n * n {
                f[k] = eps * g[k];
            }
            for a in 0..n {
                f[a * n + a] += 1.0;
            }
            f
        })
        .collect();
    let scaled: Vec<f64> = par::map_slice(&deformations, |f| distance_of(f, n) / eps);
    let exps = mesh.exponents();
    let weights = mesh.weights();
    let tails_v = tail_profile(&scaled, &exps, &weights, &TAIL_THRESHOLDS)?;
    let mut tails = [0.0; 4];
    for (t, (_, v)) in tails.iter_mut().zip(tails_v) {
        *t = v;
    }

    let sym = |g: &[f64; 9], a: usize, b: usize| 0.5 * (g[a * n + b] + g[b * n + a]);
    let mut strain_sq = 0.0;
    let mut outside = 0.0;
    for (k, s) in mesh.simplices.iter().enumerate() {
        let g = &grads[k];
        let mag = g[..n * n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let in_b = eps.sqrt() * mag <= 1.0;
        let mut sq = 0.0;
        for a in 0..n {
            for b in 0..n {
                let e = if in_b { sym(g, a, b) } else { 0.0 };
                sq += (e - sym(&star_grads[k], a, b)).powi(2);
            }
        }
        strain_sq += s.weight * sq;
        if !in_b {
            outside += s.weight * spec.density.of_distance(s.p, scaled[k] * eps) / (eps * eps);
        }
    }

    let measure: f64 = weights.iter().sum();
    let mut mean = DMatrix::<f64>::zeros(n, n);
    for (f, w) in deformations.iter().zip(&weights) {
        for a in 0..n {
            for b in 0..n {
                mean[(a, b)] += w * f[a * n + b] / measure;
            }
        }
    }
    let r = nearest_rotation(&mean).rotation;
    let lhs = (DMatrix::<f64>::identity(n, n) - &r).norm();
    let l1: f64 = deformations
        .iter()
        .zip(&weights)
        .map(|(f, w)| {
            let mut sq = 0.0;
            for a in 0..n {
                for b in 0..n {
                    sq += (f[a * n + b] - r[(a, b)]).powi(2);
                }
            }
            w * sq.sqrt()
        })
        .sum();
    let rhs = l1 + eps * boundary_integral;
    let poincare_constant = if lhs <= 1e-14 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    };

    Ok(Measured {
        row: ConvergenceRow {
            eps,
            energy,
            gap: (energy - limit_energy).abs(),
            wp_dist,
            modular,
            compactness_rhs,
            tails,
            iterations: 0,
            flag: String::new(),
        },
        diag: RowDiagnostics {
            status: None,
            gradient_norm: f64::NAN,
            cold_start_energy: f64::NAN,
            cold_start_differs: false,
            compactness_ratio: modular / compactness_rhs,
            recovery_strain_l2: strain_sq.sqrt(),
            recovery_outside_energy: outside,
            poincare_constant,
        },
    })
}

fn failed_row(eps: f64) -> (ConvergenceRow, RowDiagnostics) {
    (
        ConvergenceRow {
            eps,
            energy: f64::NAN,
            gap: f64::NAN,
            wp_dist: f64::NAN,
            modular: f64::NAN,
            compactness_rhs: f64::NAN,
            tails: [f64::NAN; 4],
            iterations: 0,
            flag: "error".into(),
        },
        RowDiagnostics {
            status: None,
            gradient_norm: f64::NAN,
            cold_start_energy: f64::NAN,
            cold_start_differs: false,
            compactness_ratio: f64::NAN,
            recovery_strain_l2: f64::NAN,
            recovery_outside_energy: f64::NAN,
            poincare_constant: f64::NAN,
        },
    )
}

/// Minimizes `F_ε` along `spec.epsilons()` (warm-started from the linear
/// minimizer `u*`, then from the previous row), compares with `F(u*)`, and
/// reruns every row from the boundary data to detect other local minima.
pub fn gamma_convergence_experiment(spec: &EnergySpec) -> Result<ConvergenceTable> {
    let u_star = minimize_linear(spec)?;
    let limit_energy = energy_linear(&u_star, spec)?;
    let zero = TensorField::zeros(spec.domain(), 1);
    let limit_gradient_norm = gradient_distance(spec, &u_star, &zero)?;
    let boundary_integral = spec.boundary_integral();
    let cold_init = spec.project_admissible(spec.boundary())?;

    let cold: Vec<Option<f64>> = par::map_slice(spec.epsilons(), |&eps| {
        minimize_nonlinear(spec, eps, &cold_init).ok().map(|(_, t)| *t.energies.last().expect("initial energy"))
    });

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut prev = u_star.clone();
    for (k, &eps) in spec.epsilons().iter().enumerate() {
        let attempt = minimize_nonlinear(spec, eps, &prev).and_then(|(u, trace)| {
            let m = measure_row(spec, eps, &u, &u_star, limit_energy, boundary_integral)?;
            Ok((u, trace, m))
        });
        let (row, diag) = match attempt {
            Ok((u, trace, m)) => {
                let Measured { mut row, mut diag } = m;
                let mut flags = Vec::new();
                match trace.status {
                    MinimizeStatus::Converged => {}
                    MinimizeStatus::MaxIterations => flags.push("max-iter"),
                    MinimizeStatus::LineSearchFailed => flags.push("line-search"),
                }
                let numbers = [row.energy, row.gap, row.wp_dist, row.modular, row.compactness_rhs];
                if numbers.iter().chain(&row.tails).any(|v| !v.is_finite()) {
                    flags.push("non-finite");
                }
                if let Some(c) = cold[k] {
                    diag.cold_start_energy = c;
                    let scale = row.energy.abs().max(c.abs()).max(1e-300);
                    diag.cold_start_differs = (c - row.energy).abs() > COLD_START_TOLERANCE * scale;
                    if diag.cold_start_differs {
                        flags.push("cold-start-differs");
                    }
                }
                row.iterations = trace.iterations;
                row.flag = if flags.is_empty() { "ok".into() } else { flags.join("+") };
                diag.status = Some(trace.status);
                diag.gradient_norm = trace.gradient_norm;
                prev = u;
                (row, diag)
            }
            Err(_) => failed_row(eps),
        };
        rows.push(row);
        diagnostics.push(diag);
    }
    Ok(ConvergenceTable {
        limit_energy,
        limit_gradient_norm,
        boundary_integral,
        rows,
        diagnostics,
    })
}
