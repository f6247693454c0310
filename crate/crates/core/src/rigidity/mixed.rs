//! Mixed-growth rigidity: `∇u − R = F + G` with `F ∈ L^{p(·)}`, `G ∈ L^{q(·)}`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::korn::{mixed_korn_decompose_on, safe_ratio, MixedSplit, SkewRegion};
use super::lusin::lusin_truncate;
use super::{dist_field, map_matrices};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{gradient, mean_gradient, TensorField};
use crate::rotgeo::nearest_rotation;
use crate::varnorm::norm;

/// Constant in `|(OᵀA)_sym − I| ≤ d(A, SO(n)) + C|A − O|²`.
pub const TAYLOR_CONSTANT: f64 = 1.0;

/// Largest supported `μ = q/p`.
pub const MAX_MU: f64 = 4.0;

/// How one level of the bounded-gradient construction distributed `∇v − R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedBranch {
    /// `μ = 1`: plain rigidity, everything in `F`.
    SingleExponent,
    /// `‖f‖^{1/μ} ≤ ‖g‖`: everything in `G`.
    AllInG,
    /// Korn stage on `z = Oᵀv − x`, rotation defect absorbed by `G`.
    KornDefectInG,
    /// Korn stage on `z = Oᵀv − x`, rotation defect absorbed by `F`.
    KornDefectInF,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixedRigidityReport {
    pub mu: f64,
    /// `‖∇u − R − F − G‖_∞` over active nodes.
    pub residual: f64,
    /// `‖F‖_{p(·)} / ‖f‖_{p(·)}` (0 when both vanish).
    pub ratio_f: f64,
    /// `‖G‖_{q(·)} / ‖g‖_{q(·)}` (0 when both vanish).
    pub ratio_g: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    pub norm_big_f: f64,
    pub norm_big_g: f64,
    /// Number of bounded-gradient levels run (0 for `μ = 1`).
    pub levels: usize,
    /// Branch taken at each level, innermost first.
    pub branches: Vec<MixedBranch>,
    pub lusin_changed: usize,
    /// Largest amount by which `|ez|` exceeded the enlarged bound.
    pub coverage_excess: f64,
    /// Residual above `100h`.
    pub failed: bool,
}

#[derive(Clone, Debug)]
pub struct MixedRigidityResult {
    pub rotation: DMatrix<f64>,
    pub big_f: TensorField,
    pub big_g: TensorField,
    pub report: MixedRigidityReport,
}

struct Level {
    rotation: DMatrix<f64>,
    big_f: TensorField,
    big_g: TensorField,
}

struct Core<'a> {
    v: &'a TensorField,
    grad_v: &'a TensorField,
    branches: Vec<MixedBranch>,
    coverage_excess: f64,
}

fn scalar(domain: &Arc<crate::grid::GridDomain>, values: Vec<f64>) -> TensorField {
    TensorField::from_values(domain, 0, values).expect("one value per node")
}

impl Core<'_> {
    /// Bounded-gradient step for `μ ∈ (1, 4]`.
    fn step(&mut self, f: &[f64], g: &[f64], p: &ExponentField, q: &ExponentField, mu: f64) -> Result<Level> {
        let d = Arc::clone(self.v.domain());
        let nf = norm(&scalar(&d, f.to_vec()), p)?;
        let ng = norm(&scalar(&d, g.to_vec()), q)?;
        if mu <= 2.0 {
            let o = nearest_rotation(&mean_gradient(self.v)?).rotation;
            if nf.powf(1.0 / mu) <= ng {
                self.branches.push(MixedBranch::AllInG);
                return Ok(Level {
                    big_f: TensorField::zeros(&d, 2),
                    big_g: self.grad_v.sub_matrix(&o),
                    rotation: o,
                });
            }
            let dev = self.grad_v.sub_matrix(&o).magnitudes();
            let f_t: Vec<f64> = (0..d.len())
                .map(|i| f[i] + TAYLOR_CONSTANT * dev[i] * dev[i])
                .collect();
            return self.korn_stage(&o, f_t, g.to_vec(), p, q, nf <= ng);
        }

        let p2 = p.map(|x| 2.0 * x)?;
        let inner = self.step(f, g, &p2, q, mu / 2.0)?;
        let o = inner.rotation;
        let bound = self.grad_v.sup_norm() + (d.dim() as f64).sqrt();
        let fm = inner.big_f.magnitudes();
        let gm = inner.big_g.magnitudes();
        let dev = self.grad_v.sub_matrix(&o);
        let mut fh = inner.big_f.clone();
        let mut gh = inner.big_g.clone();
        for i in 0..d.len() {
            if !d.is_active(i) {
                continue;
            }
            let in_a = fm[i] > bound;
            let in_b = gm[i] > bound;
            if in_a {
                fh.node_mut(i).copy_from_slice(dev.node(i));
                gh.node_mut(i).iter_mut().for_each(|x| *x = 0.0);
            } else if in_b {
                fh.node_mut(i).iter_mut().for_each(|x| *x = 0.0);
                gh.node_mut(i).copy_from_slice(dev.node(i));
            }
        }
        let fhm = fh.magnitudes();
        let ghm = gh.magnitudes();
        let c2 = 2.0 * TAYLOR_CONSTANT;
        let f_t = (0..d.len()).map(|i| f[i] + c2 * fhm[i] * fhm[i]).collect();
        let g_t = (0..d.len()).map(|i| g[i] + c2 * ghm[i] * ghm[i]).collect();
        self.korn_stage(&o, f_t, g_t, p, q, nf <= ng)
    }

    /// Splits `ez` for `z = Oᵀv − x` in proportion to `f̃ : g̃`, runs the
    /// mixed Korn decomposition and rotates back with `R = OP`.
    fn korn_stage(
        &mut self,
        o: &DMatrix<f64>,
        mut f_t: Vec<f64>,
        g_t: Vec<f64>,
        p: &ExponentField,
        q: &ExponentField,
        defect_in_g: bool,
    ) -> Result<Level> {
        let d = Arc::clone(self.v.domain());
        let n = d.dim();
        let ot = o.transpose();
        let ot = &ot;
        let z = TensorField::from_values(
            &d,
            1,
            (0..d.len())
                .flat_map(|i| {
                    let x = d.position(i);
                    let vi = self.v.node(i);
                    let active = d.is_active(i);
                    (0..n).map(move |r| {
                        if active {
                            (0..n).map(|k| ot[(r, k)] * vi[k]).sum::<f64>() - x[r]
                        } else {
                            0.0
                        }
                    })
                })
                .collect(),
        )?;
        let ez = crate::grid::sym_part(&gradient(&z)?);
        let ezm = ez.magnitudes();
        for i in 0..d.len() {
            if d.is_active(i) {
                let excess = ezm[i] - f_t[i] - g_t[i];
                if excess > 0.0 {
                    self.coverage_excess = self.coverage_excess.max(excess);
                    f_t[i] += excess;
                }
            }
        }
        let fs = map_matrices(&ez, |i, m| {
            let s = f_t[i] + g_t[i];
            if s > 0.0 {
                m * (f_t[i] / s)
            } else {
                m
            }
        });
        let gs = ez.sub(&fs)?;
        let split = MixedSplit::new(fs, gs, p.clone(), q.clone())?;
        let korn = mixed_korn_decompose_on(&z, &split, SkewRegion::Whole)?;
        let eye = DMatrix::<f64>::identity(n, n);
        let i_plus_s = &eye + &korn.skew;
        let pr = nearest_rotation(&i_plus_s).rotation;
        let defect = &i_plus_s - &pr;
        let rotate = |f: &TensorField, extra: Option<&DMatrix<f64>>| {
            map_matrices(f, |_, m| match extra {
                Some(e) => o * (m + e),
                None => o * m,
            })
        };
        let (big_f, big_g) = if defect_in_g {
            self.branches.push(MixedBranch::KornDefectInG);
            (rotate(&korn.big_f, None), rotate(&korn.big_g, Some(&defect)))
        } else {
            self.branches.push(MixedBranch::KornDefectInF);
            (rotate(&korn.big_f, Some(&defect)), rotate(&korn.big_g, None))
        };
        Ok(Level {
            rotation: o * pr,
            big_f,
            big_g,
        })
    }
}

/// Constructs `R ∈ SO(n)` and `F, G` with `∇u − R = F + G` from pointwise
/// bounds `d(∇u, SO(n)) ≤ f + g`, `f ∈ L^{p(·)}`, `g ∈ L^{q(·)}`, `q = μp`.
///
/// `u` is first replaced by its Lipschitz truncation at `λ = 2√n`; the bounds
/// are enlarged on the changed set and clamped at `sup|∇v| + √n`. For
/// `μ ∈ (1, 2]` one Korn stage runs, for `μ ∈ (2, 4]` one recursion through
/// exponent `2p` precedes it. The truncation error `∇u − ∇v` goes to `F` where
/// `f ≥ g` and to `G` elsewhere, and the rotation is finally replaced by the
/// one nearest to `⟨∇u⟩`.
pub fn mixed_rigidity_decompose(u: &TensorField, split: &MixedSplit, mu: f64) -> Result<MixedRigidityResult> {
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu must be at least 1, got {mu}")));
    }
    if mu > MAX_MU {
        return Err(Error::Unsupported(format!("mu = {mu} exceeds {MAX_MU}")));
    }
    let d = Arc::clone(u.domain());
    if !d.same_grid(split.f.domain()) {
        return Err(Error::DomainMismatch);
    }
    if u.rank() != 1 {
        return Err(Error::RankMismatch {
            expected: 1,
            found: u.rank(),
        });
    }
    if split.f.rank() != 0 {
        return Err(Error::RankMismatch {
            expected: 0,
            found: split.f.rank(),
        });
    }
    let (p, q) = (&split.p, &split.q);
    let h = d.spacing();
    let n = d.dim();
    let grad_u = gradient(u)?;
    let f = split.f.values();
    let g = split.g.values();
    let nf = norm(&split.f, p)?;
    let ng = norm(&split.g, q)?;

    let finish = |rotation: DMatrix<f64>,
                  big_f: TensorField,
                  big_g: TensorField,
                  levels: usize,
                  branches: Vec<MixedBranch>,
                  lusin_changed: usize,
                  coverage_excess: f64|
     -> Result<MixedRigidityResult> {
        let residual = grad_u.sub_matrix(&rotation).sub(&big_f)?.sub(&big_g)?.sup_norm();
        let n_big_f = norm(&big_f, p)?;
        let n_big_g = norm(&big_g, q)?;
        Ok(MixedRigidityResult {
            rotation,
            report: MixedRigidityReport {
                mu,
                residual,
                ratio_f: safe_ratio(n_big_f, nf),
                ratio_g: safe_ratio(n_big_g, ng),
                norm_f: nf,
                norm_g: ng,
                norm_big_f: n_big_f,
                norm_big_g: n_big_g,
                levels,
                branches,
                lusin_changed,
                coverage_excess,
                failed: residual > 100.0 * h,
            },
            big_f,
            big_g,
        })
    };

    if mu - 1.0 <= 1e-12 {
        let r = nearest_rotation(&mean_gradient(u)?).rotation;
        let big_f = grad_u.sub_matrix(&r);
        return finish(r, big_f, TensorField::zeros(&d, 2), 0, vec![MixedBranch::SingleExponent], 0, 0.0);
    }

    let dist = dist_field(&grad_u);
    for i in 0..d.len() {
        if d.is_active(i) && dist.values()[i] > f[i] + g[i] + 10.0 * h {
            return Err(Error::InvalidParameter(format!(
                "d(grad u, SO(n)) exceeds f + g + 10h at node {i}"
            )));
        }
    }

    let lusin = lusin_truncate(u, 2.0 * (n as f64).sqrt())?;
    let v = &lusin.v;
    let grad_v = gradient(v)?;
    let dist_v = dist_field(&grad_v);
    let clamp = grad_v.sup_norm() + (n as f64).sqrt();
    let mut f_v = vec![0.0; d.len()];
    let mut g_v = vec![0.0; d.len()];
    for i in 0..d.len() {
        if !d.is_active(i) {
            continue;
        }
        let moved = grad_u.node(i) != grad_v.node(i);
        let extra = if moved { dist_v.values()[i] } else { 0.0 };
        f_v[i] = (f[i] + extra).min(clamp);
        g_v[i] = g[i].min(clamp);
    }

    let mut core = Core {
        v,
        grad_v: &grad_v,
        branches: Vec::new(),
        coverage_excess: 0.0,
    };
    let level = core.step(&f_v, &g_v, p, q, mu)?;
    let levels = if mu <= 2.0 { 1 } else { 2 };

    let mut big_f = level.big_f;
    let mut big_g = level.big_g;
    for i in 0..d.len() {
        if !d.is_active(i) || grad_u.node(i) == grad_v.node(i) {
            continue;
        }
        let target = if f[i] >= g[i] { big_f.node_mut(i) } else { big_g.node_mut(i) };
        for ((t, a), b) in target.iter_mut().zip(grad_u.node(i)).zip(grad_v.node(i)) {
            *t += a - b;
        }
    }
    let r_hat = nearest_rotation(&mean_gradient(u)?).rotation;
    let k = &level.rotation - &r_hat;
    if nf <= ng {
        big_g = map_matrices(&big_g, |_, m| m + &k);
    } else {
        big_f = map_matrices(&big_f, |_, m| m + &k);
    }
    finish(
        r_hat,
        big_f,
        big_g,
        levels,
        core.branches,
        lusin.report.changed_nodes,
        core.coverage_excess,
    )
}
