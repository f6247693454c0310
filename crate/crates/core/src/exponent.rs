//! Variable exponents sampled on grid nodes.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, GridDomain, Point};
use crate::par;

/// Closed-form exponent families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExponentSpec {
    Constant {
        value: f64,
    },
    /// Affine in `x_axis` across the bounding box, `from` at the low face.
    LinearRamp {
        from: f64,
        to: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `base + (peak - base) exp(-|x - center|² / width²)`.
    SmoothBump {
        base: f64,
        peak: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Two-valued tiling with `tiles` cells per axis; not log-Hölder.
    Checkerboard {
        low: f64,
        high: f64,
        tiles: usize,
    },
}

/// Exponent `p(x)` at every grid node, with its exact range over active nodes.
///
/// Values at inactive nodes are copied from the nearest active node, which
/// extends `p` past Ω without changing `p⁻` or `p⁺`.
#[derive(Clone, Debug)]
pub struct ExponentField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    c_log: Arc<OnceLock<f64>>,
}

/// Flat JSON form `{shape, spacing, values}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExponentRecord {
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub values: Vec<f64>,
}

/// `(p⁻, p⁺, c_log)` triple echoed into reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub p_minus: f64,
    pub p_plus: f64,
    pub c_log: f64,
}

/// Builds an exponent field from a closed-form family.
pub fn build_exponent(spec: &ExponentSpec, domain: &Arc<GridDomain>) -> Result<ExponentField> {
    let dim = domain.dim();
    let (lo, hi) = domain.shape().bounds();
    let f: Box<dyn Fn(&Point) -> f64 + Sync + Send> = match spec.clone() {
        ExponentSpec::Constant { value } => Box::new(move |_| value),
        ExponentSpec::LinearRamp { from, to, axis } => {
            if axis >= dim {
                return Err(Error::InvalidParameter(format!("ramp axis {axis} >= dimension {dim}")));
            }
            let (a, b) = (lo[axis], hi[axis]);
            Box::new(move |x| {
                let t = ((x[axis] - a) / (b - a)).clamp(0.0, 1.0);
                from + (to - from) * t
            })
        }
        ExponentSpec::SmoothBump {
            base,
            peak,
            center,
            width,
        } => {
            if center.len() != dim || width <= 0.0 {
                return Err(Error::InvalidParameter("bump needs a center in R^n and width > 0".into()));
            }
            Box::new(move |x| {
                let r2: f64 = center.iter().enumerate().map(|(k, c)| (x[k] - c).powi(2)).sum();
                base + (peak - base) * (-r2 / (width * width)).exp()
            })
        }
        ExponentSpec::Checkerboard { low, high, tiles } => {
            if tiles == 0 {
                return Err(Error::InvalidParameter("checkerboard needs tiles >= 1".into()));
            }
            Box::new(move |x| {
                let parity: usize = (0..dim)
                    .map(|k| {
                        let t = (x[k] - lo[k]) / (hi[k] - lo[k]);
                        ((t * tiles as f64).floor() as usize).min(tiles - 1)
                    })
                    .sum();
                if parity.is_multiple_of(2) {
                    low
                } else {
                    high
                }
            })
        }
    };
    ExponentField::from_fn(domain, f)
}

impl ExponentField {
    pub fn constant(domain: &Arc<GridDomain>, value: f64) -> Result<Self> {
        Self::from_fn(domain, |_| value)
    }

    /// Samples `f` at the active nodes.
    pub fn from_fn<F>(domain: &Arc<GridDomain>, f: F) -> Result<Self>
    where
        F: Fn(&Point) -> f64 + Sync + Send,
    {
        let values = par::map_range(domain.len(), |i| {
            if domain.is_active(i) {
                f(&domain.position(i))
            } else {
                f64::NAN
            }
        });
        Self::from_values(domain, values)
    }

    /// Wraps node values; only active entries are read, the rest are
    /// replaced by the nearest-active-node extension.
    pub fn from_values(domain: &Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} exponent values, got {}",
                domain.len(),
                values.len()
            )));
        }
        let mut p_minus = f64::INFINITY;
        let mut p_plus = f64::NEG_INFINITY;
        for i in 0..domain.len() {
            if !domain.is_active(i) {
                continue;
            }
            let v = values[i];
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if v < 1.0 {
                let x = domain.position(i);
                return Err(Error::ExponentRange(format!(
                    "p = {v} < 1 at node {i} ({:?})",
                    &x[..domain.dim()]
                )));
            }
            p_minus = p_minus.min(v);
            p_plus = p_plus.max(v);
        }
        if !p_minus.is_finite() {
            return Err(Error::InvalidParameter("domain has no active nodes".into()));
        }
        extend_by_nearest(domain, &mut values);
        Ok(Self {
            domain: Arc::clone(domain),
            values,
            p_minus,
            p_plus,
            c_log: Arc::new(OnceLock::new()),
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    /// Interpolated exponent at an arbitrary point of the sampled box.
    pub fn sample(&self, x: &Point) -> Result<f64> {
        let mut out = [0.0];
        interpolate_all(&self.domain, &self.values, x, &mut out)?;
        Ok(out[0])
    }

    /// Pointwise transform, e.g. `q = μ p`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| if self.domain.is_active(i) { f(*v) } else { f64::NAN })
            .collect();
        Self::from_values(&self.domain, values)
    }

    /// Same exponent values on a grid with identical layout.
    pub fn on_domain(&self, domain: &Arc<GridDomain>) -> Result<Self> {
        if domain.grid_shape() != self.domain.grid_shape() || domain.spacing() != self.domain.spacing() {
            return Err(Error::DomainMismatch);
        }
        let values = (0..domain.len())
            .map(|i| if domain.is_active(i) { self.values[i] } else { f64::NAN })
            .collect();
        Self::from_values(domain, values)
    }

    /// Cached [`log_holder_constant`].
    pub fn c_log(&self) -> f64 {
        *self.c_log.get_or_init(|| compute_log_holder(self))
    }

    pub fn summary(&self) -> ExponentSummary {
        ExponentSummary {
            p_minus: self.p_minus,
            p_plus: self.p_plus,
            c_log: self.c_log(),
        }
    }

    pub fn to_record(&self) -> ExponentRecord {
        ExponentRecord {
            shape: self.domain.grid_shape(),
            spacing: self.domain.spacing(),
            values: self.values.clone(),
        }
    }

    pub fn from_record(domain: &Arc<GridDomain>, record: &ExponentRecord) -> Result<Self> {
        if record.shape != domain.grid_shape() || record.spacing != domain.spacing() {
            return Err(Error::DomainMismatch);
        }
        Self::from_values(domain, record.values.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(domain: &Arc<GridDomain>, json: &str) -> Result<Self> {
        let record: ExponentRecord = serde_json::from_str(json)?;
        Self::from_record(domain, &record)
    }
}

fn interpolate_all(domain: &GridDomain, values: &[f64], x: &Point, out: &mut [f64]) -> Result<()> {
    let h = domain.spacing();
    let origin = domain.origin();
    let counts = domain.counts();
    for k in 0..domain.dim() {
        let t = (x[k] - origin[k]) / h;
        if t < -1e-9 || t > (counts[k] - 1) as f64 + 1e-9 {
            return Err(Error::OutsideDomain(format!("{:?}", &x[..domain.dim()])));
        }
    }
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for k in 0..domain.dim() {
        let n = counts[k];
        let t = ((x[k] - origin[k]) / h).clamp(0.0, (n - 1) as f64);
        let b = (t.floor() as usize).min(n.saturating_sub(2));
        base[k] = b;
        frac[k] = t - b as f64;
    }
    out[0] = 0.0;
    for c in 0..(1usize << domain.dim()) {
        let mut ijk = base;
        let mut w = 1.0;
        for k in 0..domain.dim() {
            if (c >> k) & 1 == 1 {
                ijk[k] += 1;
                w *= frac[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w != 0.0 {
            out[0] += w * values[domain.index(ijk)];
        }
    }
    Ok(())
}

fn extend_by_nearest(domain: &GridDomain, values: &mut [f64]) {
    let rim: Vec<usize> = (0..domain.len())
        .filter(|&i| domain.is_boundary(i) || (domain.is_active(i) && touches_inactive(domain, i)))
        .collect();
    if rim.is_empty() {
        return;
    }
    let rim_pos: Vec<Point> = rim.iter().map(|&i| domain.position(i)).collect();
    let fill = par::map_range(domain.len(), |i| {
        if domain.is_active(i) {
            return None;
        }
        let x = domain.position(i);
        let mut best = (f64::INFINITY, 0usize);
        for (k, y) in rim_pos.iter().enumerate() {
            let d = (0..3).map(|a| (x[a] - y[a]).powi(2)).sum::<f64>();
            if d < best.0 {
                best = (d, rim[k]);
            }
        }
        Some(best.1)
    });
    for (i, src) in fill.into_iter().enumerate() {
        if let Some(j) = src {
            values[i] = values[j];
        }
    }
}

fn touches_inactive(domain: &GridDomain, i: usize) -> bool {
    (0..domain.dim()).any(|axis| {
        [-1, 1]
            .iter()
            .any(|&s| domain.neighbor(i, axis, s).is_none_or(|j| !domain.is_active(j)))
    })
}

fn compute_log_holder(p: &ExponentField) -> f64 {
    let d = &p.domain;
    let nodes = d.active_nodes();
    if nodes.len() < 2 || p.is_constant() {
        return 0.0;
    }
    let pos: Vec<Point> = nodes.iter().map(|&i| d.position(i)).collect();
    let vals: Vec<f64> = nodes.iter().map(|&i| p.values[i]).collect();
    let best = par::max_range(nodes.len(), |a| {
        let mut m = 0.0f64;
        for b in (a + 1)..nodes.len() {
            let dp = (vals[a] - vals[b]).abs();
            if dp == 0.0 {
                continue;
            }
            let r = (0..3).map(|k| (pos[a][k] - pos[b][k]).powi(2)).sum::<f64>().sqrt();
            m = m.max(dp * (std::f64::consts::E + 1.0 / r).ln());
        }
        m
    });
    best.max(0.0)
}

/// `sup_{x≠y} |p(x) − p(y)| log(e + 1/|x − y|)` over active node pairs.
pub fn log_holder_constant(p: &ExponentField) -> f64 {
    p.c_log()
}

/// Conjugate exponent `p' = p / (p − 1)`.
pub fn dual_exponent(p: &ExponentField) -> Result<ExponentField> {
    if p.p_minus <= 1.0 {
        return Err(Error::ExponentRange(format!(
            "dual exponent needs p⁻ > 1, got {}",
            p.p_minus
        )));
    }
    p.map(|v| v / (v - 1.0))
}

/// `q(x) = p(x0 + λx)` on `target`, by multilinear interpolation of `p`.
pub fn rescale_exponent(
    p: &ExponentField,
    x0: &Point,
    lambda: f64,
    target: &Arc<GridDomain>,
) -> Result<ExponentField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if target.dim() != p.domain.dim() {
        return Err(Error::DomainMismatch);
    }
    let dim = target.dim();
    let mut values = vec![f64::NAN; target.len()];
    for i in 0..target.len() {
        if !target.is_active(i) {
            continue;
        }
        let x = target.position(i);
        let mut y = [0.0; 3];
        for k in 0..dim {
            y[k] = x0[k] + lambda * x[k];
        }
        let mut out = [0.0];
        p.domain.interpolate(&p.values, 1, &y, &mut out)?;
        values[i] = out[0];
    }
    ExponentField::from_values(target, values)
}

/// `max_Q |Q|^{p_Q⁻ − p_Q⁺}` over cubes, with `p_Q^±` taken over the
/// active nodes in the closed cube.
pub fn cube_oscillation_check(p: &ExponentField, cubes: &[Cube]) -> f64 {
    let d = &p.domain;
    let worst = par::map_slice(cubes, |q| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in crate::grid::nodes_in_cube(d, q, 1.0) {
            if d.is_active(i) {
                lo = lo.min(p.values[i]);
                hi = hi.max(p.values[i]);
            }
        }
        if lo.is_finite() {
            q.volume().powf(lo - hi)
        } else {
            1.0
        }
    });
    worst.into_iter().fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_domain, whitney_decomposition, Shape};

    fn square(res: usize) -> Arc<GridDomain> {
        make_domain(Shape::unit_square(), res).unwrap()
    }

    fn ramp(d: &Arc<GridDomain>) -> ExponentField {
        build_exponent(
            &ExponentSpec::LinearRamp {
                from: 1.4,
                to: 2.0,
                axis: 0,
            },
            d,
        )
        .unwrap()
    }

    fn checker(res: usize) -> ExponentField {
        build_exponent(
            &ExponentSpec::Checkerboard {
                low: 1.2,
                high: 1.8,
                tiles: 4,
            },
            &square(res),
        )
        .unwrap()
    }

    #[test]
    fn constructor_ranges() {
        let d = square(33);
        let c = ExponentField::constant(&d, 2.0).unwrap();
        assert_eq!((c.p_minus(), c.p_plus()), (2.0, 2.0));
        let r = ramp(&d);
        assert_eq!((r.p_minus(), r.p_plus()), (1.4, 2.0));
        let k = checker(33);
        assert_eq!((k.p_minus(), k.p_plus()), (1.2, 1.8));
    }

    #[test]
    fn values_below_one_are_rejected() {
        let d = square(16);
        let err = build_exponent(
            &ExponentSpec::LinearRamp {
                from: 0.8,
                to: 2.0,
                axis: 0,
            },
            &d,
        );
        assert!(matches!(err, Err(Error::ExponentRange(_))));
    }

    #[test]
    fn log_holder_of_constant_and_ramp() {
        let d = square(33);
        assert_eq!(log_holder_constant(&ExponentField::constant(&d, 1.7).unwrap()), 0.0);
        let c = log_holder_constant(&ramp(&d));
        // Brute-force pair scan.
        let nodes = d.active_nodes();
        let p = ramp(&d);
        let mut best = 0.0f64;
        for (a, &i) in nodes.iter().enumerate() {
            for &j in &nodes[a + 1..] {
                let (x, y) = (d.position(i), d.position(j));
                let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
                best = best.max((p.value(i) - p.value(j)).abs() * (std::f64::consts::E + 1.0 / r).ln());
            }
        }
        assert_eq!(c, best);
        assert!((c - 0.6 * (std::f64::consts::E + 1.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_log_holder_increases_under_refinement() {
        let cs: Vec<f64> = [16, 32, 64].iter().map(|&r| log_holder_constant(&checker(r))).collect();
        assert!(cs[0] < cs[1] && cs[1] < cs[2], "{cs:?}");
    }

    #[test]
    fn dual_identities() {
        let d = square(17);
        let two = dual_exponent(&ExponentField::constant(&d, 2.0).unwrap()).unwrap();
        assert!(two.values().iter().all(|v| *v == 2.0));
        let three = dual_exponent(&ExponentField::constant(&d, 1.5).unwrap()).unwrap();
        assert!(three.values().iter().all(|v| (*v - 3.0).abs() < 1e-15));
        let r = ramp(&d);
        let rd = dual_exponent(&r).unwrap();
        let defect = (0..d.len())
            .map(|i| (1.0 / r.value(i) + 1.0 / rd.value(i) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(defect <= 1e-12);
        let back = dual_exponent(&rd).unwrap();
        for i in 0..d.len() {
            assert!((back.value(i) - r.value(i)).abs() <= 1e-12);
        }
        assert!(dual_exponent(&ExponentField::constant(&d, 1.0).unwrap()).is_err());
    }

    #[test]
    fn rescale_cases() {
        let d = square(33);
        let c = ExponentField::constant(&d, 1.6).unwrap();
        let rc = rescale_exponent(&c, &[0.1, 0.2, 0.0], 0.3, &d).unwrap();
        assert!(rc.values().iter().all(|v| (*v - 1.6).abs() < 1e-15));

        let r = ramp(&d);
        let half = rescale_exponent(&r, &[0.0; 3], 0.5, &d).unwrap();
        for i in d.active_nodes() {
            let x = d.position(i);
            assert!((half.value(i) - (1.4 + 0.3 * x[0])).abs() < 1e-12);
        }
        assert!(half.p_minus() >= r.p_minus() && half.p_plus() <= r.p_plus());

        let same = rescale_exponent(&r, &[0.0; 3], 1.0, &d).unwrap();
        for i in d.active_nodes() {
            assert!((same.value(i) - r.value(i)).abs() <= 1e-12);
        }
        assert!(rescale_exponent(&r, &[0.5, 0.5, 0.0], 1.0, &d).is_err());
    }

    #[test]
    fn contraction_does_not_increase_log_holder() {
        let d = square(33);
        let r = build_exponent(
            &ExponentSpec::SmoothBump {
                base: 1.3,
                peak: 1.9,
                center: vec![0.4, 0.6],
                width: 0.2,
            },
            &d,
        )
        .unwrap();
        for lambda in [1.0, 0.75, 0.5, 0.25] {
            let q = rescale_exponent(&r, &[0.0; 3], lambda, &d).unwrap();
            assert!(log_holder_constant(&q) <= log_holder_constant(&r) + 1e-9);
        }
    }

    #[test]
    fn cube_oscillation_cases() {
        let d = square(65);
        let cubes = whitney_decomposition(&d);
        let c = ExponentField::constant(&d, 1.5).unwrap();
        assert_eq!(cube_oscillation_check(&c, &cubes), 1.0);
        let r = ramp(&d);
        let osc = cube_oscillation_check(&r, &cubes);
        assert!(osc.is_finite() && osc <= (2.0 * r.c_log()).exp());
    }

    #[test]
    fn cube_oscillation_blows_up_on_checkerboard() {
        let mut last = 0.0;
        for res in [17, 33, 65, 129] {
            let p = checker(res);
            let h = p.domain().spacing();
            // Smallest cube around the jump at x₁ = 1/4 that contains nodes on both sides.
            let q = Cube {
                center: vec![0.25, 0.5],
                halfwidth: h,
                level: 0,
            };
            let v = cube_oscillation_check(&p, &[q]);
            assert!(v > last, "{v} <= {last}");
            last = v;
        }
    }

    #[test]
    fn exponent_json_round_trip() {
        let d = square(9);
        let r = ramp(&d);
        let back = ExponentField::from_json(&d, &r.to_json().unwrap()).unwrap();
        assert_eq!(back.values(), r.values());
    }

    #[test]
    fn extension_preserves_range() {
        let d = make_domain(Shape::Lshape, 33).unwrap();
        let r = ramp(&d);
        assert!(r.values().iter().all(|v| *v >= r.p_minus() && *v <= r.p_plus()));
    }
}
