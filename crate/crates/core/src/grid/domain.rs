use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::geometry::{Geometry, Point, Shape};
use crate::error::{Error, Result};
use crate::par;

/// One finite-difference stencil: up to three `(node, coefficient)` pairs.
pub(crate) type Stencil = [(u32, f64); 3];

/// Axis-aligned uniform grid discretizing a Lipschitz domain.
///
/// Nodes are classified as *inside* (strictly in Ω), *boundary* (not inside,
/// within one spacing of Ω) or inactive. Fields carry values on inside and
/// boundary nodes ("active" nodes); everything else is ignored.
#[derive(Debug)]
pub struct GridDomain {
    shape: Shape,
    geometry: Geometry,
    dim: usize,
    counts: [usize; 3],
    origin: Point,
    spacing: f64,
    inside: Vec<bool>,
    active: Vec<bool>,
    dirichlet: Vec<bool>,
    boundary_distance: Vec<f64>,
    weights: Vec<f64>,
    stencils: OnceLock<Vec<Stencil>>,
}

/// Builds a grid over `shape` with `resolution` nodes along the longest side.
pub fn make_domain(shape: Shape, resolution: usize) -> Result<Arc<GridDomain>> {
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} below minimum 8"
        )));
    }
    let geometry = shape.geometry()?;
    let dim = shape.dim();
    let (lo, hi) = shape.bounds();
    let extent = (0..dim).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    let spacing = extent / (resolution - 1) as f64;
    let mut counts = [1usize; 3];
    for k in 0..dim {
        counts[k] = ((hi[k] - lo[k]) / spacing).round() as usize + 1;
    }
    Ok(Arc::new(GridDomain::build(shape, geometry, dim, counts, lo, spacing)))
}

/// Builds a grid over `shape` whose nodes lie on the lattice of `lattice`
/// (same spacing, origin shifted by whole cells).
pub fn make_domain_aligned(shape: Shape, lattice: &GridDomain) -> Result<Arc<GridDomain>> {
    let geometry = shape.geometry()?;
    let dim = shape.dim();
    if dim != lattice.dim() {
        return Err(Error::DomainMismatch);
    }
    let (lo, hi) = shape.bounds();
    let h = lattice.spacing;
    let mut origin = [0.0; 3];
    let mut counts = [1usize; 3];
    for k in 0..dim {
        let first = ((lo[k] - lattice.origin[k]) / h - 1e-9).floor();
        let last = ((hi[k] - lattice.origin[k]) / h + 1e-9).ceil();
        origin[k] = lattice.origin[k] + first * h;
        counts[k] = (last - first) as usize + 1;
    }
    Ok(Arc::new(GridDomain::build(shape, geometry, dim, counts, origin, h)))
}

impl GridDomain {
    fn build(
        shape: Shape,
        geometry: Geometry,
        dim: usize,
        counts: [usize; 3],
        origin: Point,
        spacing: f64,
    ) -> Self {
        let len = counts[0] * counts[1] * counts[2];
        let tol = 1e-9 * spacing;
        let mut grid = GridDomain {
            shape,
            geometry,
            dim,
            counts,
            origin,
            spacing,
            inside: Vec::new(),
            active: Vec::new(),
            dirichlet: Vec::new(),
            boundary_distance: Vec::new(),
            weights: Vec::new(),
            stencils: OnceLock::new(),
        };
        let info = par::map_range(len, |i| {
            let x = grid.position(i);
            let d = grid.geometry.boundary_distance(&x);
            let inside = d > tol && grid.geometry.contains(&x);
            let boundary = !inside && d <= spacing * (1.0 + 1e-9);
            (inside, boundary, d)
        });
        grid.inside = info.iter().map(|t| t.0).collect();
        grid.active = info.iter().map(|t| t.0 || t.1).collect();
        grid.dirichlet = info.iter().map(|t| t.1).collect();
        grid.boundary_distance = info.iter().map(|t| if t.0 || t.1 { t.2 } else { 0.0 }).collect();
        grid.weights = par::map_range(len, |i| {
            if grid.active[i] {
                grid.cell_fraction(i) * spacing.powi(dim as i32)
            } else {
                0.0
            }
        });
        grid
    }

    /// Fraction of the dual cell `x ± h/2` lying in Ω (8 midpoint samples per axis).
    fn cell_fraction(&self, i: usize) -> f64 {
        let x = self.position(i);
        let half = 0.5 * self.spacing;
        if self.inside[i] && self.boundary_distance[i] > half * (self.dim as f64).sqrt() {
            return 1.0;
        }
        const SUB: usize = 8;
        let step = self.spacing / SUB as f64;
        let mut hit = 0usize;
        let mut total = 0usize;
        let zn = if self.dim == 3 { SUB } else { 1 };
        for a in 0..SUB {
            for b in 0..SUB {
                for c in 0..zn {
                    let mut p = x;
                    p[0] += -half + (a as f64 + 0.5) * step;
                    p[1] += -half + (b as f64 + 0.5) * step;
                    if self.dim == 3 {
                        p[2] += -half + (c as f64 + 0.5) * step;
                    }
                    total += 1;
                    if self.geometry.contains(&p) {
                        hit += 1;
                    }
                }
            }
        }
        hit as f64 / total as f64
    }

    /// Replaces the Dirichlet mask by the boundary nodes satisfying `keep`.
    pub fn with_dirichlet<F: Fn(&Point) -> bool>(&self, keep: F) -> Arc<GridDomain> {
        let dirichlet = (0..self.len())
            .map(|i| self.active[i] && !self.inside[i] && keep(&self.position(i)))
            .collect();
        Arc::new(GridDomain {
            shape: self.shape.clone(),
            geometry: self.geometry.clone(),
            dim: self.dim,
            counts: self.counts,
            origin: self.origin,
            spacing: self.spacing,
            inside: self.inside.clone(),
            active: self.active.clone(),
            dirichlet,
            boundary_distance: self.boundary_distance.clone(),
            weights: self.weights.clone(),
            stencils: OnceLock::new(),
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    /// Shape as a list of per-axis node counts (length `dim`).
    pub fn grid_shape(&self) -> Vec<usize> {
        self.counts[..self.dim].to_vec()
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.counts[0] * (ijk[1] + self.counts[1] * ijk[2])
    }

    pub fn coords(&self, i: usize) -> [usize; 3] {
        let a = i % self.counts[0];
        let r = i / self.counts[0];
        [a, r % self.counts[1], r / self.counts[1]]
    }

    pub fn position(&self, i: usize) -> Point {
        let c = self.coords(i);
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = self.origin[k] + c[k] as f64 * self.spacing;
        }
        p
    }

    pub fn is_inside(&self, i: usize) -> bool {
        self.inside[i]
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.active[i] && !self.inside[i]
    }

    pub fn is_dirichlet(&self, i: usize) -> bool {
        self.dirichlet[i]
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }

    /// Quadrature weights: `h^n` times the fraction of the dual cell in Ω.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Measure of Ω under the node quadrature.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn boundary_distances(&self) -> &[f64] {
        &self.boundary_distance
    }

    /// Exact distance from an arbitrary point to ∂Ω.
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        self.geometry.boundary_distance(p)
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.geometry.contains(p)
    }

    pub(crate) fn box_clearance(&self, lo: &Point, hi: &Point) -> Option<f64> {
        self.geometry.box_clearance(lo, hi, self.dim)
    }

    /// Node indices of active nodes.
    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.active[i]).collect()
    }

    /// Neighbor along `axis` in direction `step` (±1), if on the grid.
    pub fn neighbor(&self, i: usize, axis: usize, step: isize) -> Option<usize> {
        let mut c = self.coords(i);
        let v = c[axis] as isize + step;
        if v < 0 || v >= self.counts[axis] as isize {
            return None;
        }
        c[axis] = v as usize;
        Some(self.index(c))
    }

    fn active_neighbor(&self, i: usize, axis: usize, step: isize) -> Option<usize> {
        self.neighbor(i, axis, step).filter(|&j| self.active[j])
    }

    /// Derivative stencils for every (node, axis), laid out as `node * dim + axis`.
    ///
    /// Central differences where both neighbors are active, one-sided
    /// second-order three-point formulas at the mask edge, two-point
    /// differences where only one neighbor exists. All are exact on affine
    /// functions.
    pub(crate) fn stencils(&self) -> &[Stencil] {
        self.stencils.get_or_init(|| {
            let h = self.spacing;
            let dim = self.dim;
            let mut out = vec![[(0u32, 0.0); 3]; self.len() * dim];
            for i in 0..self.len() {
                if !self.active[i] {
                    continue;
                }
                for axis in 0..dim {
                    let fwd = self.active_neighbor(i, axis, 1);
                    let bwd = self.active_neighbor(i, axis, -1);
                    let me = i as u32;
                    let s = match (bwd, fwd) {
                        (Some(b), Some(f)) => {
                            [(f as u32, 0.5 / h), (b as u32, -0.5 / h), (me, 0.0)]
                        }
                        (None, Some(f)) => match self.active_neighbor(f, axis, 1) {
                            Some(ff) => [
                                (me, -1.5 / h),
                                (f as u32, 2.0 / h),
                                (ff as u32, -0.5 / h),
                            ],
                            None => [(me, -1.0 / h), (f as u32, 1.0 / h), (me, 0.0)],
                        },
                        (Some(b), None) => match self.active_neighbor(b, axis, -1) {
                            Some(bb) => [
                                (me, 1.5 / h),
                                (b as u32, -2.0 / h),
                                (bb as u32, 0.5 / h),
                            ],
                            None => [(me, 1.0 / h), (b as u32, -1.0 / h), (me, 0.0)],
                        },
                        (None, None) => [(me, 0.0); 3],
                    };
                    out[i * dim + axis] = s;
                }
            }
            out
        })
    }

    /// Whole-cell offset `c` such that node `ijk` of `self` sits at node
    /// `ijk + c` of `other`, when both grids share a lattice.
    pub fn lattice_offset(&self, other: &GridDomain) -> Option<[i64; 3]> {
        if self.dim != other.dim || (self.spacing - other.spacing).abs() > 1e-12 * self.spacing {
            return None;
        }
        let mut off = [0i64; 3];
        for k in 0..self.dim {
            let t = (self.origin[k] - other.origin[k]) / self.spacing;
            if (t - t.round()).abs() > 1e-6 {
                return None;
            }
            off[k] = t.round() as i64;
        }
        Some(off)
    }

    /// Index in `other` of node `i` of `self` under a lattice offset.
    pub fn map_node(&self, i: usize, offset: [i64; 3], other: &GridDomain) -> Option<usize> {
        let c = self.coords(i);
        let mut out = [0usize; 3];
        for k in 0..3 {
            let v = c[k] as i64 + offset[k];
            if v < 0 || v >= other.counts[k] as i64 {
                return None;
            }
            out[k] = v as usize;
        }
        Some(other.index(out))
    }

    /// True when both domains describe the same grid.
    pub fn same_grid(&self, other: &GridDomain) -> bool {
        std::ptr::eq(self, other)
            || (self.counts == other.counts
                && self.spacing == other.spacing
                && self.origin == other.origin
                && self.shape == other.shape)
    }

    /// Multilinear interpolation of node samples at `p`.
    ///
    /// Fails when `p` is off the grid or a corner of its cell is inactive.
    pub fn interpolate(&self, values: &[f64], ncomp: usize, p: &Point, out: &mut [f64]) -> Result<()> {
        self.interpolate_impl(values, ncomp, p, out, false)
    }

    /// Like [`GridDomain::interpolate`], but inactive corners are dropped and
    /// the remaining weights renormalized. Fails only when no corner with
    /// positive weight is active.
    pub(crate) fn interpolate_active(&self, values: &[f64], ncomp: usize, p: &Point, out: &mut [f64]) -> Result<()> {
        self.interpolate_impl(values, ncomp, p, out, true)
    }

    fn interpolate_impl(&self, values: &[f64], ncomp: usize, p: &Point, out: &mut [f64], partial: bool) -> Result<()> {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..self.dim {
            let t = (p[k] - self.origin[k]) / self.spacing;
            let n = self.counts[k];
            if t < -1e-9 || t > (n - 1) as f64 + 1e-9 {
                return Err(Error::OutsideDomain(format!("{:?}", &p[..self.dim])));
            }
            let t = t.clamp(0.0, (n - 1) as f64);
            let b = (t.floor() as usize).min(n.saturating_sub(2));
            base[k] = b;
            frac[k] = t - b as f64;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut total = 0.0;
        let corners = 1usize << self.dim;
        for c in 0..corners {
            let mut ijk = base;
            let mut w = 1.0;
            for k in 0..self.dim {
                if (c >> k) & 1 == 1 {
                    ijk[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            let idx = self.index(ijk);
            if !self.active[idx] {
                if partial {
                    continue;
                }
                return Err(Error::OutsideDomain(format!("{:?}", &p[..self.dim])));
            }
            total += w;
            for (o, v) in out.iter_mut().zip(&values[idx * ncomp..(idx + 1) * ncomp]) {
                *o += w * v;
            }
        }
        if total <= 0.0 {
            return Err(Error::OutsideDomain(format!("{:?}", &p[..self.dim])));
        }
        if partial && total < 1.0 {
            out.iter_mut().for_each(|v| *v /= total);
        }
        Ok(())
    }
}

/// Serializable grid description (echoed into metadata).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSummary {
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub inside_nodes: usize,
    pub active_nodes: usize,
    pub measure: f64,
}

impl GridDomain {
    pub fn summary(&self) -> GridSummary {
        GridSummary {
            shape: self.grid_shape(),
            spacing: self.spacing,
            inside_nodes: self.inside_count(),
            active_nodes: self.active.iter().filter(|b| **b).count(),
            measure: self.measure(),
        }
    }
}
