//! Dyadic Whitney cubes.

use serde::{Deserialize, Serialize};

use super::domain::GridDomain;
use super::geometry::Point;

/// Closed dyadic cube `center ± halfwidth` (side `r = 2·halfwidth`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub halfwidth: f64,
    pub level: u32,
}

impl Cube {
    pub fn side(&self) -> f64 {
        2.0 * self.halfwidth
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.center.len() as i32)
    }

    pub fn bounds(&self) -> (Point, Point) {
        self.bounds_scaled(1.0)
    }

    /// Bounds of the cube dilated by `factor` about its center.
    pub fn bounds_scaled(&self, factor: f64) -> (Point, Point) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for (k, c) in self.center.iter().enumerate() {
            lo[k] = c - factor * self.halfwidth;
            hi[k] = c + factor * self.halfwidth;
        }
        (lo, hi)
    }

    /// Closed membership with a relative tolerance.
    pub fn contains(&self, p: &Point, factor: f64) -> bool {
        let tol = 1e-12 * self.halfwidth.max(1.0);
        self.center
            .iter()
            .enumerate()
            .all(|(k, c)| (p[k] - c).abs() <= factor * self.halfwidth + tol)
    }

    /// Open membership.
    pub fn contains_open(&self, p: &Point, factor: f64) -> bool {
        self.center
            .iter()
            .enumerate()
            .all(|(k, c)| (p[k] - c).abs() < factor * self.halfwidth)
    }
}

/// Diagnostics of a Whitney family on a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitneyStats {
    pub cubes: usize,
    /// Maximal number of open doubled cubes containing a node.
    pub overlap: usize,
    /// Range of `d(Q, ∂Ω) / r` over the family.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Every inside node lies in some closed cube.
    pub covers_inside: bool,
}

/// Keep/subdivide constant: a cube is kept when `√n r < d(Q,∂Ω) ≤ 4√n r`.
pub const WHITNEY_UPPER: f64 = 4.0;

const MAX_LEVEL: u32 = 40;

/// Dyadic Whitney decomposition of the inside region.
///
/// Starting from the smallest dyadic cube enclosing the bounding box,
/// a cube is kept when `√n r < d(Q,∂Ω) ≤ 4√n r` and subdivided otherwise;
/// cubes without inside nodes are discarded. Kept cubes satisfy
/// `√n r ≤ d(Q,∂Ω) ≤ 4√n r` and `2Q ⊂ Ω`.
pub fn whitney_decomposition(domain: &GridDomain) -> Vec<Cube> {
    let dim = domain.dim();
    let (lo, side) = root_cube(domain);
    let sqrt_n = (dim as f64).sqrt();
    let mut out = Vec::new();
    let mut stack = vec![(lo, 0u32)];
    while let Some((corner, level)) = stack.pop() {
        let r = side / f64::powi(2.0, level as i32);
        let mut hi = corner;
        for k in 0..dim {
            hi[k] += r;
        }
        if !has_inside_node(domain, &corner, &hi) {
            continue;
        }
        let keep = match domain.box_clearance(&corner, &hi) {
            Some(d) => d > sqrt_n * r && d <= WHITNEY_UPPER * sqrt_n * r,
            None => false,
        };
        if keep || level >= MAX_LEVEL {
            if keep {
                let center = (0..dim).map(|k| corner[k] + 0.5 * r).collect();
                out.push(Cube {
                    center,
                    halfwidth: 0.5 * r,
                    level,
                });
            }
            continue;
        }
        let half = 0.5 * r;
        for child in 0..(1usize << dim) {
            let mut c = corner;
            for k in 0..dim {
                if (child >> k) & 1 == 1 {
                    c[k] += half;
                }
            }
            stack.push((c, level + 1));
        }
    }
    out.sort_by(|a, b| {
        a.level.cmp(&b.level).then_with(|| {
            a.center
                .iter()
                .rev()
                .zip(b.center.iter().rev())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    out
}

fn root_cube(domain: &GridDomain) -> (Point, f64) {
    let dim = domain.dim();
    let origin = domain.origin();
    let counts = domain.counts();
    let h = domain.spacing();
    let side = (0..dim)
        .map(|k| (counts[k] - 1) as f64 * h)
        .fold(0.0, f64::max);
    (origin, side)
}

fn node_range(domain: &GridDomain, lo: &Point, hi: &Point) -> Option<[(usize, usize); 3]> {
    let h = domain.spacing();
    let origin = domain.origin();
    let counts = domain.counts();
    let mut range = [(0usize, 0usize); 3];
    for k in 0..domain.dim() {
        let a = ((lo[k] - origin[k]) / h - 1e-9).ceil().max(0.0);
        let b = ((hi[k] - origin[k]) / h + 1e-9).floor().min((counts[k] - 1) as f64);
        if a > b {
            return None;
        }
        range[k] = (a as usize, b as usize);
    }
    Some(range)
}

fn for_nodes_in_box<F: FnMut(usize)>(domain: &GridDomain, lo: &Point, hi: &Point, mut f: F) {
    let Some(range) = node_range(domain, lo, hi) else {
        return;
    };
    for c in range[2].0..=range[2].1 {
        for b in range[1].0..=range[1].1 {
            for a in range[0].0..=range[0].1 {
                f(domain.index([a, b, c]));
            }
        }
    }
}

fn has_inside_node(domain: &GridDomain, lo: &Point, hi: &Point) -> bool {
    let mut found = false;
    for_nodes_in_box(domain, lo, hi, |i| found |= domain.is_inside(i));
    found
}

/// Node indices inside the closed cube dilated by `factor`.
pub(crate) fn nodes_in_cube(domain: &GridDomain, cube: &Cube, factor: f64) -> Vec<usize> {
    let (lo, hi) = cube.bounds_scaled(factor);
    let mut out = Vec::new();
    for_nodes_in_box(domain, &lo, &hi, |i| out.push(i));
    out
}

impl WhitneyStats {
    pub fn compute(domain: &GridDomain, cubes: &[Cube]) -> Self {
        let mut cover = vec![false; domain.len()];
        let mut count = vec![0usize; domain.len()];
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = 0.0f64;
        for q in cubes {
            for i in nodes_in_cube(domain, q, 1.0) {
                cover[i] = true;
            }
            for i in nodes_in_cube(domain, q, 2.0) {
                if q.contains_open(&domain.position(i), 2.0) {
                    count[i] += 1;
                }
            }
            let (lo, hi) = q.bounds();
            let d = domain.box_clearance(&lo, &hi).unwrap_or(0.0);
            min_ratio = min_ratio.min(d / q.side());
            max_ratio = max_ratio.max(d / q.side());
        }
        let covers_inside = (0..domain.len()).all(|i| !domain.is_inside(i) || cover[i]);
        WhitneyStats {
            cubes: cubes.len(),
            overlap: count.into_iter().max().unwrap_or(0),
            min_ratio,
            max_ratio,
            covers_inside,
        }
    }
}
