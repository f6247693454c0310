//! Exact geometry of the supported domains.
//!
//! Points are `[f64; 3]`; in two dimensions the third coordinate is ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Domain shapes understood by [`super::make_domain`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// Axis-aligned box `[lo, hi]` in 2 or 3 dimensions.
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
    /// `[0,1]^2` minus `[0.5,1]^2`.
    Lshape,
    /// Disk (2D) or ball (3D).
    Disk { center: Vec<f64>, radius: f64 },
    /// `{x in [lo,hi] : x_2 < intercept + slope * x_1}` (2D only).
    GraphHalfspace {
        slope: f64,
        intercept: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl Shape {
    pub fn unit_square() -> Self {
        Shape::Rectangle {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Rectangle { lo, .. } => lo.len(),
            Shape::Lshape => 2,
            Shape::Disk { center, .. } => center.len(),
            Shape::GraphHalfspace { lo, .. } => lo.len(),
        }
    }

    /// Bounding box of the closed domain.
    pub fn bounds(&self) -> (Point, Point) {
        let pad = |v: &[f64]| {
            let mut p = [0.0; 3];
            p[..v.len()].copy_from_slice(v);
            p
        };
        match self {
            Shape::Rectangle { lo, hi } | Shape::GraphHalfspace { lo, hi, .. } => (pad(lo), pad(hi)),
            Shape::Lshape => ([0.0; 3], [1.0, 1.0, 0.0]),
            Shape::Disk { center, radius } => {
                let c = pad(center);
                let mut lo = c;
                let mut hi = c;
                for k in 0..center.len() {
                    lo[k] -= radius;
                    hi[k] += radius;
                }
                (lo, hi)
            }
        }
    }

    pub(crate) fn geometry(&self) -> Result<Geometry> {
        let dim = self.dim();
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{2,3}}")));
        }
        match self {
            Shape::Rectangle { lo, hi } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| b <= a) {
                    return Err(Error::InvalidParameter("rectangle needs lo < hi".into()));
                }
                if dim == 2 {
                    Ok(Geometry::Polygon(Polygon::new(vec![
                        [lo[0], lo[1]],
                        [hi[0], lo[1]],
                        [hi[0], hi[1]],
                        [lo[0], hi[1]],
                    ])))
                } else {
                    let (l, h) = self.bounds();
                    Ok(Geometry::Box { lo: l, hi: h })
                }
            }
            Shape::Lshape => Ok(Geometry::Polygon(Polygon::new(vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 0.5],
                [0.5, 0.5],
                [0.5, 1.0],
                [0.0, 1.0],
            ]))),
            Shape::Disk { center, radius } => {
                if *radius <= 0.0 {
                    return Err(Error::InvalidParameter("radius must be positive".into()));
                }
                let mut c = [0.0; 3];
                c[..dim].copy_from_slice(center);
                Ok(Geometry::Ball {
                    center: c,
                    radius: *radius,
                    dim,
                })
            }
            Shape::GraphHalfspace {
                slope,
                intercept,
                lo,
                hi,
            } => {
                if dim != 2 {
                    return Err(Error::Unsupported(
                        "graph-halfspace domains are two-dimensional".into(),
                    ));
                }
                let poly = clip_box_below_line(*slope, *intercept, [lo[0], lo[1]], [hi[0], hi[1]]);
                if poly.len() < 3 {
                    return Err(Error::InvalidParameter(
                        "graph does not cut the box into a nonempty region".into(),
                    ));
                }
                Ok(Geometry::Polygon(Polygon::new(poly)))
            }
        }
    }
}

/// Sutherland–Hodgman clip of a box against the half-plane `y <= c + s x`.
fn clip_box_below_line(slope: f64, intercept: f64, lo: [f64; 2], hi: [f64; 2]) -> Vec<[f64; 2]> {
    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let side = |p: [f64; 2]| intercept + slope * p[0] - p[1];
    let mut out = Vec::new();
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        let (sa, sb) = (side(a), side(b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let same = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15;
    out.dedup_by(|a, b| same(a, b));
    while out.len() > 1 && same(&out[0], &out[out.len() - 1]) {
        out.pop();
    }
    out
}

#[derive(Clone, Debug)]
pub(crate) struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Crossing-number test; points on the boundary may go either way.
    fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

fn point_box_distance2(p: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let dx = (lo[0] - p[0]).max(0.0).max(p[0] - hi[0]);
    let dy = (lo[1] - p[1]).max(0.0).max(p[1] - hi[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Liang–Barsky: does the closed segment meet the closed box?
fn segment_hits_box(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1]];
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for k in 0..2 {
        if d[k] == 0.0 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return false;
            }
        } else {
            let mut ta = (lo[k] - a[k]) / d[k];
            let mut tb = (hi[k] - a[k]) / d[k];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Exact distance between a closed segment and a closed axis-aligned box.
pub(crate) fn segment_box_distance(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    if segment_hits_box(a, b, lo, hi) {
        return 0.0;
    }
    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let mut best = point_box_distance2(a, lo, hi).min(point_box_distance2(b, lo, hi));
    for c in corners {
        best = best.min(point_segment_distance(c, a, b));
    }
    best
}

#[derive(Clone, Debug)]
pub(crate) enum Geometry {
    Polygon(Polygon),
    Ball { center: Point, radius: f64, dim: usize },
    Box { lo: Point, hi: Point },
}

impl Geometry {
    /// Open-set membership (boundary points are not reliably classified).
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Geometry::Polygon(poly) => poly.contains([p[0], p[1]]),
            Geometry::Ball { center, radius, dim } => {
                norm(&sub(p, center), *dim) < *radius
            }
            Geometry::Box { lo, hi } => (0..3).all(|k| p[k] > lo[k] && p[k] < hi[k]),
        }
    }

    /// Euclidean distance from `p` to the boundary.
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        match self {
            Geometry::Polygon(poly) => poly.boundary_distance([p[0], p[1]]),
            Geometry::Ball { center, radius, dim } => (norm(&sub(p, center), *dim) - radius).abs(),
            Geometry::Box { lo, hi } => {
                if self.contains(p) {
                    (0..3)
                        .map(|k| (p[k] - lo[k]).min(hi[k] - p[k]))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    let mut s = 0.0;
                    for k in 0..3 {
                        let d = (lo[k] - p[k]).max(0.0).max(p[k] - hi[k]);
                        s += d * d;
                    }
                    s.sqrt()
                }
            }
        }
    }

    /// For a closed axis-aligned box: `Some(d(Q, ∂Ω))` if the box lies in Ω
    /// with positive distance, `None` otherwise.
    pub fn box_clearance(&self, lo: &Point, hi: &Point, dim: usize) -> Option<f64> {
        let mut center = [0.0; 3];
        for k in 0..dim {
            center[k] = 0.5 * (lo[k] + hi[k]);
        }
        match self {
            Geometry::Polygon(poly) => {
                let (l, h) = ([lo[0], lo[1]], [hi[0], hi[1]]);
                let d = poly
                    .edges()
                    .map(|(a, b)| segment_box_distance(a, b, l, h))
                    .fold(f64::INFINITY, f64::min);
                (d > 0.0 && poly.contains([center[0], center[1]])).then_some(d)
            }
            Geometry::Ball { center: c, radius, dim } => {
                let mut far = 0.0;
                for k in 0..*dim {
                    let e = (lo[k] - c[k]).abs().max((hi[k] - c[k]).abs());
                    far += e * e;
                }
                let d = radius - far.sqrt();
                (d > 0.0).then_some(d)
            }
            Geometry::Box { lo: blo, hi: bhi } => {
                let mut d = f64::INFINITY;
                for k in 0..dim {
                    d = d.min(lo[k] - blo[k]).min(bhi[k] - hi[k]);
                }
                (d > 0.0).then_some(d)
            }
        }
    }
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: &Point, dim: usize) -> f64 {
    a[..dim].iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_box_distance_cases() {
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        assert_eq!(segment_box_distance([2.0, 0.5], [3.0, 0.5], lo, hi), 1.0);
        assert_eq!(segment_box_distance([-1.0, 0.5], [3.0, 0.5], lo, hi), 0.0);
        let d = segment_box_distance([2.0, 1.0], [1.0, 2.0], lo, hi);
        // corner-to-segment case: segment x + y = 3, nearest box corner (1,1)
        assert!((d - 1.0 / 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn halfspace_clip_is_triangle() {
        let poly = clip_box_below_line(0.3, 0.0, [0.0, 0.0], [1.0, 1.0]);
        assert_eq!(poly.len(), 3);
        assert!(poly.iter().any(|p| (p[0] - 1.0).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15));
    }

    #[test]
    fn lshape_membership() {
        let g = Shape::Lshape.geometry().unwrap();
        assert!(g.contains(&[0.25, 0.75, 0.0]));
        assert!(!g.contains(&[0.75, 0.75, 0.0]));
        assert!((g.boundary_distance(&[0.25, 0.25, 0.0]) - 0.25).abs() < 1e-15);
        let d = g.boundary_distance(&[0.6, 0.6, 0.0]);
        assert!((d - 0.1).abs() < 1e-15);
    }
}
