//! Discrete Hardy–Littlewood maximal functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::{GridDomain, TensorField};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaximalMode {
    /// `M(f)`: `f` extended by zero, averages over whole balls.
    Global,
    /// `M_Ω(f)`: averages over `Ω ∩ B_ρ`.
    Local,
}

fn isqrt(v: i64) -> i64 {
    let mut r = (v as f64).sqrt() as i64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Row prefix sums along axis 0, one row per `(j, k)`.
struct RowSums {
    nx: usize,
    sums: Vec<f64>,
}

impl RowSums {
    fn new(domain: &GridDomain, values: &[f64]) -> Self {
        let nx = domain.counts()[0];
        let rows = domain.len() / nx;
        let mut sums = vec![0.0; rows * (nx + 1)];
        for r in 0..rows {
            let base = r * (nx + 1);
            for a in 0..nx {
                sums[base + a + 1] = sums[base + a] + values[r * nx + a];
            }
        }
        Self { nx, sums }
    }

    /// Sum over `a ∈ [lo, hi]` (clamped) of row `r`.
    fn range(&self, r: usize, lo: i64, hi: i64) -> f64 {
        let lo = lo.max(0) as usize;
        let hi = hi.min(self.nx as i64 - 1);
        if hi < lo as i64 {
            return 0.0;
        }
        let base = r * (self.nx + 1);
        self.sums[base + hi as usize + 1] - self.sums[base + lo]
    }
}

/// Maximal function over dyadic radii `h, 2h, 4h, …` up to the diameter of
/// the bounding box. Evaluated at active nodes; zero elsewhere.
pub fn maximal_function(f: &TensorField, mode: MaximalMode) -> TensorField {
    let domain = Arc::clone(f.domain());
    let dim = domain.dim();
    let counts = domain.counts();
    let h = domain.spacing();
    let cell = h.powi(dim as i32);
    let weights = domain.weights();
    let mags = f.magnitudes();
    let fw: Vec<f64> = mags.iter().zip(weights).map(|(m, w)| m * w).collect();
    let f_rows = RowSums::new(&domain, &fw);
    let w_rows = RowSums::new(&domain, weights);

    let diam_nodes = ((0..dim)
        .map(|k| ((counts[k] - 1) as f64).powi(2))
        .sum::<f64>())
    .sqrt();
    let mut radii = vec![1i64];
    while (*radii.last().unwrap() as f64) < diam_nodes {
        let next = radii.last().unwrap() * 2;
        radii.push(next);
    }
    let lattice_counts: Vec<f64> = radii.iter().map(|&r| lattice_ball_count(r, dim) as f64).collect();

    let values = par::map_range(domain.len(), |i| {
        if !domain.is_active(i) {
            return 0.0;
        }
        let c = domain.coords(i);
        let mut best = 0.0f64;
        for (ri, &r) in radii.iter().enumerate() {
            let (mut sf, mut sw) = (0.0, 0.0);
            let zr = if dim == 3 { r } else { 0 };
            for dz in -zr..=zr {
                let z = c[2] as i64 + dz;
                if z < 0 || z >= counts[2] as i64 {
                    continue;
                }
                let rz = r * r - dz * dz;
                let yr = isqrt(rz);
                for dy in -yr..=yr {
                    let y = c[1] as i64 + dy;
                    if y < 0 || y >= counts[1] as i64 {
                        continue;
                    }
                    let xr = isqrt(rz - dy * dy);
                    let row = y as usize + counts[1] * z as usize;
                    let (lo, hi) = (c[0] as i64 - xr, c[0] as i64 + xr);
                    sf += f_rows.range(row, lo, hi);
                    sw += w_rows.range(row, lo, hi);
                }
            }
            let avg = match mode {
                MaximalMode::Global => sf / (lattice_counts[ri] * cell),
                MaximalMode::Local => {
                    if sw > 0.0 {
                        sf / sw
                    } else {
                        0.0
                    }
                }
            };
            best = best.max(avg);
        }
        best
    });
    TensorField::from_values(&domain, 0, values).expect("one value per node")
}

fn lattice_ball_count(r: i64, dim: usize) -> i64 {
    let zr = if dim == 3 { r } else { 0 };
    let mut total = 0;
    for dz in -zr..=zr {
        let rz = r * r - dz * dz;
        let yr = isqrt(rz);
        for dy in -yr..=yr {
            total += 2 * isqrt(rz - dy * dy) + 1;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isqrt_is_exact() {
        for v in 0..10_000 {
            let r = isqrt(v);
            assert!(r * r <= v && (r + 1) * (r + 1) > v);
        }
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(lattice_ball_count(1, 2), 5);
        assert_eq!(lattice_ball_count(1, 3), 7);
        assert_eq!(lattice_ball_count(2, 2), 13);
    }
}
