//! Kuhn simplices on fully active grid cells.

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::GridDomain;

#[derive(Clone, Debug)]
pub(crate) struct Simplex {
    /// Vertices along the monotone lattice path `v₀ → v₀ + e_{a₀} → …`.
    pub path: [usize; 4],
    pub axes: [usize; 3],
    pub weight: f64,
    pub p: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Mesh {
    pub dim: usize,
    pub spacing: f64,
    pub simplices: Vec<Simplex>,
    /// Nodes touched by at least one simplex.
    pub used: Vec<bool>,
    /// Corner nodes of each lattice face on the boundary of the meshed cells.
    pub boundary_faces: Vec<Vec<usize>>,
}

fn permutations(n: usize) -> Vec<[usize; 3]> {
    match n {
        1 => vec![[0, 0, 0]],
        2 => vec![[0, 1, 0], [1, 0, 0]],
        _ => vec![
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ],
    }
}

/// Faces shared by exactly one meshed cell, as lists of their `2^(n-1)` corners.
fn boundary_faces(domain: &GridDomain, cells: &[bool]) -> Vec<Vec<usize>> {
    let n = domain.dim();
    let counts = domain.counts();
    let cell_at = |c: [usize; 3]| -> bool { (0..n).all(|k| c[k] + 1 < counts[k]) && cells[domain.index(c)] };
    let mut faces = Vec::new();
    for base in 0..domain.len() {
        let c = domain.coords(base);
        for axis in 0..n {
            // Face normal to `axis` through node `c`, spanned by the other axes.
            let others: Vec<usize> = (0..n).filter(|&k| k != axis).collect();
            if others.iter().any(|&k| c[k] + 1 >= counts[k]) {
                continue;
            }
            let above = cell_at(c);
            let below = c[axis] > 0 && {
                let mut b = c;
                b[axis] -= 1;
                cell_at(b)
            };
            if above == below {
                continue;
            }
            let corners = (0..1usize << others.len())
                .map(|mask| {
                    let mut ijk = c;
                    for (bit, &k) in others.iter().enumerate() {
                        ijk[k] += (mask >> bit) & 1;
                    }
                    domain.index(ijk)
                })
                .collect();
            faces.push(corners);
        }
    }
    faces
}

impl Mesh {
    pub fn build(domain: &GridDomain, p: &ExponentField) -> Result<Self> {
        let n = domain.dim();
        let h = domain.spacing();
        let counts = domain.counts();
        let perms = permutations(n);
        let factorial = perms.len() as f64;
        let weight = h.powi(n as i32) / factorial;
        let mut simplices = Vec::new();
        let mut used = vec![false; domain.len()];
        let mut cells = vec![false; domain.len()];
        for base in 0..domain.len() {
            let c = domain.coords(base);
            if (0..n).any(|k| c[k] + 1 >= counts[k]) {
                continue;
            }
            let corners_active = (0..1usize << n).all(|mask| {
                let mut ijk = c;
                for (k, v) in ijk.iter_mut().enumerate().take(n) {
                    *v += (mask >> k) & 1;
                }
                domain.is_active(domain.index(ijk))
            });
            if !corners_active {
                continue;
            }
            cells[base] = true;
            for perm in &perms {
                let mut path = [0usize; 4];
                let mut ijk = c;
                path[0] = base;
                for k in 0..n {
                    ijk[perm[k]] += 1;
                    path[k + 1] = domain.index(ijk);
                }
                let pm = path[..=n].iter().map(|&i| p.value(i)).sum::<f64>() / (n + 1) as f64;
                for &v in &path[..=n] {
                    used[v] = true;
                }
                simplices.push(Simplex {
                    path,
                    axes: *perm,
                    weight,
                    p: pm,
                });
            }
        }
        if simplices.is_empty() {
            return Err(Error::InvalidParameter("domain has no fully active cell".into()));
        }
        let boundary_faces = boundary_faces(domain, &cells);
        Ok(Self {
            dim: n,
            spacing: h,
            simplices,
            used,
            boundary_faces,
        })
    }

    /// Row-major `G[i·n + a] = ∂_a u_i` on simplex `s`.
    #[inline]
    pub fn gradient(&self, s: &Simplex, u: &[f64], out: &mut [f64; 9]) {
        let n = self.dim;
        for k in 0..n {
            let a = s.axes[k];
            let (from, to) = (s.path[k], s.path[k + 1]);
            for i in 0..n {
                out[i * n + a] = (u[to * n + i] - u[from * n + i]) / self.spacing;
            }
        }
    }

    /// Adds the adjoint of [`Mesh::gradient`] applied to `dg` into `grad`.
    #[inline]
    pub fn scatter(&self, s: &Simplex, dg: &[f64; 9], grad: &mut [f64]) {
        let n = self.dim;
        for k in 0..n {
            let a = s.axes[k];
            let (from, to) = (s.path[k], s.path[k + 1]);
            for i in 0..n {
                let v = dg[i * n + a] / self.spacing;
                grad[to * n + i] += v;
                grad[from * n + i] -= v;
            }
        }
    }

    pub fn measure(&self) -> f64 {
        self.simplices.iter().map(|s| s.weight).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.simplices.iter().map(|s| s.weight).collect()
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.simplices.iter().map(|s| s.p).collect()
    }
}
