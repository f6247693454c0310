use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::domain::GridDomain;
use super::geometry::Point;
use crate::error::{Error, Result};
use crate::par;

/// Scalar (rank 0), vector (rank 1) or matrix (rank 2) field on a grid.
///
/// Matrix samples are stored row-major: component `(i, j)` of node `k` is
/// `values[k * n * n + i * n + j]`, so a gradient stores `∂_j u_i` at `(i, j)`.
#[derive(Clone, Debug)]
pub struct TensorField {
    domain: Arc<GridDomain>,
    rank: usize,
    values: Vec<f64>,
}

/// Flat JSON form `{shape, spacing, rank, values}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldRecord {
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub rank: usize,
    pub values: Vec<f64>,
}

impl TensorField {
    pub fn zeros(domain: &Arc<GridDomain>, rank: usize) -> Self {
        assert!(rank <= 2, "rank must be 0, 1 or 2");
        let ncomp = domain.dim().pow(rank as u32);
        Self {
            domain: Arc::clone(domain),
            rank,
            values: vec![0.0; ncomp * domain.len()],
        }
    }

    pub fn from_values(domain: &Arc<GridDomain>, rank: usize, values: Vec<f64>) -> Result<Self> {
        if rank > 2 {
            return Err(Error::InvalidParameter(format!("rank {rank} > 2")));
        }
        let ncomp = domain.dim().pow(rank as u32);
        if values.len() != ncomp * domain.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                ncomp * domain.len(),
                values.len()
            )));
        }
        Ok(Self {
            domain: Arc::clone(domain),
            rank,
            values,
        })
    }

    /// Samples `f(x, out)` at every active node; inactive nodes stay zero.
    pub fn from_fn<F>(domain: &Arc<GridDomain>, rank: usize, f: F) -> Self
    where
        F: Fn(&Point, &mut [f64]) + Sync + Send,
    {
        let mut field = Self::zeros(domain, rank);
        let ncomp = field.ncomp();
        let d = Arc::clone(domain);
        par::for_each_chunk_mut(&mut field.values, ncomp, |i, out| {
            if d.is_active(i) {
                f(&d.position(i), out);
            }
        });
        field
    }

    pub fn scalar_fn<F>(domain: &Arc<GridDomain>, f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Sync + Send,
    {
        Self::from_fn(domain, 0, |x, out| out[0] = f(x))
    }

    /// Vector field from a closure returning up to three components.
    pub fn vector_fn<F>(domain: &Arc<GridDomain>, f: F) -> Self
    where
        F: Fn(&Point) -> [f64; 3] + Sync + Send,
    {
        Self::from_fn(domain, 1, |x, out| {
            let v = f(x);
            out.copy_from_slice(&v[..out.len()]);
        })
    }

    /// Constant matrix field.
    pub fn constant_matrix(domain: &Arc<GridDomain>, a: &DMatrix<f64>) -> Self {
        let n = domain.dim();
        Self::from_fn(domain, 2, |_, out| {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = a[(i, j)];
                }
            }
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn ncomp(&self) -> usize {
        self.domain.dim().pow(self.rank as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let c = self.ncomp();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.ncomp();
        &mut self.values[i * c..(i + 1) * c]
    }

    /// Matrix sample at node `i` (rank 2 only).
    pub fn matrix_at(&self, i: usize) -> DMatrix<f64> {
        debug_assert_eq!(self.rank, 2);
        let n = self.dim();
        DMatrix::from_row_slice(n, n, self.node(i))
    }

    pub fn set_matrix(&mut self, i: usize, a: &DMatrix<f64>) {
        let n = self.dim();
        let out = self.node_mut(i);
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = a[(r, c)];
            }
        }
    }

    /// Pointwise magnitude (absolute value, Euclidean or Frobenius norm).
    pub fn magnitudes(&self) -> Vec<f64> {
        let c = self.ncomp();
        self.values
            .chunks(c)
            .map(|v| {
                if c == 1 {
                    v[0].abs()
                } else {
                    v.iter().map(|x| x * x).sum::<f64>().sqrt()
                }
            })
            .collect()
    }

    /// Pointwise magnitudes as a rank-0 field.
    pub fn magnitude_field(&self) -> TensorField {
        TensorField {
            domain: Arc::clone(&self.domain),
            rank: 0,
            values: self.magnitudes(),
        }
    }

    /// Extracts component `k` of a vector field as a scalar field.
    pub fn component(&self, k: usize) -> TensorField {
        let c = self.ncomp();
        TensorField {
            domain: Arc::clone(&self.domain),
            rank: 0,
            values: self.values.chunks(c).map(|v| v[k]).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> TensorField {
        self.map_values(|v| s * v)
    }

    pub fn map_values<F: Fn(f64) -> f64>(&self, f: F) -> TensorField {
        TensorField {
            domain: Arc::clone(&self.domain),
            rank: self.rank,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    fn check_compatible(&self, other: &TensorField) -> Result<()> {
        if !self.domain.same_grid(&other.domain) {
            return Err(Error::DomainMismatch);
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &TensorField, b: f64) -> Result<TensorField> {
        self.check_compatible(other)?;
        Ok(TensorField {
            domain: Arc::clone(&self.domain),
            rank: self.rank,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        self.axpby(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.axpby(1.0, other, -1.0)
    }

    /// Multiplies every node sample by the scalar field `s`.
    pub fn mul_scalar_field(&self, s: &TensorField) -> Result<TensorField> {
        if !self.domain.same_grid(&s.domain) {
            return Err(Error::DomainMismatch);
        }
        if s.rank != 0 {
            return Err(Error::RankMismatch {
                expected: 0,
                found: s.rank,
            });
        }
        let c = self.ncomp();
        let mut out = self.clone();
        for (i, chunk) in out.values.chunks_mut(c).enumerate() {
            chunk.iter_mut().for_each(|v| *v *= s.values[i]);
        }
        Ok(out)
    }

    /// Zeroes every node where `keep` is false.
    pub fn masked(&self, keep: &[bool]) -> TensorField {
        let c = self.ncomp();
        let mut out = self.clone();
        for (i, chunk) in out.values.chunks_mut(c).enumerate() {
            if !keep[i] {
                chunk.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        out
    }

    /// Subtracts a constant matrix from a rank-2 field.
    pub fn sub_matrix(&self, a: &DMatrix<f64>) -> TensorField {
        debug_assert_eq!(self.rank, 2);
        let n = self.dim();
        let mut out = self.clone();
        for (i, chunk) in out.values.chunks_mut(n * n).enumerate() {
            if !self.domain.is_active(i) {
                continue;
            }
            for r in 0..n {
                for c in 0..n {
                    chunk[r * n + c] -= a[(r, c)];
                }
            }
        }
        out
    }

    /// Largest pointwise magnitude over active nodes.
    pub fn sup_norm(&self) -> f64 {
        self.magnitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.domain.is_active(*i))
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }

    /// Largest pointwise magnitude over nodes where `mask` is true.
    pub fn sup_norm_on(&self, mask: &[bool]) -> f64 {
        self.magnitudes()
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .fold(0.0, f64::max)
    }

    pub fn to_record(&self) -> FieldRecord {
        FieldRecord {
            shape: self.domain.grid_shape(),
            spacing: self.domain.spacing(),
            rank: self.rank,
            values: self.values.clone(),
        }
    }

    pub fn from_record(domain: &Arc<GridDomain>, record: &FieldRecord) -> Result<Self> {
        if record.shape != domain.grid_shape() || record.spacing != domain.spacing() {
            return Err(Error::DomainMismatch);
        }
        Self::from_values(domain, record.rank, record.values.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(domain: &Arc<GridDomain>, json: &str) -> Result<Self> {
        let record: FieldRecord = serde_json::from_str(json)?;
        Self::from_record(domain, &record)
    }
}
