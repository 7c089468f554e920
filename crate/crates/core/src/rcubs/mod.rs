//! Compressed storage for matrices whose pattern is an RBGP chain product.
//!
//! The chain's factor adjacency lists are the whole index; values are a dense
//! `rows × row_nnz` array ordered by each row's sorted column enumeration.

mod format;

pub use format::{deserialize, deserialize_any, fnv1a64, serialize, AnyRcubs, FORMAT_VERSION, MAGIC};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Scalar};
use crate::product::RbgpChain;

#[derive(Debug, Clone, PartialEq)]
pub struct RcubsMatrix<T = f64> {
    chain: RbgpChain,
    rows: usize,
    cols: usize,
    row_nnz: usize,
    values: Vec<T>,
}

/// Canonical compressed-sparse-rows export.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T = f64> {
    pub rows: usize,
    pub cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T> CsrMatrix<T> {
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryFootprint {
    pub value_bytes: u128,
    /// All factor adjacency lists, `Σ |E(G_i)|` entries.
    pub index_bytes: u128,
    pub dense_equivalent_bytes: u128,
    /// Values plus one index per edge: `2 |E|` entries.
    pub unstructured_equivalent_bytes: u128,
    /// `|E| / Σ |E(G_i)|`.
    pub index_reduction: f64,
}

impl<T: Scalar> RcubsMatrix<T> {
    pub fn new(chain: RbgpChain, values: Vec<T>) -> Result<Self> {
        let (rows, cols) = chain.dims()?;
        let row_nnz = chain.row_nnz();
        let expected = rows
            .checked_mul(row_nnz)
            .ok_or_else(|| Error::Capacity(format!("{rows} rows x {row_nnz} values")))?;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "chain needs {expected} values ({rows} x {row_nnz}), got {}",
                values.len()
            )));
        }
        Ok(Self {
            chain,
            rows,
            cols,
            row_nnz,
            values,
        })
    }

    pub fn zeros(chain: RbgpChain) -> Result<Self> {
        let n = chain.dims()?.0 * chain.row_nnz();
        Self::new(chain, vec![T::zero(); n])
    }

    pub fn chain(&self) -> &RbgpChain {
        &self.chain
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_nnz(&self) -> usize {
        self.row_nnz
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row_values(&self, u: usize) -> &[T] {
        &self.values[u * self.row_nnz..(u + 1) * self.row_nnz]
    }

    pub fn cast<U: Scalar>(&self) -> RcubsMatrix<U> {
        RcubsMatrix {
            chain: self.chain.clone(),
            rows: self.rows,
            cols: self.cols,
            row_nnz: self.row_nnz,
            values: self.values.iter().map(|v| U::from_f64(v.widen())).collect(),
        }
    }

    /// Gathers on-pattern entries; fails on the first off-pattern nonzero.
    pub fn from_dense(d: &DenseMatrix<T>, chain: RbgpChain) -> Result<Self> {
        let (rows, cols) = chain.dims()?;
        if d.shape() != (rows, cols) {
            return Err(Error::Shape(format!(
                "dense matrix is {:?}, chain product is ({rows}, {cols})",
                d.shape()
            )));
        }
        let mut values = Vec::with_capacity(rows * chain.row_nnz());
        for u in 0..rows {
            let cols_u = chain.neighbors(u)?;
            let row = d.row(u);
            let mut next = 0;
            for (c, &x) in row.iter().enumerate() {
                if next < cols_u.len() && cols_u[next] == c {
                    values.push(x);
                    next += 1;
                } else if !x.is_zero() {
                    return Err(Error::PatternViolation { row: u, col: c });
                }
            }
        }
        Self::new(chain, values)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for u in 0..self.rows {
            let cols_u = self.chain.neighbors(u).expect("row in range");
            let row = d.row_mut(u);
            for (&c, &x) in cols_u.iter().zip(self.row_values(u)) {
                row[c] = x;
            }
        }
        d
    }

    pub fn to_unstructured(&self) -> CsrMatrix<T> {
        let mut row_offsets = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for u in 0..self.rows {
            col_indices.extend(self.chain.neighbors(u).expect("row in range"));
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values: self.values.clone(),
        }
    }

    pub fn memory_footprint(&self, value_width: usize, index_width: usize) -> MemoryFootprint {
        let edges = self.nnz() as u128;
        let stored: u128 = self.chain.graphs().iter().map(|g| g.edge_count() as u128).sum();
        let (vw, iw) = (value_width as u128, index_width as u128);
        MemoryFootprint {
            value_bytes: edges * vw,
            index_bytes: stored * iw,
            dense_equivalent_bytes: self.rows as u128 * self.cols as u128 * vw,
            unstructured_equivalent_bytes: edges * (vw + iw),
            index_reduction: edges as f64 / stored as f64,
        }
    }

    /// I.i.d. uniform values in `±scale·√(1/row_nnz)`.
    pub fn init_random<R: Rng + ?Sized>(chain: RbgpChain, rng: &mut R, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        let (rows, _) = chain.dims()?;
        let row_nnz = chain.row_nnz();
        let bound = scale * (1.0 / row_nnz as f64).sqrt();
        let values = (0..rows * row_nnz)
            .map(|_| T::from_f64(rng.gen_range(-bound..=bound)))
            .collect();
        Self::new(chain, values)
    }
}

/// Columns of row `u` of the chain product, sorted ascending.
pub fn neighbors(chain: &RbgpChain, u: usize) -> Result<Vec<usize>> {
    chain.neighbors(u)
}
