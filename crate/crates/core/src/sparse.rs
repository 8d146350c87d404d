//! Compressed sparse row matrices with shareable sparsity patterns.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::StructuredTriMesh;

/// Row-compressed sparsity pattern with sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Build from per-row column lists (duplicates removed).
    pub fn from_rows(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            assert!(cols.last().is_none_or(|&c| c < ncols), "column out of range");
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        Pattern {
            nrows,
            ncols,
            row_ptr,
            col_idx,
        }
    }

    /// Node-to-node coupling of P1 elements (every node couples with itself).
    pub fn for_mesh(mesh: &StructuredTriMesh) -> Self {
        let n = mesh.num_nodes();
        let mut rows = vec![Vec::with_capacity(7); n];
        for tri in mesh.elements() {
            for &a in tri {
                rows[a].extend_from_slice(tri);
            }
        }
        Self::from_rows(n, rows)
    }

    /// `blocks x blocks` arrangement of copies of `self`.
    pub fn blocked(&self, blocks: usize) -> Self {
        let mut rows = Vec::with_capacity(self.nrows * blocks);
        for _ in 0..blocks {
            for r in 0..self.nrows {
                let cols = self.row(r);
                let mut row = Vec::with_capacity(cols.len() * blocks);
                for bc in 0..blocks {
                    row.extend(cols.iter().map(|&c| bc * self.ncols + c));
                }
                rows.push(row);
            }
        }
        Self::from_rows(self.ncols * blocks, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Storage position of entry `(r, c)`, if it is structurally present.
    #[inline]
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.row(r).binary_search(&c).ok().map(|k| start + k)
    }
}

/// Sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Pattern::from_rows(n, (0..n).map(|i| vec![i]).collect());
        SparseMatrix {
            pattern: Arc::new(pattern),
            values: vec![1.0; n],
        }
    }

    /// Assemble from `(row, col, value)` triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::zeros(Arc::new(Pattern::from_rows(ncols, rows)));
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Accumulate into a structurally present entry.
    ///
    /// Panics if `(r, c)` is not part of the pattern.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .pattern
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Iterate `(column, value)` over the stored entries of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1];
        self.pattern.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        let p = &self.pattern;
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                s += self.values[k] * x[p.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows = vec![Vec::new(); self.ncols()];
        for r in 0..self.nrows() {
            for (c, _) in self.row(r) {
                rows[c].push(r);
            }
        }
        let mut t = Self::zeros(Arc::new(Pattern::from_rows(self.nrows(), rows)));
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                t.add(c, r, v);
            }
        }
        t
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(mut self, alpha: f64) -> Self {
        self.scale(alpha);
        self
    }

    /// `self += alpha * other`; both matrices must share a pattern.
    pub fn axpy(&mut self, alpha: f64, other: &SparseMatrix) -> Result<()> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && self.pattern != other.pattern {
            return Err(Error::PatternMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Replace every row flagged in `mask` by the corresponding identity row.
    pub fn set_identity_rows(&mut self, mask: &[bool], offset: usize) {
        let p = self.pattern.clone();
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            let r = offset + i;
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                self.values[k] = if p.col_idx[k] == r { 1.0 } else { 0.0 };
            }
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.ncols()];
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                s[c] += v;
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols()]; self.nrows()];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }
}
