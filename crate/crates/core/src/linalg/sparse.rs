//! Compressed sparse row matrices.

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// `b - A x` with every row accumulated in compensated arithmetic.
    pub fn residual_compensated(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|row| {
                let mut acc = super::CompensatedSum::new(b[row]);
                self.accumulate_row(row, -1.0, x, &mut acc);
                acc.value()
            })
            .collect()
    }

    /// Adds `scale * (row · x)` to a compensated sum.
    pub fn accumulate_row(&self, row: usize, scale: f64, x: &[f64], acc: &mut super::CompensatedSum) {
        for k in self.row_ptr[row]..self.row_ptr[row + 1] {
            acc.add_product(scale * self.values[k], x[self.col_idx[k]]);
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push((i, self.col_idx[k], self.values[k]));
            }
        }
        t
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha * A x`
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] += alpha * s;
        }
    }

    /// `A^T x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.matvec_t_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha * A^T x`
    pub fn matvec_t_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for i in 0..self.nrows {
            let xi = alpha * x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// `self + alpha * other`
    pub fn add(&self, alpha: f64, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Rows `rows` and columns `cols` of `self`, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut t = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = col_map[self.col_idx[k]];
                if j != usize::MAX {
                    t.push((new_i, j, self.values[k]));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &t)
    }

    /// Assembles a block matrix. `blocks[r][c]` may be `None` for a zero block;
    /// `row_sizes` and `col_sizes` give the block dimensions.
    pub fn from_blocks(blocks: &[Vec<Option<&CsrMatrix>>], row_sizes: &[usize], col_sizes: &[usize]) -> Self {
        let row_off: Vec<usize> = std::iter::once(0)
            .chain(row_sizes.iter().scan(0, |s, &n| {
                *s += n;
                Some(*s)
            }))
            .collect();
        let col_off: Vec<usize> = std::iter::once(0)
            .chain(col_sizes.iter().scan(0, |s, &n| {
                *s += n;
                Some(*s)
            }))
            .collect();
        let mut t = Vec::new();
        for (r, row) in blocks.iter().enumerate() {
            for (c, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    assert_eq!((b.nrows, b.ncols), (row_sizes[r], col_sizes[c]), "block ({r}, {c}) size");
                    t.extend(b.triplets().into_iter().map(|(i, j, v)| (i + row_off[r], j + col_off[c], v)));
                }
            }
        }
        Self::from_triplets(row_off[row_sizes.len()], col_off[col_sizes.len()], &t)
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.ncols];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[k];
                let r = self.col_idx[k];
                for kk in other.row_ptr[r]..other.row_ptr[r + 1] {
                    let j = other.col_idx[kk];
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * other.values[kk];
                }
            }
            for &j in &touched {
                t.push((i, j, acc[j]));
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, &t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `|a_ij - a_ji| ≤ tol · max|a|` for all entries.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let t = self.transpose();
        let d = self.add(-1.0, &t);
        d.max_abs() <= tol * scale
    }

    /// Pattern symmetry: `a_ij` stored iff `a_ji` stored.
    pub fn has_symmetric_pattern(&self) -> bool {
        let t = self.transpose();
        self.row_ptr == t.row_ptr && self.col_idx == t.col_idx
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Internal(format!("sparse conversion failed: {e:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 4.0), (0, 0, 0.5), (2, 2, 5.0)])
    }

    #[test]
    fn duplicates_summed_and_sorted() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)]);
        assert_eq!(a.row_ptr, vec![0, 2, 3]);
        assert_eq!(a.col_idx, vec![0, 2, 1]);
        assert_eq!(a.values, vec![2.0, 4.0, -1.0]);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = sample();
        let x = [1.0, -2.0, 0.5];
        let y = a.matvec(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((y[i] - yd[i]).abs() < 1e-15);
        }
        let yt = a.matvec_t(&x);
        let ytd = a.to_dense().transpose() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((yt[i] - ytd[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn transpose_submatrix_product() {
        let a = sample();
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
        let s = a.submatrix(&[2, 0], &[0, 2]);
        assert_eq!(s.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[4.0, 5.0, 1.5, 2.0]));
        assert_eq!(a.mul(&a).to_dense(), a.to_dense() * a.to_dense());
        assert!(!a.is_symmetric(1e-14));
        let sym = a.add(1.0, &a.transpose());
        assert!(sym.is_symmetric(1e-14));
        assert!(sym.has_symmetric_pattern());
    }

    #[test]
    fn block_assembly() {
        let i2 = CsrMatrix::identity(2);
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 1, 7.0)]);
        let bt = b.transpose();
        let m = CsrMatrix::from_blocks(&[vec![Some(&i2), Some(&bt)], vec![Some(&b), None]], &[2, 1], &[2, 1]);
        assert_eq!(
            m.to_dense(),
            nalgebra::DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 7.0, 0.0, 7.0, 0.0])
        );
    }
}
