//! Sparse direct factorizations.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Col, Side};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug)]
enum Inner {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// Reusable factorization of a square sparse matrix. Immutable after
/// construction; concurrent solves against different right-hand sides are
/// safe.
#[derive(Debug)]
pub struct Factorization {
    inner: Inner,
    n: usize,
    block: String,
}

impl Factorization {
    /// Factorizes `a`. With `spd_hint` a sparse Cholesky factorization is
    /// tried first, falling back to LU when it fails.
    pub fn new(a: &CsrMatrix, spd_hint: bool, block: &str) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::InvalidArgument(format!(
                "block `{block}` is not square ({}x{})",
                a.nrows, a.ncols
            )));
        }
        let singular = || Error::SingularMatrix { block: block.to_string() };
        let m = a.to_faer()?;
        let inner = if spd_hint {
            match m.sp_cholesky(Side::Lower) {
                Ok(llt) => Inner::Cholesky(llt),
                Err(_) => Inner::Lu(m.sp_lu().map_err(|_| singular())?),
            }
        } else {
            Inner::Lu(m.sp_lu().map_err(|_| singular())?)
        };
        let f = Factorization {
            inner,
            n: a.nrows,
            block: block.to_string(),
        };
        // a singular pivot shows up as a non-finite solution
        let probe: Vec<f64> = (0..f.n).map(|i| 1.0 + (i % 7) as f64 * 0.125).collect();
        f.solve(&probe)?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn block(&self) -> &str {
        &self.block
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.inner, Inner::Cholesky(_))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        assert_eq!(b.len(), self.n, "right-hand side length for block `{}`", self.block);
        if self.n == 0 {
            return Ok(());
        }
        let mut col = Col::<f64>::from_fn(self.n, |i| b[i]);
        match &self.inner {
            Inner::Cholesky(f) => f.solve_in_place(col.as_mat_mut()),
            Inner::Lu(f) => f.solve_in_place(col.as_mat_mut()),
        }
        for (i, bi) in b.iter_mut().enumerate() {
            *bi = col[i];
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { block: self.block.clone() });
        }
        Ok(())
    }

    /// Solve followed by `steps` rounds of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64], steps: usize) -> Result<Vec<f64>> {
        let mut x = self.solve(b)?;
        for _ in 0..steps {
            let d = self.solve(&a.residual_compensated(b, &x))?;
            super::axpy(1.0, &d, &mut x);
        }
        Ok(x)
    }
}

/// Factorizes `a`, reporting failures under the name `block`.
pub fn factorize(a: &CsrMatrix, spd_hint: bool, block: &str) -> Result<Factorization> {
    Factorization::new(a, spd_hint, block)
}
