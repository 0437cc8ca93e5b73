//! Thin wrappers over `nalgebra-sparse` with the slice-based interface the
//! grid and solver use.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix(nalgebra_sparse::CsrMatrix<f64>);

impl CsrMatrix {
    /// Assembles from triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        let mut coo = CooMatrix::new(nrows, ncols);
        for (i, j, v) in triplets {
            coo.push(i, j, v);
        }
        Self(nalgebra_sparse::CsrMatrix::from(&coo))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.0.nnz()
    }

    /// Iterates `(col, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.0.row_offsets()[i], self.0.row_offsets()[i + 1]);
        self.0.col_indices()[lo..hi].iter().copied().zip(self.0.values()[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(y.len(), self.nrows());
        for (yi, r) in y.iter_mut().zip(self.0.row_iter()) {
            *yi = r.col_indices().iter().zip(r.values()).map(|(&j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Smallest `b` with `A[i][j] == 0` whenever `|i - j| > b`.
    pub fn bandwidth(&self) -> usize {
        self.0.triplet_iter().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.0.triplet_iter().all(|(i, j, v)| self.get(j, i) == *v)
    }

    /// Returns `alpha * I + beta * A`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let mut triplets: Vec<_> = (0..self.nrows()).map(|i| (i, i, alpha)).collect();
        triplets.extend(self.0.triplet_iter().map(|(i, j, v)| (i, j, beta * v)));
        Self::from_triplets(self.nrows(), self.ncols(), triplets)
    }
}

/// Sparse Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    factor: CscCholesky<f64>,
}

impl SparseCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Solver("matrix is not square".into()));
        }
        let csc = CscMatrix::from(&a.0);
        let factor = CscCholesky::factor(&csc).map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e}")))?;
        Ok(Self { n: a.nrows(), factor })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        let mut b = DMatrix::from_column_slice(self.n, 1, x);
        self.factor.solve_mut(&mut b);
        x.copy_from_slice(b.as_slice());
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
