//! Small wrappers over dense and sparse factorizations of symmetric
//! matrices given as a diagonal plus off-diagonal triplets.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest size factorized densely under [`Backend::Auto`].
pub const DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl Backend {
    pub fn dense_for(self, n: usize) -> bool {
        match self {
            Backend::Auto => n <= DENSE_LIMIT,
            Backend::Dense => true,
            Backend::Sparse => false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("eigen decomposition did not converge")]
    Eigen,
}

/// Symmetric matrix as a diagonal plus off-diagonal entries (both triangles).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymTriplets {
    pub diag: Vec<f64>,
    pub off: Vec<(usize, usize, f64)>,
}

impl SymTriplets {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.len();
        let mut a = Mat::<f64>::zeros(n, n);
        for (i, &v) in self.diag.iter().enumerate() {
            a[(i, i)] = v;
        }
        for &(i, j, v) in &self.off {
            a[(i, j)] += v;
        }
        a
    }

    pub fn to_sparse(&self) -> Result<SparseColMat<usize, f64>, LinalgError> {
        let n = self.len();
        let mut t: Vec<Triplet<usize, usize, f64>> =
            self.diag.iter().enumerate().map(|(i, &v)| Triplet::new(i, i, v)).collect();
        t.extend(self.off.iter().map(|&(i, j, v)| Triplet::new(i, j, v)));
        SparseColMat::try_new_from_triplets(n, n, &t).map_err(|e| LinalgError::Factorization(format!("{e:?}")))
    }

    /// `max_i sum_j |off(i, j)|`, an upper bound for the spectral norm of the
    /// off-diagonal part.
    pub fn off_row_sum(&self) -> f64 {
        let mut rows = vec![0.0; self.len()];
        for &(i, _, v) in &self.off {
            rows[i] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(i, j, v) in &self.off {
            y[i] += v * x[j];
        }
        y
    }
}

/// Solves `A x = rhs`.
pub fn solve(a: &SymTriplets, rhs: &[f64], backend: Backend) -> Result<Vec<f64>, LinalgError> {
    let n = a.len();
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = if backend.dense_for(n) {
        a.to_dense().partial_piv_lu().solve(&b)
    } else {
        let lu = a.to_sparse()?.sp_lu().map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        lu.solve(&b)
    };
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(LinalgError::Factorization("non-finite solution".into()))
    }
}

/// Dense inverse through a partially pivoted LU.
pub fn inverse(a: &Mat<f64>) -> Mat<f64> {
    a.partial_piv_lu().inverse()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>, LinalgError> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut v = a.self_adjoint_eigenvalues(Side::Lower).map_err(|_| LinalgError::Eigen)?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Eigenpairs of a symmetric matrix; eigenvectors are the columns.
pub fn sym_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>), LinalgError> {
    let e = a.self_adjoint_eigen(Side::Lower).map_err(|_| LinalgError::Eigen)?;
    let n = a.nrows();
    let vals: Vec<f64> = (0..n).map(|i| e.S()[i]).collect();
    let vecs = Mat::<f64>::from_fn(n, n, |i, j| e.U()[(i, j)]);
    Ok((vals, vecs))
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(a: &Mat<f64>) -> Result<f64, LinalgError> {
    Ok(sym_eigenvalues(a)?.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
}

/// Largest singular value of a general matrix.
pub fn op_norm(a: &Mat<f64>) -> Result<f64, LinalgError> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let s = a.singular_values().map_err(|_| LinalgError::Eigen)?;
    Ok(s.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
}

/// `max_{ij} |a_ij - [i == j]|`.
pub fn identity_defect(a: &Mat<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let e = if i == j { 1.0 } else { 0.0 };
            m = m.max((a[(i, j)] - e).abs());
        }
    }
    m
}
