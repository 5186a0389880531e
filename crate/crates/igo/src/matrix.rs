//! Dense symmetric positive definite matrix utilities.
//!
//! Everything here works on small dense matrices (the joint search space is
//! 18-dimensional, the state-space model is 2-dimensional). Decompositions go
//! through [`nalgebra`]'s symmetric eigensolver; this module wraps it behind a
//! validated [`SpdMatrix`] type and the handful of spectral helpers the
//! optimizer needs.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance used when checking that a matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),
}

/// A validated symmetric positive definite matrix.
///
/// Construction checks finiteness, symmetry (within [`SYMMETRY_TOL`] relative)
/// and strict positive definiteness, so downstream code can rely on those
/// invariants instead of re-checking them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    inner: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates `m` and wraps it. Fails if `m` is non-finite, asymmetric or
    /// has an eigenvalue `<= 0`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, MatrixError> {
        check_finite(&m)?;
        check_symmetric(&m)?;
        let min = min_symmetric_eigenvalue(&m);
        if min <= 0.0 {
            return Err(MatrixError::NotPositiveDefinite(min));
        }
        Ok(Self { inner: m })
    }

    /// Symmetrizes `m` as `(M + M^T) / 2` before validating.
    ///
    /// Covariance updates symmetrize explicitly after every step so that
    /// floating-point drift cannot accumulate across iterations.
    pub fn from_symmetrized(m: DMatrix<f64>) -> Result<Self, MatrixError> {
        let sym = symmetrize(&m);
        check_finite(&sym)?;
        let min = min_symmetric_eigenvalue(&sym);
        if min <= 0.0 {
            return Err(MatrixError::NotPositiveDefinite(min));
        }
        Ok(Self { inner: sym })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    /// Builds `diag(entries)`; every entry must be strictly positive.
    pub fn from_diagonal(entries: &[f64]) -> Result<Self, MatrixError> {
        let v = DVector::from_column_slice(entries);
        Self::new(DMatrix::from_diagonal(&v))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_symmetric_eigenvalue(&self.inner)
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Returns the eigenvalues sorted in descending order and the matching
/// eigenvector columns, so that `m = V diag(values) V^T`.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), MatrixError> {
    check_finite(m)?;
    check_symmetric(m)?;
    let eig = m.clone().symmetric_eigen();
    let dim = m.nrows();
    let mut order: Vec<usize> = (0..dim).collect();
    // Descending; ties keep first-encountered order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Symmetric SPD square root: the unique SPD `S` with `S * S = m`.
pub fn spd_sqrt(m: &SpdMatrix) -> SpdMatrix {
    let (values, vectors) = sym_eigen(m.as_matrix()).expect("SpdMatrix is symmetric and finite");
    let root = rebuild(&values.iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>(), &vectors);
    SpdMatrix {
        inner: symmetrize(&root),
    }
}

/// Inverse of the symmetric SPD square root, `m^{-1/2}`.
pub fn spd_inv_sqrt(m: &SpdMatrix) -> SpdMatrix {
    let (values, vectors) = sym_eigen(m.as_matrix()).expect("SpdMatrix is symmetric and finite");
    let root = rebuild(
        &values.iter().map(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt()).collect::<Vec<_>>(),
        &vectors,
    );
    SpdMatrix {
        inner: symmetrize(&root),
    }
}

/// Ratio of the largest to the smallest eigenvalue.
pub fn condition_number(m: &SpdMatrix) -> f64 {
    let (values, _) = sym_eigen(m.as_matrix()).expect("SpdMatrix is symmetric and finite");
    values[0] / values[values.len() - 1]
}

/// Largest singular value, computed as `sqrt(lambda_1(M^T M))`.
pub fn largest_singular_value(m: &DMatrix<f64>) -> Result<f64, MatrixError> {
    check_finite(m)?;
    let gram = symmetrize(&(m.transpose() * m));
    let (values, _) = sym_eigen(&gram)?;
    Ok(values[0].max(0.0).sqrt())
}

/// Frobenius norm, `sqrt(Tr(M^T M))`.
pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Computes `sqrt(a) * b * sqrt(a)` for SPD `a` and symmetric `b`.
///
/// The result is explicitly symmetrized; it shares the spectrum of
/// `a^{1/2} b a^{1/2}` which equals the spectrum of `a b`.
pub fn sqrt_sandwich(a: &SpdMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>, MatrixError> {
    if a.dim() != b.nrows() || b.nrows() != b.ncols() {
        return Err(MatrixError::DimensionMismatch(a.dim(), b.nrows()));
    }
    check_finite(b)?;
    check_symmetric(b)?;
    let root = spd_sqrt(a);
    Ok(symmetrize(&(root.as_matrix() * b * root.as_matrix())))
}

/// Condition number of the product `sigma * h` for SPD factors.
///
/// Computed on the similar symmetric form `sqrt(h) * sigma * sqrt(h)` so the
/// spectrum is real by construction.
pub fn condition_product(sigma: &SpdMatrix, h: &SpdMatrix) -> Result<f64, MatrixError> {
    let sym = sqrt_sandwich(h, sigma.as_matrix())?;
    let (values, _) = sym_eigen(&sym)?;
    Ok(values[0] / values[values.len() - 1])
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

fn rebuild(values: &[f64], vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(values));
    vectors * diag * vectors.transpose()
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), MatrixError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MatrixError::NonFinite)
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), MatrixError> {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            let scale = 1.0f64.max(m[(i, j)].abs());
            if gap > SYMMETRY_TOL * scale {
                worst = worst.max(gap);
            }
        }
    }
    if worst > 0.0 {
        Err(MatrixError::NotSymmetric(worst))
    } else {
        Ok(())
    }
}

fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
