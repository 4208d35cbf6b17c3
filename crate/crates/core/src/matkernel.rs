//! Dense symmetric small-matrix kernel.
//!
//! Everything here is built on a single factorization primitive: the
//! symmetric eigendecomposition (nalgebra's tridiagonalize-and-iterate
//! `SymmetricEigen`). Log-determinants, inverses, square roots, PSD-order
//! tests and box projections all go through it, so there is one numerical
//! code path to trust at the M <= 8 scale this crate targets. Cholesky
//! appears only as an independent oracle in tests.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance for positive-definiteness checks.
pub const PD_TOL: f64 = 1e-10;
/// Relative asymmetry tolerated on ingest before a matrix is rejected.
pub const SYM_TOL: f64 = 1e-12;

/// General (possibly rectangular) real matrix, used for channel matrices.
pub type GenMatrix = DMatrix<f64>;

/// Real symmetric matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

/// Eigendecomposition of a [`SymMatrix`]: `A = V diag(values) V^T`.
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates squareness and symmetry (relative tolerance 1e-12), then
    /// stores the exactly symmetrized matrix `(A + A^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.is_empty() {
            return Err(Error::InvalidInstance("matrix dimension must be >= 1".into()));
        }
        let scale = m.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
        let mut max_asym = 0.0_f64;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if max_asym > SYM_TOL * scale {
            return Err(Error::NotSymmetric { max_asym });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation. For matrices that are symmetric by
    /// construction (congruences, eigen-reconstructions) up to round-off.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let s = 0.5 * (&m + m.transpose());
        SymMatrix { m: s }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInstance(
                "matrix rows must be non-empty and square".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        SymMatrix {
            m: DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix { m: &self.m * c }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m - &other.m,
        }
    }

    pub fn sym_eigen(&self) -> SymEigen {
        let se = SymmetricEigen::new(self.m.clone());
        SymEigen {
            values: se.eigenvalues.iter().copied().collect(),
            vectors: se.eigenvectors,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eigen().values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.sym_eigen()
            .values
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut seq = serializer.serialize_seq(Some(n))?;
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|j| self.m[(i, j)]).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl SymEigen {
    fn reconstruct(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = DMatrix::from_fn(self.values.len(), self.values.len(), |i, j| {
            if i == j {
                f(self.values[i])
            } else {
                0.0
            }
        });
        SymMatrix::symmetrized(&self.vectors * d * self.vectors.transpose())
    }

    fn pd_tol(&self) -> f64 {
        let spectral = self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        PD_TOL * spectral.max(1.0)
    }

    fn require_pd(&self) -> Result<()> {
        let tol = self.pd_tol();
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= tol {
            return Err(Error::NotPositiveDefinite { min_eig: min, tol });
        }
        Ok(())
    }
}

/// Natural-log determinant of a positive definite matrix.
pub fn logdet(a: &SymMatrix) -> Result<f64> {
    let eig = a.sym_eigen();
    eig.require_pd()?;
    Ok(eig.values.iter().map(|v| v.ln()).sum())
}

/// Inverse of a positive definite matrix, via its eigendecomposition.
pub fn inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = a.sym_eigen();
    eig.require_pd()?;
    Ok(eig.reconstruct(|v| 1.0 / v))
}

/// PSD order test: `a <= b` iff `min eig(b - a) >= -tol * max(1, ||b - a||)`.
pub fn psd_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let diff = b.sub(a);
    let eig = diff.sym_eigen();
    let spectral = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min >= -tol * spectral.max(1.0))
}

/// Signed violation of `a <= b` in the PSD order, relative to spectral scale.
/// Zero when the order holds; positive otherwise.
pub fn psd_leq_violation(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let diff = b.sub(a);
    let eig = diff.sym_eigen();
    let spectral = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((-min / spectral.max(1.0)).max(0.0))
}

/// Projects `x` onto the matrix interval `[0, upper]` in upper-whitened
/// coordinates: eigenvalues of `upper^{-1/2} x upper^{-1/2}` are clipped to
/// `[0, 1]` and mapped back. Exact and order-preserving, though not the
/// Frobenius-nearest point in the original coordinates.
pub fn project_box(x: &SymMatrix, upper: &SymMatrix) -> Result<SymMatrix> {
    if x.dim() != upper.dim() {
        return Err(Error::DimensionMismatch {
            expected: upper.dim(),
            got: x.dim(),
        });
    }
    let eig_u = upper.sym_eigen();
    eig_u.require_pd()?;
    let half = eig_u.reconstruct(f64::sqrt);
    let neg_half = eig_u.reconstruct(|v| 1.0 / v.sqrt());
    let whitened =
        SymMatrix::symmetrized(neg_half.as_dmatrix() * x.as_dmatrix() * neg_half.as_dmatrix());
    let clipped = whitened.sym_eigen().reconstruct(|v| v.clamp(0.0, 1.0));
    Ok(SymMatrix::symmetrized(
        half.as_dmatrix() * clipped.as_dmatrix() * half.as_dmatrix(),
    ))
}

/// Symmetric PSD square root.
pub fn sym_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = a.sym_eigen();
    let tol = eig.pd_tol();
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPositiveSemiDefinite { min_eig: min });
    }
    Ok(eig.reconstruct(|v| v.max(0.0).sqrt()))
}

/// Congruence `c^T s c` for a channel matrix `c` (r x m) and symmetric `s`
/// (r x r); the result is m x m and symmetric.
pub fn congruence(c: &GenMatrix, s: &SymMatrix) -> SymMatrix {
    SymMatrix::symmetrized(c.transpose() * s.as_dmatrix() * c)
}
