//! SPD matrix primitives and scalar special functions.

mod special;

pub use special::{digamma, ln_gamma, ln_multigamma, trigamma};
pub(crate) use special::{digamma_dof_sum, digamma_raw, trigamma_dof_sum};

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative asymmetry accepted at construction before rejecting the input.
const SYMMETRY_RTOL: f64 = 1e-12;

/// A Cholesky pivot must exceed this fraction of the largest diagonal entry.
const PIVOT_RTOL: f64 = 1e-12;

/// Eigenvalues above `-EIGEN_RTOL * λ_max` are accepted as semidefinite.
const EIGEN_RTOL: f64 = 1e-10;

/// Symmetrize in place: `(A + Aᵀ) / 2`. Applied after every multiplication
/// chain to stop asymmetry drift from accumulating over long recursions.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Returns the symmetrized copy of `m`.
pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    symmetrize(&mut out);
    out
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Pivots that fall at or below `1e-12` times the largest diagonal entry are
/// rejected, with the 1-based index of the offending leading minor reported.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.ncols() });
    }
    let max_diag = (0..d).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max);
    let tol = PIVOT_RTOL * max_diag.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > tol) {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..d {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Symmetric positive (semi)definite matrix with a cached Cholesky factor.
///
/// Inputs are symmetrized on construction; asymmetry beyond `1e-12` relative
/// tolerance is rejected. Strict constructors verify positive definiteness
/// through the factorization; [`SpdMatrix::new_semidefinite`] admits the
/// boundary of the cone (zero noise matrices, non-centrality parameters).
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    chol: OnceLock<DMatrix<f64>>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    /// Strictly positive definite constructor.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let mat = Self::checked_symmetrize(mat)?;
        let chol = cholesky_lower(&mat)?;
        let cell = OnceLock::new();
        let _ = cell.set(chol);
        Ok(Self { mat, chol: cell })
    }

    /// Positive semidefinite constructor; eigenvalues down to
    /// `-1e-10 · λ_max` are tolerated as roundoff.
    pub fn new_semidefinite(mat: DMatrix<f64>) -> Result<Self> {
        let mat = Self::checked_symmetrize(mat)?;
        let eig = mat.clone().symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(0.0f64, f64::max);
        let floor = -EIGEN_RTOL * max.max(f64::MIN_POSITIVE);
        if let Some((idx, _)) = eig.iter().enumerate().find(|(_, &l)| l < floor) {
            return Err(Error::NotPositiveDefinite { minor: idx + 1 });
        }
        Ok(Self { mat, chol: OnceLock::new() })
    }

    /// Builds `F Fᵀ`, positive semidefinite by construction.
    pub fn from_factor(factor: &DMatrix<f64>) -> Self {
        let mut mat = factor * factor.transpose();
        symmetrize(&mut mat);
        Self { mat, chol: OnceLock::new() }
    }

    pub fn identity(d: usize) -> Self {
        Self { mat: DMatrix::identity(d, d), chol: OnceLock::new() }
    }

    /// The zero matrix; valid only where the semidefinite cone is allowed.
    pub fn zeros(d: usize) -> Self {
        Self { mat: DMatrix::zeros(d, d), chol: OnceLock::new() }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Domain("diagonal entries must be positive and finite".into()));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    fn checked_symmetrize(mat: DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = mat.nrows();
        if mat.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mat.ncols() });
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        let scale = mat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let asym = (&mat - mat.transpose()).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale > 0.0 && asym > SYMMETRY_RTOL * scale {
            return Err(Error::NotSymmetric { asymmetry: asym / scale });
        }
        Ok(symmetrized(&mat))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        self.mat.clone()
    }

    pub fn is_zero(&self) -> bool {
        self.mat.iter().all(|&v| v == 0.0)
    }

    /// Lower Cholesky factor, computed once and cached.
    pub fn chol_lower(&self) -> Result<&DMatrix<f64>> {
        if let Some(l) = self.chol.get() {
            return Ok(l);
        }
        let l = cholesky_lower(&self.mat)?;
        Ok(self.chol.get_or_init(|| l))
    }

    /// `ln |A|` via the factorization.
    pub fn logdet(&self) -> Result<f64> {
        let l = self.chol_lower()?;
        Ok(2.0 * (0..self.dim()).map(|i| l[(i, i)].ln()).sum::<f64>())
    }

    /// Solves `A X = B`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let l = self.chol_lower()?;
        let y = l
            .solve_lower_triangular(rhs)
            .ok_or(Error::NotPositiveDefinite { minor: self.dim() })?;
        l.transpose()
            .solve_upper_triangular(&y)
            .ok_or(Error::NotPositiveDefinite { minor: self.dim() })
    }

    /// Symmetrized inverse.
    pub fn inverse(&self) -> Result<SpdMatrix> {
        let inv = self.solve(&DMatrix::identity(self.dim(), self.dim()))?;
        SpdMatrix::new(symmetrized(&inv))
    }

    /// `vᵀ A⁻¹ v` through one triangular solve.
    pub fn inv_quadratic_form(&self, v: &DVector<f64>) -> Result<f64> {
        let l = self.chol_lower()?;
        let y = l
            .solve_lower_triangular(v)
            .ok_or(Error::NotPositiveDefinite { minor: self.dim() })?;
        Ok(y.norm_squared())
    }

    /// Symmetric square root `S` with `S S = A`, via the eigendecomposition.
    /// Eigenvalues below `-1e-10 · λ_max` are rejected; small negative
    /// roundoff is clamped to zero.
    pub fn sym_sqrt(&self) -> Result<SpdMatrix> {
        let eig = nalgebra::SymmetricEigen::new(self.mat.clone());
        let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let floor = -EIGEN_RTOL * max.max(f64::MIN_POSITIVE);
        if let Some((idx, _)) = eig.eigenvalues.iter().enumerate().find(|(_, &l)| l < floor) {
            return Err(Error::NotPositiveDefinite { minor: idx + 1 });
        }
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let mut s = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        symmetrize(&mut s);
        Ok(SpdMatrix { mat: s, chol: OnceLock::new() })
    }

    /// Scales by `c > 0`.
    pub fn scale(&self, c: f64) -> Result<SpdMatrix> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("scale factor must be positive, got {c}")));
        }
        Ok(SpdMatrix { mat: &self.mat * c, chol: OnceLock::new() })
    }

    /// Congruence transform `T A Tᵀ`, symmetrized.
    pub fn congruence(&self, t: &DMatrix<f64>) -> SpdMatrix {
        let mut m = t * &self.mat * t.transpose();
        symmetrize(&mut m);
        SpdMatrix { mat: m, chol: OnceLock::new() }
    }
}
