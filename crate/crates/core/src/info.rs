//! Real symmetric information matrices (quantum and classical Fisher).

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest condition number accepted by [`InformationMatrix::inverse`].
pub const MAX_CONDITION: f64 = 1e12;

/// `p × p` real symmetric positive-semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct InformationMatrix {
    entries: DMatrix<f64>,
}

pub type QfiMatrix = InformationMatrix;
pub type FiMatrix = InformationMatrix;

/// Wire format: `{"p": int, "entries": [row-major reals]}`.
#[derive(Serialize, Deserialize)]
struct InformationMatrixJson {
    p: usize,
    entries: Vec<f64>,
}

impl InformationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(InformationMatrix { entries })
    }

    pub fn zeros(p: usize) -> Self {
        InformationMatrix {
            entries: DMatrix::zeros(p, p),
        }
    }

    pub fn from_row_major(p: usize, values: &[f64]) -> Result<Self> {
        if values.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                found: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(p, p, values))
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn row_major(&self) -> Vec<f64> {
        let p = self.p();
        (0..p * p).map(|k| self.entries[(k / p, k % p)]).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let p = self.p();
        (0..p).all(|i| (i..p).all(|j| (self.entries[(i, j)] - self.entries[(j, i)]).abs() <= tol))
    }

    /// Ascending eigenvalues of the symmetrized matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.p() == 0 {
            return Vec::new();
        }
        let sym = (&self.entries + self.entries.transpose()) * 0.5;
        let mut vals: Vec<f64> = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_symmetric(tol) && self.min_eigenvalue() >= -tol
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &InformationMatrix) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn condition_number(&self) -> f64 {
        let vals = self.eigenvalues();
        match (vals.first(), vals.last()) {
            (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    /// Inverse through a Cholesky factorization; fails when the condition
    /// number exceeds [`MAX_CONDITION`].
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let cond = self.condition_number();
        if cond.is_nan() || cond > MAX_CONDITION {
            return Err(Error::Singular(cond));
        }
        let sym = (&self.entries + self.entries.transpose()) * 0.5;
        let chol = Cholesky::new(sym).ok_or(Error::Singular(cond))?;
        Ok(chol.inverse())
    }

    /// Symmetric inverse square root through the spectral decomposition.
    pub fn inverse_sqrt(&self) -> Result<DMatrix<f64>> {
        let cond = self.condition_number();
        if cond.is_nan() || cond > MAX_CONDITION {
            return Err(Error::Singular(cond));
        }
        let sym = (&self.entries + self.entries.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let q = &eig.eigenvectors;
        let scaled = DMatrix::from_diagonal(&eig.eigenvalues.map(|lam| 1.0 / lam.sqrt()));
        Ok(q * scaled * q.transpose())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(InformationMatrixJson {
            p: self.p(),
            entries: self.row_major(),
        })
        .expect("plain numeric struct serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: InformationMatrixJson = serde_json::from_value(value.clone())?;
        Self::from_row_major(raw.p, &raw.entries)
    }
}

impl std::ops::Sub for &InformationMatrix {
    type Output = InformationMatrix;
    fn sub(self, rhs: &InformationMatrix) -> InformationMatrix {
        InformationMatrix {
            entries: &self.entries - &rhs.entries,
        }
    }
}
