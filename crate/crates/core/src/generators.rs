//! Orthonormal traceless Hermitian generators.
//!
//! The commuting family is the diagonal part of the generalized Gell-Mann
//! basis, `T_m = diag(1, …, 1, -m, 0, …, 0) / √(m(m+1))`. The full `su(d)`
//! basis lists those `d - 1` matrices first, followed by one symmetric and one
//! antisymmetric off-diagonal matrix for every pair `j < k`. Commuting phase
//! parameters therefore embed into full-model parameters by zero padding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{Operator, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    /// `d - 1` mutually commuting diagonal generators.
    Commuting,
    /// All `d² - 1` generators of `su(d)`.
    Full,
}

#[derive(Clone, Debug)]
pub struct GeneratorSet {
    d: usize,
    kind: GeneratorKind,
    mats: Vec<Operator>,
    /// `c[(m, k)]` with `T_m = Σ_k c_mk |k⟩⟨k|` for the diagonal generators.
    coeffs: DMatrix<f64>,
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

fn diagonal_coeffs(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d - 1, d, |row, k| {
        let m = row + 1;
        let norm = 1.0 / ((m * (m + 1)) as f64).sqrt();
        if k < m {
            norm
        } else if k == m {
            -(m as f64) * norm
        } else {
            0.0
        }
    })
}

pub fn commuting_generators(d: usize) -> Result<GeneratorSet> {
    check_dim(d)?;
    let coeffs = diagonal_coeffs(d);
    let mats = (0..d - 1)
        .map(|m| Operator::from_real_diagonal(&coeffs.row(m).iter().copied().collect::<Vec<_>>()))
        .collect();
    Ok(GeneratorSet {
        d,
        kind: GeneratorKind::Commuting,
        mats,
        coeffs,
    })
}

pub fn su_basis(d: usize) -> Result<GeneratorSet> {
    let diag = commuting_generators(d)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zero = C64::new(0.0, 0.0);
    let mut mats = diag.mats;
    for j in 0..d {
        for k in j + 1..d {
            mats.push(Operator::from_fn(d, |r, c| {
                if (r, c) == (j, k) || (r, c) == (k, j) {
                    C64::new(s, 0.0)
                } else {
                    zero
                }
            }));
            mats.push(Operator::from_fn(d, |r, c| {
                if (r, c) == (j, k) {
                    C64::new(0.0, -s)
                } else if (r, c) == (k, j) {
                    C64::new(0.0, s)
                } else {
                    zero
                }
            }));
        }
    }
    Ok(GeneratorSet {
        d,
        kind: GeneratorKind::Full,
        mats,
        coeffs: diag.coeffs,
    })
}

impl GeneratorSet {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn mats(&self) -> &[Operator] {
        &self.mats
    }

    pub fn get(&self, idx: usize) -> &Operator {
        &self.mats[idx]
    }

    /// Diagonal coefficients `c_mk` of the commuting generators, `(d-1) × d`.
    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// `Σ_α θ_α T_α`.
    pub fn combination(&self, theta: &[f64]) -> Result<Operator> {
        if theta.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: theta.len(),
            });
        }
        let mut acc = Operator::zeros(self.d);
        for (t, m) in theta.iter().zip(&self.mats) {
            acc = &acc + &m.scale_real(*t);
        }
        Ok(acc)
    }

    /// Expansion coefficients `tr(op·T_α)`.
    pub fn expand(&self, op: &Operator) -> Result<Vec<f64>> {
        if op.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: op.dim(),
            });
        }
        Ok(self.mats.iter().map(|t| (op * t).trace().re).collect())
    }

    /// `tr(op)/d · 𝟙 + Σ_α coeffs_α T_α`.
    pub fn reconstruct(&self, trace: f64, coeffs: &[f64]) -> Result<Operator> {
        let sum = self.combination(coeffs)?;
        Ok(&Operator::identity(self.d).scale_real(trace / self.d as f64) + &sum)
    }

    /// Hilbert-Schmidt Gram matrix `tr(T_α T_β)`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |a, b| (&self.mats[a] * &self.mats[b]).trace().re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DEFAULT_TOL;

    #[test]
    fn rejects_small_dimension() {
        assert!(matches!(
            commuting_generators(1),
            Err(Error::InvalidDimension(1))
        ));
        assert!(matches!(su_basis(0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn qubit_generator() {
        let g = commuting_generators(2).unwrap();
        assert_eq!(g.len(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(
            g.get(0)
                .max_abs_diff(&Operator::from_real_diagonal(&[s, -s]))
                < 1e-15
        );
    }

    #[test]
    fn sum_of_squares_is_scaled_identity() {
        for d in 2..=7 {
            let g = commuting_generators(d).unwrap();
            let mut acc = Operator::zeros(d);
            for t in g.mats() {
                acc = &acc + &(t * t);
            }
            let expected = Operator::identity(d).scale_real((d - 1) as f64 / d as f64);
            assert!(acc.max_abs_diff(&expected) < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        for d in 2..=6 {
            for g in [commuting_generators(d).unwrap(), su_basis(d).unwrap()] {
                let gram = g.gram();
                let err = (gram - DMatrix::<f64>::identity(g.len(), g.len()))
                    .abs()
                    .max();
                assert!(err < 1e-12, "d = {d}");
                for t in g.mats() {
                    assert!(t.is_hermitian(1e-12));
                    assert!(t.trace().norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn commuting_coefficient_identities() {
        for d in 2..=6 {
            let g = commuting_generators(d).unwrap();
            let c = g.coeffs();
            for m in 0..d - 1 {
                assert!(c.row(m).sum().abs() < 1e-12);
            }
            let cc = c.transpose() * c;
            for k in 0..d {
                for l in 0..d {
                    let want = if k == l { 1.0 } else { 0.0 } - 1.0 / d as f64;
                    assert!((cc[(k, l)] - want).abs() < 1e-12);
                }
            }
            for a in g.mats() {
                for b in g.mats() {
                    assert_eq!(a.commutator(b), Operator::zeros(d));
                }
            }
        }
    }

    #[test]
    fn su2_is_scaled_pauli_basis() {
        let g = su_basis(2).unwrap();
        assert_eq!(g.len(), 3);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let x = Operator::from_row_major(2, &[z, C64::new(s, 0.), C64::new(s, 0.), z]).unwrap();
        let y = Operator::from_row_major(2, &[z, C64::new(0., -s), C64::new(0., s), z]).unwrap();
        let zz = Operator::from_real_diagonal(&[s, -s]);
        assert!(g.get(0).max_abs_diff(&zz) < 1e-15);
        assert!(g.get(1).max_abs_diff(&x) < 1e-15);
        assert!(g.get(2).max_abs_diff(&y) < 1e-15);
    }

    #[test]
    fn commuting_set_is_prefix_of_full_basis() {
        for d in 2..=5 {
            let c = commuting_generators(d).unwrap();
            let f = su_basis(d).unwrap();
            assert_eq!(f.len(), d * d - 1);
            for (a, b) in c.mats().iter().zip(f.mats()) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn full_basis_round_trip() {
        let d = 4;
        let g = su_basis(d).unwrap();
        let a = Operator::from_fn(d, |i, j| {
            C64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2)
        });
        let herm = (&a + &a.adjoint()).scale_real(0.5);
        let tr = herm.trace().re;
        let traceless = &herm - &Operator::identity(d).scale_real(tr / d as f64);
        let coeffs = g.expand(&traceless).unwrap();
        let back = g.reconstruct(0.0, &coeffs).unwrap();
        assert!(back.max_abs_diff(&traceless) < DEFAULT_TOL);
    }
}
