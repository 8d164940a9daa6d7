//! Dense complex operators and vectors.
//!
//! Every exponent that appears in the phase models is `i` times a Hermitian
//! matrix, so exponentials and their directional derivatives are computed in
//! the eigenbasis of the Hermitian generator.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used by the structural predicates (Hermitian, PSD, unitary).
pub const DEFAULT_TOL: f64 = 1e-10;

/// Eigenvalues closer than this are treated as degenerate in [`exp_frechet`].
const DEGENERACY_GAP: f64 = 1e-12;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

/// Complex column vector (state amplitudes, `|l⟩` vectors, measurement vectors).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector(DVector<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "operator dimension must be positive".into(),
            ));
        }
        Ok(Operator(m))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Operator(DMatrix::from_fn(dim, dim, f))
    }

    /// Row-major entries.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator(DMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Operator(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// `|v⟩⟨v|`
    pub fn projector(v: &ComplexVector) -> Self {
        Operator(&v.0 * v.0.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn row_major(&self) -> Vec<C64> {
        let n = self.dim();
        (0..n * n).map(|idx| self.0[(idx / n, idx % n)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Operator(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Operator(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Operator) -> Self {
        Operator(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn apply(&self, v: &ComplexVector) -> ComplexVector {
        ComplexVector(&self.0 * &v.0)
    }

    /// `⟨v|self|v⟩`
    pub fn expectation(&self, v: &ComplexVector) -> C64 {
        v.inner(&self.apply(v))
    }

    /// Hilbert-Schmidt inner product `tr(self† other)`.
    pub fn hs_inner(&self, other: &Operator) -> C64 {
        self.0.dotc(&other.0)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == C64::new(0.0, 0.0)))
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Hermitian within `tol`, scaled by the entry magnitude when it exceeds one.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol * self.max_abs().max(1.0)
    }

    /// Hermitian and minimum eigenvalue `>= -tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        match hermitian_eig(self) {
            Ok(eig) => eig.eigenvalues.first().is_none_or(|&lo| lo >= -tol),
            Err(_) => false,
        }
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = Operator(&self.0 * self.0.adjoint());
        prod.max_abs_diff(&Operator::identity(self.dim())) <= tol
    }

    fn check_hermitian(&self) -> Result<()> {
        if self.is_hermitian(DEFAULT_TOL) {
            Ok(())
        } else {
            Err(Error::NotHermitian(self.hermitian_deviation()))
        }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        Operator(self.0 + rhs.0)
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        Operator(self.0 - rhs.0)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        Operator(self.0 * rhs.0)
    }
}

impl ComplexVector {
    pub fn from_vec(entries: Vec<C64>) -> Self {
        ComplexVector(DVector::from_vec(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        ComplexVector(DVector::zeros(dim))
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        ComplexVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(&self) -> Self {
        ComplexVector(self.0.normalize())
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &ComplexVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn scale(&self, factor: C64) -> Self {
        ComplexVector(&self.0 * factor)
    }

    /// Kronecker product, `self` index major.
    pub fn tensor(&self, other: &ComplexVector) -> Self {
        ComplexVector(self.0.kronecker(&other.0))
    }

    pub fn max_abs_diff(&self, other: &ComplexVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Add for &ComplexVector {
    type Output = ComplexVector;
    fn add(self, rhs: &ComplexVector) -> ComplexVector {
        ComplexVector(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexVector {
    type Output = ComplexVector;
    fn sub(self, rhs: &ComplexVector) -> ComplexVector {
        ComplexVector(&self.0 - &rhs.0)
    }
}

impl Neg for &ComplexVector {
    type Output = ComplexVector;
    fn neg(self) -> ComplexVector {
        ComplexVector(-&self.0)
    }
}

/// Kronecker product `a ⊗ b` with `a`'s index major.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator(a.0.kronecker(&b.0))
}

/// Trace over the second factor of a `dA·dB` dimensional operator.
pub fn partial_trace_b(op: &Operator, da: usize, db: usize) -> Result<Operator> {
    if op.dim() != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: op.dim(),
        });
    }
    Ok(Operator::from_fn(da, |i, j| {
        (0..db).map(|k| op.0[(i * db + k, j * db + k)]).sum()
    }))
}

/// Spectral decomposition `op = Q diag(λ) Q†` with `λ` ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Operator,
}

impl HermitianEigen {
    /// Rebuild `Q f(Λ) Q†` for a function applied to the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> Operator {
        let q = &self.eigenvectors.0;
        let n = q.nrows();
        let mut scaled = q.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let fj = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        Operator(scaled * q.adjoint())
    }
}

pub fn hermitian_eig(op: &Operator) -> Result<HermitianEigen> {
    op.check_hermitian()?;
    let sym = (&op.0 + op.0.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let n = op.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let q = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors: Operator(q),
    })
}

/// `exp(i·h)` for Hermitian `h`.
pub fn unitary_exp(h: &Operator) -> Result<Operator> {
    if h.is_diagonal() {
        let n = h.dim();
        return Ok(Operator::from_fn(n, |i, j| {
            if i == j {
                (I * h.0[(i, i)].re).exp()
            } else {
                C64::new(0.0, 0.0)
            }
        }));
    }
    let eig = hermitian_eig(h)?;
    Ok(eig.map_spectrum(|lam| (I * lam).exp()))
}

/// `(e^{ia} - e^{ib}) / (i(a - b))`, written as `e^{i(a+b)/2} sinc((a-b)/2)`
/// so that nearly degenerate pairs do not cancel catastrophically.
fn divided_difference(a: f64, b: f64) -> C64 {
    let mid = (I * (0.5 * (a + b))).exp();
    let half = 0.5 * (a - b);
    if (a - b).abs() < DEGENERACY_GAP {
        mid
    } else {
        mid * (half.sin() / half)
    }
}

/// Directional derivative of `V = exp(i·h)` along `dh`.
///
/// In the eigenbasis of `h` the derivative is the Hadamard product of `i·dh`
/// with the first divided differences of `λ ↦ e^{iλ}`.
pub fn exp_frechet(h: &Operator, dh: &Operator) -> Result<Operator> {
    if h.dim() != dh.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: dh.dim(),
        });
    }
    dh.check_hermitian()?;
    let eig = hermitian_eig(h)?;
    let q = &eig.eigenvectors.0;
    let rotated = q.adjoint() * &dh.0 * q;
    let lam = &eig.eigenvalues;
    let inner = DMatrix::from_fn(h.dim(), h.dim(), |j, k| {
        I * rotated[(j, k)] * divided_difference(lam[j], lam[k])
    });
    Ok(Operator(q * inner * q.adjoint()))
}
