//! Quantum Fisher information of pure-state unitary models.
//!
//! For pure states the symmetric logarithmic derivative is `λ_i = 2∂_iρ`, so
//! the QFI is `H_ij = Re⟨l_i|l_j⟩` with `|l_i⟩ = λ_i|ψ⟩`, the horizontal part
//! of `2∂_i|ψ⟩`. No Lyapunov solve is needed.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generators::{GeneratorKind, GeneratorSet};
use crate::info::QfiMatrix;
use crate::model::Model;
use crate::operator::{exp_frechet, unitary_exp, ComplexVector, Operator, I};
use crate::states::{maximally_entangled, BipartiteState};

/// Tolerance for the Hermitian/traceless check on `S_α`.
const S_CHECK_TOL: f64 = 1e-8;

/// `|l_α⟩ = 2(∂_α|ψ⟩ - ⟨ψ|∂_αψ⟩|ψ⟩)`, which equals `2i(G_α - ⟨G_α⟩)|ψ(θ)⟩`.
pub fn l_vectors(model: &Model, theta: &[f64]) -> Result<Vec<ComplexVector>> {
    let tan = model.tangent(theta)?;
    Ok(tan
        .dpsi
        .iter()
        .map(|dpsi| {
            let overlap = tan.psi.inner(dpsi);
            (dpsi - &tan.psi.scale(overlap)).scale(2.0.into())
        })
        .collect())
}

fn gram(ls: &[ComplexVector]) -> DMatrix<num_complex::Complex64> {
    let p = ls.len();
    DMatrix::from_fn(p, p, |i, j| ls[i].inner(&ls[j]))
}

/// `H_ij = Re⟨l_i|l_j⟩`.
pub fn qfi(model: &Model, theta: &[f64]) -> Result<QfiMatrix> {
    let g = gram(&l_vectors(model, theta)?);
    let p = g.nrows();
    QfiMatrix::new(DMatrix::from_fn(p, p, |i, j| {
        0.5 * (g[(i, j)].re + g[(j, i)].re)
    }))
}

/// `max_ij |Im⟨l_i|l_j⟩|`; zero iff the model is quasiclassical at `theta`.
pub fn quasiclassicality_witness(model: &Model, theta: &[f64]) -> Result<f64> {
    let g = gram(&l_vectors(model, theta)?);
    Ok(g.iter().map(|z| z.im.abs()).fold(0.0, f64::max))
}

/// Covariance form `4[⟨G_mG_n⟩ - ⟨G_m⟩⟨G_n⟩]` evaluated on the input state.
/// For commuting generators this is the QFI at every `θ`.
pub fn qfi_covariance_form(model: &Model) -> Result<QfiMatrix> {
    let zero = vec![0.0; model.num_params()];
    let gens = model.effective_generators(&zero)?;
    let psi = model.input().amplitudes();
    let means: Vec<f64> = gens.iter().map(|g| g.expectation(psi).re).collect();
    let p = gens.len();
    let mut h = DMatrix::zeros(p, p);
    for m in 0..p {
        for n in m..p {
            let second = (&gens[m] * &gens[n]).expectation(psi).re;
            let v = 4.0 * (second - means[m] * means[n]);
            h[(m, n)] = v;
            h[(n, m)] = v;
        }
    }
    QfiMatrix::new(h)
}

/// `Tr H = 4[(d-1)/d - Σ_m t_m²]` with `t_m = tr(RR†T_m)` over the commuting
/// generators.
pub fn qfi_trace_formula(s: &BipartiteState, gens: &GeneratorSet) -> Result<f64> {
    if gens.kind() != GeneratorKind::Commuting {
        return Err(Error::InvalidArgument(
            "trace formula needs commuting generators".into(),
        ));
    }
    let d = s.d();
    let t = gens.expand(&s.reduced_density())?;
    let sum_sq: f64 = t.iter().map(|x| x * x).sum();
    Ok(4.0 * ((d - 1) as f64 / d as f64 - sum_sq))
}

/// Largest attainable `Tr H` for the commuting models.
pub fn max_qfi_trace(d: usize) -> f64 {
    4.0 * (d - 1) as f64 / d as f64
}

/// `S_α = -i V† ∂_αV` with `V = exp(i Σ θ_α T_α)`, checked Hermitian and
/// traceless.
pub fn s_operators(basis: &GeneratorSet, theta: &[f64]) -> Result<Vec<Operator>> {
    let h = basis.combination(theta)?;
    let v_dag = unitary_exp(&h)?.adjoint();
    basis
        .mats()
        .iter()
        .enumerate()
        .map(|(alpha, t)| {
            let s = (&v_dag * &exp_frechet(&h, t)?).scale(-I);
            let herm = s.hermitian_deviation();
            let tr = s.trace().norm();
            if herm > S_CHECK_TOL || tr > S_CHECK_TOL {
                return Err(Error::Numerical(format!(
                    "S_{alpha} not in su(d): hermitian deviation {herm:e}, trace {tr:e}"
                )));
            }
            Ok(s)
        })
        .collect()
}

fn qfi_from_s(rho: &Operator, s: &[Operator]) -> Result<QfiMatrix> {
    let n = s.len();
    let means: Vec<f64> = s.iter().map(|sa| (rho * sa).trace().re).collect();
    let rho_s: Vec<Operator> = s.iter().map(|sa| rho * sa).collect();
    let mut h = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = 4.0 * ((&rho_s[a] * &s[b]).trace().re - means[a] * means[b]);
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    QfiMatrix::new(h)
}

fn check_full(s: &BipartiteState, basis: &GeneratorSet, theta: &[f64]) -> Result<()> {
    if basis.kind() != GeneratorKind::Full {
        return Err(Error::InvalidArgument(
            "full-model QFI needs the su(d) basis".into(),
        ));
    }
    if basis.d() != s.d() {
        return Err(Error::DimensionMismatch {
            expected: s.d(),
            found: basis.d(),
        });
    }
    if theta.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: theta.len(),
        });
    }
    Ok(())
}

/// Full `SU(d)` model QFI, `4 Re[tr(RR†S_αS_β) - tr(RR†S_α) tr(RR†S_β)]`.
pub fn qfi_full(s: &BipartiteState, basis: &GeneratorSet, theta: &[f64]) -> Result<QfiMatrix> {
    check_full(s, basis, theta)?;
    qfi_from_s(&s.reduced_density(), &s_operators(basis, theta)?)
}

/// Quantities around `Tr(H̃⁻¹ H^ρ₀) <= d² - 1`, where `H̃` is the QFI of the
/// maximally entangled input at the same `θ`.
#[derive(Clone, Debug)]
pub struct TraceBound {
    /// `Tr(H̃⁻¹ H^ρ₀)` by direct matrix products.
    pub ratio: f64,
    /// `d² - 1 - 4 Σ_αβ H̃⁻¹_αβ tr(RR†S_α) tr(RR†S_β)`.
    pub closed_form: f64,
    /// Largest entry of `Σ_μν H̃⁻¹_μν S_μ S_ν - (d²-1)/4 𝟙`.
    pub casimir_residual: f64,
}

pub fn trace_bound(s: &BipartiteState, basis: &GeneratorSet, theta: &[f64]) -> Result<TraceBound> {
    check_full(s, basis, theta)?;
    let d = s.d();
    let ops = s_operators(basis, theta)?;
    let rho = s.reduced_density();
    let h = qfi_from_s(&rho, &ops)?;
    let h_tilde = qfi_from_s(&maximally_entangled(d)?.reduced_density(), &ops)?;
    let inv = h_tilde.inverse()?;

    let ratio = (&inv * h.entries()).trace();

    let dim = (d * d - 1) as f64;
    let means =
        nalgebra::DVector::from_iterator(ops.len(), ops.iter().map(|sa| (&rho * sa).trace().re));
    let closed_form = dim - 4.0 * (means.transpose() * &inv * &means)[(0, 0)];

    let mut casimir = Operator::zeros(d);
    for (mu, s_mu) in ops.iter().enumerate() {
        for (nu, s_nu) in ops.iter().enumerate() {
            casimir = &casimir + &(s_mu * s_nu).scale_real(inv[(mu, nu)]);
        }
    }
    let casimir_residual = casimir.max_abs_diff(&Operator::identity(d).scale_real(dim / 4.0));

    Ok(TraceBound {
        ratio,
        closed_form,
        casimir_residual,
    })
}

/// `Tr(H̃⁻¹ H^ρ₀)`.
pub fn trace_bound_ratio(s: &BipartiteState, basis: &GeneratorSet, theta: &[f64]) -> Result<f64> {
    Ok(trace_bound(s, basis, theta)?.ratio)
}
