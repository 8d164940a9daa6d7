//! POVMs: validation, the rank-one recipe measurement that saturates the QCRB
//! for quasiclassical pure models, the single-system optimal measurement, the
//! LOCC measurement for the entangled model, and covariant shifts.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::GeneratorSet;
use crate::model::Model;
use crate::operator::{tensor, unitary_exp, ComplexVector, Operator, C64, DEFAULT_TOL};
use crate::qfi::{l_vectors, qfi, quasiclassicality_witness};
use crate::states::{fourier_phases, phase_state, BipartiteState, PureState};

/// Residual recipe elements smaller than this are dropped.
const RESIDUAL_TOL: f64 = 1e-10;

/// Entries of the last column of the recipe's orthogonal matrix must exceed
/// this in magnitude.
const LAST_COLUMN_FLOOR: f64 = 1e-12;

/// Default rotation angle for the qubit measurement.
pub const DEFAULT_ETA: f64 = FRAC_PI_4;

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<Operator>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ElementJson {
    label: String,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PovmJson {
    dim: usize,
    elements: Vec<ElementJson>,
}

impl Povm {
    pub fn new(elements: Vec<Operator>, labels: Vec<String>) -> Result<Self> {
        let dim = elements
            .first()
            .map(Operator::dim)
            .ok_or_else(|| Error::InvalidArgument("POVM needs at least one element".into()))?;
        if labels.len() != elements.len() {
            return Err(Error::DimensionMismatch {
                expected: elements.len(),
                found: labels.len(),
            });
        }
        if let Some(bad) = elements.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Povm {
            dim,
            elements,
            labels,
        })
    }

    /// Projective measurement onto the given vectors, labelled `1..=n`.
    pub fn from_vectors(vectors: &[ComplexVector]) -> Result<Self> {
        let labels = (1..=vectors.len()).map(|k| k.to_string()).collect();
        Self::new(vectors.iter().map(Operator::projector).collect(), labels)
    }

    /// The single-outcome measurement `{𝟙}`.
    pub fn trivial(dim: usize) -> Self {
        Povm {
            dim,
            elements: vec![Operator::identity(dim)],
            labels: vec!["1".into()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Largest entry of `Σ M - 𝟙`.
    pub fn completeness_error(&self) -> f64 {
        let mut acc = Operator::zeros(self.dim);
        for e in &self.elements {
            acc = &acc + e;
        }
        acc.max_abs_diff(&Operator::identity(self.dim))
    }

    /// Every element PSD and the elements summing to identity, within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (e, label) in self.elements.iter().zip(&self.labels) {
            if !e.is_psd(tol) {
                return Err(Error::Numerical(format!(
                    "POVM element '{label}' is not PSD"
                )));
            }
        }
        let err = self.completeness_error();
        if err > tol {
            return Err(Error::Numerical(format!(
                "POVM elements do not sum to identity (deviation {err:e})"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let elements = self
            .elements
            .iter()
            .zip(&self.labels)
            .map(|(e, label)| {
                let entries = e.row_major();
                ElementJson {
                    label: label.clone(),
                    re: entries.iter().map(|z| z.re).collect(),
                    im: entries.iter().map(|z| z.im).collect(),
                }
            })
            .collect();
        serde_json::to_value(PovmJson {
            dim: self.dim,
            elements,
        })
        .expect("plain numeric struct serializes")
    }

    /// Parse and validate (tolerance [`DEFAULT_TOL`]).
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: PovmJson = serde_json::from_value(value.clone())?;
        let mut elements = Vec::with_capacity(raw.elements.len());
        let mut labels = Vec::with_capacity(raw.elements.len());
        for e in raw.elements {
            if e.re.len() != e.im.len() {
                return Err(Error::InvalidArgument(format!(
                    "element '{}' has mismatched re/im lengths",
                    e.label
                )));
            }
            let entries: Vec<C64> =
                e.re.iter()
                    .zip(&e.im)
                    .map(|(&a, &b)| C64::new(a, b))
                    .collect();
            elements.push(Operator::from_row_major(raw.dim, &entries)?);
            labels.push(e.label);
        }
        let povm = Povm::new(elements, labels)?;
        povm.validate(DEFAULT_TOL)?;
        Ok(povm)
    }
}

/// `o = 𝟙 - (2/d) J`, symmetric and orthogonal, with last-column entries
/// `1 - 2/d` and `-2/d`.
pub fn reflection_matrix(d: usize) -> DMatrix<f64> {
    let off = -2.0 / d as f64;
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 + off } else { off })
}

/// `[[cos η, -sin η], [sin η, cos η]]`.
pub fn qubit_rotation(eta: f64) -> DMatrix<f64> {
    let (s, c) = eta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Rank-one measurement saturating `I(M, θ₀) = H(θ₀)` for a quasiclassical
/// pure model: `|m_k⟩ = Σ_l (H^{-1/2})_kl |l_l⟩`, `|m_{p+1}⟩ = |ψ(θ₀)⟩`,
/// `|b_α⟩ = Σ_β o_αβ |m_β⟩`, plus the residual `𝟙 - Σ|b⟩⟨b|` when it does
/// not vanish.
pub fn recipe_povm(model: &Model, theta0: &[f64], o: &DMatrix<f64>) -> Result<Povm> {
    let p = model.num_params();
    if o.nrows() != p + 1 || o.ncols() != p + 1 {
        return Err(Error::DimensionMismatch {
            expected: p + 1,
            found: o.nrows(),
        });
    }
    let ortho_err = (o * o.transpose() - DMatrix::<f64>::identity(p + 1, p + 1))
        .abs()
        .max();
    if ortho_err > DEFAULT_TOL {
        return Err(Error::InvalidArgument(format!(
            "recipe matrix is not orthogonal (deviation {ortho_err:e})"
        )));
    }
    if let Some(row) = (0..=p).find(|&a| o[(a, p)].abs() < LAST_COLUMN_FLOOR) {
        return Err(Error::InvalidArgument(format!(
            "recipe matrix has a vanishing last-column entry in row {}",
            row + 1
        )));
    }
    let witness = quasiclassicality_witness(model, theta0)?;
    if witness > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "model is not quasiclassical at this point (witness {witness:e})"
        )));
    }

    let ls = l_vectors(model, theta0)?;
    let h_inv_sqrt = qfi(model, theta0)?.inverse_sqrt()?;
    let mut ms: Vec<ComplexVector> = (0..p)
        .map(|k| {
            let mut acc = ComplexVector::zeros(model.hilbert_dim());
            for (l, lv) in ls.iter().enumerate() {
                acc = &acc + &lv.scale(C64::new(h_inv_sqrt[(k, l)], 0.0));
            }
            acc
        })
        .collect();
    ms.push(model.output_vector(theta0)?);

    let bs: Vec<ComplexVector> = (0..=p)
        .map(|a| {
            let mut acc = ComplexVector::zeros(model.hilbert_dim());
            for (b, mv) in ms.iter().enumerate() {
                acc = &acc + &mv.scale(C64::new(o[(a, b)], 0.0));
            }
            acc
        })
        .collect();

    let mut povm = Povm::from_vectors(&bs)?;
    let mut rest = Operator::identity(model.hilbert_dim());
    for e in &povm.elements {
        rest = &rest - e;
    }
    if rest.max_abs() > RESIDUAL_TOL {
        povm.elements.push(rest);
        povm.labels.push("rest".into());
    }
    Ok(povm)
}

/// Recipe matrix used for `d` outcomes: the qubit rotation by `eta` when
/// `d = 2`, otherwise [`reflection_matrix`].
pub fn default_recipe_matrix(d: usize, eta: Option<f64>) -> DMatrix<f64> {
    if d == 2 {
        qubit_rotation(eta.unwrap_or(DEFAULT_ETA))
    } else {
        reflection_matrix(d)
    }
}

/// Optimal measurement at `θ = 0` for the phase state with the given phases.
/// For `d = 2` the vectors are rotated by `eta` (default π/4), which must
/// have non-zero sine and cosine; for `d ≥ 3` `eta` is ignored.
pub fn optimal_povm_mpeu(d: usize, phases: &[f64], eta: Option<f64>) -> Result<Povm> {
    let state = phase_state(d, phases)?;
    let model = Model::mpeu(state)?;
    let o = default_recipe_matrix(d, eta);
    let povm = recipe_povm(&model, &vec![0.0; d - 1], &o).map_err(|e| match e {
        Error::InvalidArgument(msg) if d == 2 => {
            Error::InvalidArgument(format!("degenerate eta for d = 2: {msg}"))
        }
        other => other,
    })?;
    debug_assert_eq!(povm.len(), d);
    Ok(povm)
}

/// Conjugate every element by the model unitary `U_θ` (or `U_θ ⊗ 𝟙`).
pub fn shift_povm(p: &Povm, gens: &GeneratorSet, theta: &[f64], tensored: bool) -> Result<Povm> {
    let d = gens.d();
    let expected = if tensored { d * d } else { d };
    if p.dim != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: p.dim,
        });
    }
    let mut u = unitary_exp(&gens.combination(theta)?)?;
    if tensored {
        u = tensor(&u, &Operator::identity(d));
    }
    let u_dag = u.adjoint();
    let elements = p.elements.iter().map(|e| &(&u * e) * &u_dag).collect();
    Povm::new(elements, p.labels.clone())
}

/// Bob's Fourier vector `|w_k⟩ = Σ_l e^{2πikl/d} |l⟩ / √d`.
pub fn fourier_vector(d: usize, k: usize) -> ComplexVector {
    let s = 1.0 / (d as f64).sqrt();
    let amps = (0..d)
        .map(|l| {
            C64::from_polar(
                s,
                2.0 * std::f64::consts::PI * ((k * l) % d) as f64 / d as f64,
            )
        })
        .collect();
    ComplexVector::from_vec(amps)
}

/// LOCC measurement `{A_kl ⊗ B_k}` on `ℂ^d ⊗ ℂ^d` with default `eta`.
pub fn locc_povm_mpee(d: usize) -> Result<Povm> {
    locc_povm_mpee_with_eta(d, None)
}

/// Bob measures `B_k = |w_k⟩⟨w_k|`, `k = 1..=d`; Alice then applies the
/// single-system optimal measurement for the phase state Bob's outcome
/// prepares at her input, phases `φ_l = -2πkl/d`. Labels are `"k:l"`.
pub fn locc_povm_mpee_with_eta(d: usize, eta: Option<f64>) -> Result<Povm> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut elements = Vec::with_capacity(d * d);
    let mut labels = Vec::with_capacity(d * d);
    for k in 1..=d {
        let bob = Operator::projector(&fourier_vector(d, k));
        let alice = optimal_povm_mpeu(d, &fourier_phases(d, k), eta)?;
        for (l, a) in alice.elements.iter().enumerate() {
            elements.push(tensor(a, &bob));
            labels.push(format!("{k}:{}", l + 1));
        }
    }
    Povm::new(elements, labels)
}

/// Bob's outcome probability and the normalized state left at Alice's side
/// after he obtains outcome `k` on `s`.
pub fn bob_conditional_state(s: &BipartiteState, k: usize) -> Result<(f64, PureState)> {
    let d = s.d();
    let w = fourier_vector(d, k);
    let r = s.coefficients();
    // (𝟙 ⊗ ⟨w_k|)|Ψ⟩ = Σ_k' (Σ_l R_k'l conj(w_l)) |k'⟩
    let amps: Vec<C64> = (0..d)
        .map(|row| (0..d).map(|l| r[(row, l)] * w.entries()[l].conj()).sum())
        .collect();
    let v = ComplexVector::from_vec(amps);
    let prob = v.norm() * v.norm();
    if prob <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Bob outcome {k} has zero probability"
        )));
    }
    Ok((prob, PureState::new(v.normalized())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::commuting_generators;
    use crate::states::maximally_entangled;

    #[test]
    fn qubit_example_vectors() {
        let eta = 0.37;
        let povm = optimal_povm_mpeu(2, &[0.0, 0.0], Some(eta)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e_plus = C64::from_polar(s, eta);
        let e_minus = C64::from_polar(s, -eta);
        let i = C64::new(0.0, 1.0);
        let b1 = ComplexVector::from_vec(vec![i * e_plus, -i * e_minus]);
        let b2 = ComplexVector::from_vec(vec![e_plus, e_minus]);
        assert!(povm.elements()[0].max_abs_diff(&Operator::projector(&b1)) < 1e-15);
        assert!(povm.elements()[1].max_abs_diff(&Operator::projector(&b2)) < 1e-15);
    }

    #[test]
    fn qubit_rejects_degenerate_eta() {
        for eta in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            assert!(optimal_povm_mpeu(2, &[0.0, 0.0], Some(eta)).is_err());
        }
        assert!(optimal_povm_mpeu(3, &[0.0; 2], None).is_err());
    }

    #[test]
    fn optimal_povm_is_orthonormal_basis() {
        for d in 2..=6 {
            let povm = optimal_povm_mpeu(d, &vec![0.2; d], None).unwrap();
            assert_eq!(povm.len(), d);
            assert!(povm.completeness_error() < 1e-12);
            povm.validate(1e-10).unwrap();
            for (j, a) in povm.elements().iter().enumerate() {
                for (k, b) in povm.elements().iter().enumerate() {
                    let prod = (a * b).trace().re;
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((prod - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn reflection_matrix_properties() {
        for d in 3..=7 {
            let o = reflection_matrix(d);
            let err = (&o * o.transpose() - DMatrix::<f64>::identity(d, d))
                .abs()
                .max();
            assert!(err < 1e-14);
            for k in 0..d {
                let v = o[(k, d - 1)].abs();
                assert!(v > 0.0);
                assert!(
                    (v - 2.0 / d as f64).abs() < 1e-15
                        || (v - (1.0 - 2.0 / d as f64)).abs() < 1e-15
                );
            }
        }
    }

    #[test]
    fn shift_at_zero_is_identity() {
        let povm = optimal_povm_mpeu(3, &[0.0; 3], None).unwrap();
        let gens = commuting_generators(3).unwrap();
        let shifted = shift_povm(&povm, &gens, &[0.0, 0.0], false).unwrap();
        for (a, b) in povm.elements().iter().zip(shifted.elements()) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }
        let moved = shift_povm(&povm, &gens, &[0.7, -1.3], false).unwrap();
        assert!(moved.completeness_error() < 1e-12);
        assert!(shift_povm(&povm, &gens, &[0.0, 0.0], true).is_err());
    }

    #[test]
    fn locc_structure() {
        for d in 2..=4 {
            let povm = locc_povm_mpee(d).unwrap();
            assert_eq!(povm.len(), d * d);
            assert_eq!(povm.dim(), d * d);
            povm.validate(1e-10).unwrap();
            assert_eq!(povm.labels()[0], "1:1");
        }
    }

    #[test]
    fn bob_outcomes_on_maximally_entangled() {
        for d in 2..=5 {
            let s = maximally_entangled(d).unwrap();
            for k in 1..=d {
                let (prob, state) = bob_conditional_state(&s, k).unwrap();
                assert!((prob - 1.0 / d as f64).abs() < 1e-14);
                let want = phase_state(d, &fourier_phases(d, k)).unwrap();
                let overlap = want.amplitudes().inner(state.amplitudes());
                assert!((overlap - C64::new(1.0, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let povm = optimal_povm_mpeu(3, &[0.0; 3], None).unwrap();
        let v = povm.to_json();
        assert_eq!(v["dim"], 3);
        assert_eq!(v["elements"][0]["label"], "1");
        let back = Povm::from_json(&v).unwrap();
        assert!(back
            .elements()
            .iter()
            .zip(povm.elements())
            .all(|(a, b)| a.max_abs_diff(b) == 0.0));
        let incomplete = serde_json::json!({"dim": 2, "elements": [
            {"label": "a", "re": [1.0, 0.0, 0.0, 0.0], "im": [0.0, 0.0, 0.0, 0.0]}
        ]});
        assert!(Povm::from_json(&incomplete).is_err());
    }
}
