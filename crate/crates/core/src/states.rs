//! Input states for the single-system and entangled phase models.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GeneratorKind, GeneratorSet};
use crate::operator::{ComplexVector, Operator, C64};

/// Normalization tolerance enforced on constructed states.
pub const NORM_TOL: f64 = 1e-12;

/// Files may carry rounded amplitudes; anything within this is renormalized.
const FILE_NORM_TOL: f64 = 1e-6;

/// Normalized vector in `ℂ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: ComplexVector,
}

/// Normalized vector `Σ_kl R_kl |kl⟩` in `ℂ^d ⊗ ℂ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    d: usize,
    amps: ComplexVector,
}

/// Either kind of model input.
#[derive(Clone, Debug, PartialEq)]
pub enum InputState {
    Pure(PureState),
    Bipartite(BipartiteState),
}

fn check_norm(v: &ComplexVector, tol: f64) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "state is not normalized (norm {norm})"
        )));
    }
    Ok(())
}

fn gaussian_vector(len: usize, rng: &mut impl Rng) -> ComplexVector {
    let entries = (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        })
        .collect();
    ComplexVector::from_vec(entries)
}

impl PureState {
    pub fn new(amps: ComplexVector) -> Result<Self> {
        if amps.dim() == 0 {
            return Err(Error::InvalidArgument("empty state vector".into()));
        }
        check_norm(&amps, NORM_TOL)?;
        Ok(PureState { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.dim()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amps
    }

    pub fn density(&self) -> Operator {
        Operator::projector(&self.amps)
    }
}

impl BipartiteState {
    pub fn new(d: usize, amps: ComplexVector) -> Result<Self> {
        if amps.dim() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: amps.dim(),
            });
        }
        check_norm(&amps, NORM_TOL)?;
        Ok(BipartiteState { d, amps })
    }

    /// Build from the coefficient matrix `R` with `|Ψ⟩ = Σ_kl R_kl |kl⟩`.
    pub fn from_coefficients(r: &DMatrix<C64>) -> Result<Self> {
        let d = r.nrows();
        if r.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.ncols(),
            });
        }
        let amps = (0..d * d).map(|idx| r[(idx / d, idx % d)]).collect();
        Self::new(d, ComplexVector::from_vec(amps))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amps
    }

    /// The coefficient matrix `R`, a row-major reshape of the amplitudes.
    pub fn coefficients(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.d, self.d, self.amps.entries())
    }

    /// `tr_B |Ψ⟩⟨Ψ| = R R†`.
    pub fn reduced_density(&self) -> Operator {
        let r = self.coefficients();
        Operator::from_matrix(&r * r.adjoint()).expect("square by construction")
    }
}

impl InputState {
    /// Local dimension `d` of the phase-carrying system.
    pub fn local_dim(&self) -> usize {
        match self {
            InputState::Pure(s) => s.dim(),
            InputState::Bipartite(s) => s.d(),
        }
    }

    /// Amplitudes in the full Hilbert space (`ℂ^d` or `ℂ^d ⊗ ℂ^d`).
    pub fn amplitudes(&self) -> &ComplexVector {
        match self {
            InputState::Pure(s) => s.amplitudes(),
            InputState::Bipartite(s) => s.amplitudes(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (d, amps) = match self {
            InputState::Pure(s) => (s.dim(), s.amplitudes()),
            InputState::Bipartite(s) => (s.d(), s.amplitudes()),
        };
        serde_json::to_value(StateJson {
            d,
            re: amps.entries().iter().map(|z| z.re).collect(),
            im: amps.entries().iter().map(|z| z.im).collect(),
        })
        .expect("plain numeric struct serializes")
    }

    /// Parse `{"d", "re", "im"}`. Arrays of length `d` give a pure state and
    /// arrays of length `d²` a bipartite state with `R` in row-major order.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: StateJson = serde_json::from_value(value.clone())?;
        if raw.re.len() != raw.im.len() {
            return Err(Error::InvalidArgument(format!(
                "re and im have different lengths ({} vs {})",
                raw.re.len(),
                raw.im.len()
            )));
        }
        if raw.d < 2 {
            return Err(Error::InvalidDimension(raw.d));
        }
        let v = ComplexVector::from_vec(
            raw.re
                .iter()
                .zip(&raw.im)
                .map(|(&a, &b)| C64::new(a, b))
                .collect(),
        );
        check_norm(&v, FILE_NORM_TOL)?;
        let v = if (v.norm() - 1.0).abs() > NORM_TOL {
            v.normalized()
        } else {
            v
        };
        if v.dim() == raw.d {
            Ok(InputState::Pure(PureState::new(v)?))
        } else if v.dim() == raw.d * raw.d {
            Ok(InputState::Bipartite(BipartiteState::new(raw.d, v)?))
        } else {
            Err(Error::DimensionMismatch {
                expected: raw.d,
                found: v.dim(),
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    d: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// `Σ_k e^{iφ_k} |k⟩ / √d`.
pub fn phase_state(d: usize, phases: &[f64]) -> Result<PureState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if phases.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: phases.len(),
        });
    }
    let s = 1.0 / (d as f64).sqrt();
    let amps = phases.iter().map(|&phi| C64::from_polar(s, phi)).collect();
    PureState::new(ComplexVector::from_vec(amps))
}

/// `Σ_k |kk⟩ / √d`.
pub fn maximally_entangled(d: usize) -> Result<BipartiteState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let s = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    BipartiteState::from_coefficients(&DMatrix::from_diagonal_element(d, d, s))
}

/// `t_α = tr(R R† T_α)` against a full basis.
pub fn bloch_coefficients(s: &BipartiteState, basis: &GeneratorSet) -> Result<Vec<f64>> {
    if basis.kind() != GeneratorKind::Full {
        return Err(Error::InvalidArgument(
            "Bloch coefficients need the full su(d) basis".into(),
        ));
    }
    if basis.d() != s.d() {
        return Err(Error::DimensionMismatch {
            expected: s.d(),
            found: basis.d(),
        });
    }
    basis.expand(&s.reduced_density())
}

/// Single-system state with the same QFI as `s`: amplitudes
/// `√⟨k|RR†|k⟩ e^{iφ_k}`. Phases default to zero.
pub fn mpeu_equivalent(s: &BipartiteState, phases: Option<&[f64]>) -> Result<PureState> {
    let d = s.d();
    let zeros = vec![0.0; d];
    let phases = phases.unwrap_or(&zeros);
    if phases.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: phases.len(),
        });
    }
    let rho = s.reduced_density();
    let amps: Vec<C64> = (0..d)
        .map(|k| C64::from_polar(rho.get(k, k).re.max(0.0).sqrt(), phases[k]))
        .collect();
    // diag(RR†) sums to one up to rounding
    PureState::new(ComplexVector::from_vec(amps).normalized())
}

/// Haar-random state in `ℂ^d` from normalized complex Gaussians.
pub fn random_pure(d: usize, rng: &mut impl Rng) -> Result<PureState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    PureState::new(gaussian_vector(d, rng).normalized())
}

/// Haar-random state in `ℂ^d ⊗ ℂ^d`.
pub fn random_bipartite(d: usize, rng: &mut impl Rng) -> Result<BipartiteState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    BipartiteState::new(d, gaussian_vector(d * d, rng).normalized())
}

/// Phases `-2πkl/d`, `l = 0..d`, of the state prepared at Alice's input when
/// Bob projects a maximally entangled pair onto his Fourier vector `k`.
pub fn fourier_phases(d: usize, k: usize) -> Vec<f64> {
    (0..d)
        .map(|l| -2.0 * PI * ((k * l) % d) as f64 / d as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{commuting_generators, su_basis};
    use crate::operator::partial_trace_b;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn qubit_plus_state() {
        let s = phase_state(2, &[0.0, 0.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for z in s.amplitudes().entries() {
            assert!((z - C64::new(h, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn phase_state_moduli_and_expectations() {
        let s = phase_state(3, &[0.3, -2.0, 1.1]).unwrap();
        for z in s.amplitudes().entries() {
            assert!((z.norm_sqr() - 1.0 / 3.0).abs() < 1e-15);
        }
        let s4 = phase_state(4, &[0.0, PI / 2.0, PI, 1.5 * PI]).unwrap();
        for t in commuting_generators(4).unwrap().mats() {
            assert!(t.expectation(s4.amplitudes()).norm() < 1e-15);
        }
        assert!(matches!(
            phase_state(3, &[0.0; 2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn maximally_entangled_basics() {
        let s = maximally_entangled(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = [h, 0.0, 0.0, h];
        for (z, w) in s.amplitudes().entries().iter().zip(want) {
            assert!((z - C64::new(w, 0.0)).norm() < 1e-15);
        }
        for d in 2..=5 {
            let s = maximally_entangled(d).unwrap();
            let reduced = partial_trace_b(&Operator::projector(s.amplitudes()), d, d).unwrap();
            let mixed = Operator::identity(d).scale_real(1.0 / d as f64);
            assert!(reduced.max_abs_diff(&mixed) < 1e-15);
            let t = bloch_coefficients(&s, &su_basis(d).unwrap()).unwrap();
            assert!(t.iter().all(|x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn partial_trace_equals_r_r_dagger() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for d in 2..=4 {
            let s = random_bipartite(d, &mut rng).unwrap();
            let via_trace = partial_trace_b(&Operator::projector(s.amplitudes()), d, d).unwrap();
            assert!(via_trace.max_abs_diff(&s.reduced_density()) < 1e-15);
        }
    }

    #[test]
    fn product_state_bloch_coefficient() {
        let s = BipartiteState::new(2, ComplexVector::basis(4, 0)).unwrap();
        let t = bloch_coefficients(&s, &su_basis(2).unwrap()).unwrap();
        assert!((t[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(t[1].abs() < 1e-15 && t[2].abs() < 1e-15);
    }

    #[test]
    fn bloch_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for d in 2..=4 {
            let basis = su_basis(d).unwrap();
            let s = random_bipartite(d, &mut rng).unwrap();
            let t = bloch_coefficients(&s, &basis).unwrap();
            let back = basis.reconstruct(1.0, &t).unwrap();
            assert!(back.max_abs_diff(&s.reduced_density()) < 1e-10);
        }
        let s = maximally_entangled(3).unwrap();
        assert!(bloch_coefficients(&s, &commuting_generators(3).unwrap()).is_err());
        assert!(bloch_coefficients(&s, &su_basis(2).unwrap()).is_err());
    }

    #[test]
    fn mpeu_equivalent_examples() {
        for d in 2..=4 {
            let eq = mpeu_equivalent(&maximally_entangled(d).unwrap(), None).unwrap();
            assert!(
                eq.amplitudes()
                    .max_abs_diff(phase_state(d, &vec![0.0; d]).unwrap().amplitudes())
                    < 1e-15
            );
        }
        let r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.7f64.sqrt(), 0.0),
            C64::new(0.3f64.sqrt(), 0.0),
        ]));
        let s = BipartiteState::from_coefficients(&r).unwrap();
        let eq = mpeu_equivalent(&s, None).unwrap();
        assert!((eq.amplitudes().entries()[0].re - 0.7f64.sqrt()).abs() < 1e-15);
        assert!((eq.amplitudes().entries()[1].re - 0.3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn random_states_are_deterministic_and_normalized() {
        let a = random_bipartite(3, &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        let b = random_bipartite(3, &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
        assert!((a.amplitudes().norm() - 1.0).abs() < 1e-12);
        let p = random_pure(5, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        assert!((p.amplitudes().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_first_moment() {
        // E|ψ_0|² = 1/d, Var = (d-1)/(d²(d+1))
        let d = 4;
        let n = 100_000;
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let mean = (0..n)
            .map(|_| random_pure(d, &mut rng).unwrap().amplitudes().entries()[0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        let var = (d - 1) as f64 / ((d * d * (d + 1)) as f64);
        let sigma = (var / n as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn json_round_trip_and_dispatch() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let b = InputState::Bipartite(random_bipartite(2, &mut rng).unwrap());
        assert_eq!(InputState::from_json(&b.to_json()).unwrap(), b);
        let p = InputState::Pure(random_pure(3, &mut rng).unwrap());
        assert_eq!(InputState::from_json(&p.to_json()).unwrap(), p);
        let bad = serde_json::json!({"d": 2, "re": [1.0, 1.0], "im": [0.0, 0.0]});
        assert!(InputState::from_json(&bad).is_err());
        let wrong_len = serde_json::json!({"d": 2, "re": [1.0, 0.0, 0.0], "im": [0.0, 0.0, 0.0]});
        assert!(InputState::from_json(&wrong_len).is_err());
    }
}
