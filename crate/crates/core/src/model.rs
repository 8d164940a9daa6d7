//! Parametrized unitary models `ρ(θ) = U_θ ρ₀ U_θ†`.
//!
//! * `Mpeu`: `U_θ = exp(i Σ θ_m T_m)` on `ℂ^d`, commuting generators.
//! * `Mpee`: `U_θ = exp(i Σ θ_m T_m) ⊗ 𝟙` on `ℂ^d ⊗ ℂ^d`, commuting generators.
//! * `Full`: `U_θ = exp(i Σ θ_α T_α) ⊗ 𝟙` with the whole `su(d)` basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{commuting_generators, su_basis, GeneratorKind, GeneratorSet};
use crate::operator::{exp_frechet, tensor, unitary_exp, ComplexVector, Operator, I};
use crate::states::{BipartiteState, InputState, PureState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mpeu,
    Mpee,
    Full,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Mpeu => "mpeu",
            ModelKind::Mpee => "mpee",
            ModelKind::Full => "full",
        })
    }
}

/// A model family: kind, generators and fixed input state. Points of the
/// family are addressed by a parameter slice `theta`.
#[derive(Clone, Debug)]
pub struct Model {
    kind: ModelKind,
    generators: GeneratorSet,
    input: InputState,
    /// Generators acting on the full Hilbert space (`T` or `T ⊗ 𝟙`).
    lifted: Vec<Operator>,
}

/// Output vector and its parameter derivatives at one point.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub psi: ComplexVector,
    pub dpsi: Vec<ComplexVector>,
}

impl Model {
    pub fn new(kind: ModelKind, generators: GeneratorSet, input: InputState) -> Result<Self> {
        let d = generators.d();
        if input.local_dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: input.local_dim(),
            });
        }
        let want = match kind {
            ModelKind::Full => GeneratorKind::Full,
            _ => GeneratorKind::Commuting,
        };
        if generators.kind() != want {
            return Err(Error::InvalidArgument(format!(
                "{kind} model needs {want:?} generators"
            )));
        }
        match (kind, &input) {
            (ModelKind::Mpeu, InputState::Pure(_)) => {}
            (ModelKind::Mpee | ModelKind::Full, InputState::Bipartite(_)) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{kind} model does not accept this input state kind"
                )))
            }
        }
        let lifted = match kind {
            ModelKind::Mpeu => generators.mats().to_vec(),
            _ => {
                let id = Operator::identity(d);
                generators.mats().iter().map(|t| tensor(t, &id)).collect()
            }
        };
        Ok(Model {
            kind,
            generators,
            input,
            lifted,
        })
    }

    pub fn mpeu(input: PureState) -> Result<Self> {
        let g = commuting_generators(input.dim())?;
        Self::new(ModelKind::Mpeu, g, InputState::Pure(input))
    }

    pub fn mpee(input: BipartiteState) -> Result<Self> {
        let g = commuting_generators(input.d())?;
        Self::new(ModelKind::Mpee, g, InputState::Bipartite(input))
    }

    pub fn full(input: BipartiteState) -> Result<Self> {
        let g = su_basis(input.d())?;
        Self::new(ModelKind::Full, g, InputState::Bipartite(input))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.generators
    }

    pub fn input(&self) -> &InputState {
        &self.input
    }

    /// Local dimension `d`.
    pub fn d(&self) -> usize {
        self.generators.d()
    }

    /// Dimension of the space the output state lives in.
    pub fn hilbert_dim(&self) -> usize {
        self.input.amplitudes().dim()
    }

    pub fn num_params(&self) -> usize {
        self.generators.len()
    }

    fn is_tensored(&self) -> bool {
        self.kind != ModelKind::Mpeu
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        Ok(())
    }

    /// `exp(i Σ θ T)` on the local system.
    pub fn local_unitary(&self, theta: &[f64]) -> Result<Operator> {
        self.check_theta(theta)?;
        unitary_exp(&self.generators.combination(theta)?)
    }

    /// `U_θ` on the full Hilbert space.
    pub fn unitary(&self, theta: &[f64]) -> Result<Operator> {
        let v = self.local_unitary(theta)?;
        Ok(if self.is_tensored() {
            tensor(&v, &Operator::identity(self.d()))
        } else {
            v
        })
    }

    pub fn output_vector(&self, theta: &[f64]) -> Result<ComplexVector> {
        Ok(self.unitary(theta)?.apply(self.input.amplitudes()))
    }

    /// Hermitian `G_α(θ)` with `∂_α U_θ = i G_α(θ) U_θ`. For commuting
    /// generators this is the lifted `T_α` itself.
    pub fn effective_generators(&self, theta: &[f64]) -> Result<Vec<Operator>> {
        self.check_theta(theta)?;
        if self.kind != ModelKind::Full {
            return Ok(self.lifted.clone());
        }
        let h = self.generators.combination(theta)?;
        let v = unitary_exp(&h)?;
        let v_dag = v.adjoint();
        let id = Operator::identity(self.d());
        self.generators
            .mats()
            .iter()
            .map(|t| {
                let dv = exp_frechet(&h, t)?;
                let g = (&dv * &v_dag).scale(-I);
                Ok(tensor(&g, &id))
            })
            .collect()
    }

    pub fn tangent(&self, theta: &[f64]) -> Result<Tangent> {
        let psi = self.output_vector(theta)?;
        let dpsi = self
            .effective_generators(theta)?
            .iter()
            .map(|g| g.apply(&psi).scale(I))
            .collect();
        Ok(Tangent { psi, dpsi })
    }
}

/// Output state at `theta`, of the same kind as the model input.
pub fn output_state(model: &Model, theta: &[f64]) -> Result<InputState> {
    let v = model.output_vector(theta)?;
    Ok(match model.input() {
        InputState::Pure(_) => InputState::Pure(PureState::new(v)?),
        InputState::Bipartite(s) => InputState::Bipartite(BipartiteState::new(s.d(), v)?),
    })
}
