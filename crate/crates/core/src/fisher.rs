//! Outcome probabilities, classical Fisher information and the quantum
//! Cramér-Rao gap.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::info::{FiMatrix, InformationMatrix};
use crate::measurement::Povm;
use crate::model::Model;
use crate::qfi::qfi;

/// Outcomes below this probability are treated as zero-probability.
pub const P_FLOOR: f64 = 1e-12;
/// Zero-probability outcomes with a gradient above this make the FI singular.
pub const G_FLOOR: f64 = 1e-9;
/// Slightly negative probabilities from rounding are clipped to zero.
const NEGATIVE_CLIP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
    /// `gradients[(m, ξ)] = ∂_m p_ξ`.
    pub gradients: DMatrix<f64>,
}

impl OutcomeDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.gradients.nrows()
    }
}

/// `p_ξ(θ) = tr ρ(θ) M_ξ` and the analytic gradients `∂_m p_ξ = 2 Re⟨ψ|M_ξ|∂_mψ⟩`.
pub fn outcome_distribution(
    model: &Model,
    theta: &[f64],
    povm: &Povm,
) -> Result<OutcomeDistribution> {
    if povm.dim() != model.hilbert_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.hilbert_dim(),
            found: povm.dim(),
        });
    }
    let tan = model.tangent(theta)?;
    let n = povm.len();
    let mut probabilities = Vec::with_capacity(n);
    let mut gradients = DMatrix::zeros(tan.dpsi.len(), n);
    for (xi, (m, label)) in povm.elements().iter().zip(povm.labels()).enumerate() {
        let m_psi = m.apply(&tan.psi);
        let mut p = tan.psi.inner(&m_psi).re;
        if p < 0.0 {
            if p < -NEGATIVE_CLIP {
                return Err(Error::Numerical(format!(
                    "negative probability {p:e} for outcome '{label}'"
                )));
            }
            p = 0.0;
        }
        probabilities.push(p);
        for (k, dpsi) in tan.dpsi.iter().enumerate() {
            gradients[(k, xi)] = 2.0 * m_psi.inner(dpsi).re;
        }
    }
    Ok(OutcomeDistribution {
        labels: povm.labels().to_vec(),
        probabilities,
        gradients,
    })
}

/// `I_mn = Σ_ξ ∂_m p_ξ ∂_n p_ξ / p_ξ`, skipping removable zero-probability
/// outcomes and reporting divergent ones.
pub fn fi_from_distribution(dist: &OutcomeDistribution) -> Result<FiMatrix> {
    let p = dist.num_params();
    let mut info = DMatrix::zeros(p, p);
    for (xi, &prob) in dist.probabilities.iter().enumerate() {
        let grad = dist.gradients.column(xi);
        if prob <= P_FLOOR {
            let g = grad.norm();
            if g > G_FLOOR {
                return Err(Error::SingularFisher {
                    label: dist.labels[xi].clone(),
                    probability: prob,
                    gradient: g,
                });
            }
            continue;
        }
        info += grad * grad.transpose() / prob;
    }
    InformationMatrix::new(info)
}

pub fn fi(model: &Model, theta: &[f64], povm: &Povm) -> Result<FiMatrix> {
    fi_from_distribution(&outcome_distribution(model, theta, povm)?)
}

/// Comparison of the FI of a measurement with the QFI at one point.
#[derive(Clone, Debug)]
pub struct QcrbReport {
    pub qfi: InformationMatrix,
    pub fi: InformationMatrix,
    /// Minimum eigenvalue of `H - I`; never below `-1e-8` for a valid POVM.
    pub gap: f64,
    /// Largest entry of `|H - I|`; vanishes for saturating measurements.
    pub deviation: f64,
}

pub fn qcrb_report(model: &Model, theta: &[f64], povm: &Povm) -> Result<QcrbReport> {
    let h = qfi(model, theta)?;
    let i = fi(model, theta, povm)?;
    let diff = &h - &i;
    Ok(QcrbReport {
        gap: diff.min_eigenvalue(),
        deviation: h.max_abs_diff(&i),
        qfi: h,
        fi: i,
    })
}

/// Minimum eigenvalue of `H(θ) - I(M, θ)`.
pub fn qcrb_gap(model: &Model, theta: &[f64], povm: &Povm) -> Result<f64> {
    Ok(qcrb_report(model, theta, povm)?.gap)
}
