//! Monte Carlo N-copy experiments: multinomial sampling, maximum-likelihood
//! estimation, mean-square-error matrices and average fidelities.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{outcome_distribution, OutcomeDistribution, P_FLOOR};
use crate::measurement::{
    default_recipe_matrix, locc_povm_mpee_with_eta, recipe_povm, shift_povm, Povm,
};
use crate::model::{Model, ModelKind};
use crate::operator::ComplexVector;
use crate::qfi::qfi;
use crate::states::{maximally_entangled, phase_state, random_bipartite, random_pure, InputState};

/// Half-width of the MLE search box around the center, per coordinate.
pub const SEARCH_RADIUS: f64 = std::f64::consts::FRAC_PI_2;
/// Distance of the four perturbed starting points from the center.
pub const START_RADIUS: f64 = 0.1;
/// Convergence threshold on the score divided by the number of copies.
pub const GRAD_TOL: f64 = 1e-9;
pub const MAX_ITER: usize = 500;
/// Fraction of non-converged trials above which a run aborts.
pub const MAX_FAILURE_RATE: f64 = 0.01;
/// Header comment of the CSV output.
pub const CSV_VERSION_LINE: &str = "# phase-est-lab v1";

/// Trials are evaluated in parallel in blocks of this size and merged in order.
const CHUNK: usize = 256;
/// Fisher steps shorter than this are taken without a line search, since the
/// log-likelihood change is below its rounding error.
const SMALL_STEP: f64 = 1e-6;
/// Stream reserved for sampling a random input state.
const STATE_STREAM: u64 = u64::MAX;

/// Draw `n` outcomes from `dist` as per-label counts, via sequential
/// conditional binomials.
pub fn sample_outcomes(dist: &OutcomeDistribution, n: u64, rng: &mut impl Rng) -> Vec<u64> {
    let probs = &dist.probabilities;
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining, q)
            .expect("probability clamped to [0, 1]")
            .sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    counts
}

/// Log-likelihood `Σ c_ξ ln p_ξ(θ)` with its gradient and the expected
/// information `(Σ c) I(θ)`. Probabilities are clamped at `P_FLOOR`.
#[derive(Clone, Debug)]
pub struct Likelihood {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub information: DMatrix<f64>,
}

pub fn log_likelihood(
    counts: &[f64],
    model: &Model,
    povm: &Povm,
    theta: &[f64],
) -> Result<Likelihood> {
    if counts.len() != povm.len() {
        return Err(Error::DimensionMismatch {
            expected: povm.len(),
            found: counts.len(),
        });
    }
    let dist = outcome_distribution(model, theta, povm)?;
    let total: f64 = counts.iter().sum();
    let p = dist.num_params();
    let mut value = 0.0;
    let mut gradient = DVector::zeros(p);
    let mut information = DMatrix::zeros(p, p);
    for (xi, (&c, &prob)) in counts.iter().zip(&dist.probabilities).enumerate() {
        let grad = dist.gradients.column(xi);
        let clamped = prob.max(P_FLOOR);
        if c > 0.0 {
            value += c * clamped.ln();
            gradient += grad * (c / clamped);
        }
        if prob > P_FLOOR {
            information += grad * grad.transpose() * (total / prob);
        }
    }
    Ok(Likelihood {
        value,
        gradient,
        information,
    })
}

fn clamp_to_box(theta: &mut [f64], center: &[f64]) {
    for (t, c) in theta.iter_mut().zip(center) {
        *t = t.clamp(c - SEARCH_RADIUS, c + SEARCH_RADIUS);
    }
}

/// Center plus `±r·(1,…,1)/√p` and `±r·(1,−1,…)/√p`.
fn starting_points(center: &[f64]) -> Vec<Vec<f64>> {
    let p = center.len();
    let s = START_RADIUS / (p as f64).sqrt();
    let mut starts = vec![center.to_vec()];
    for sign in [1.0, -1.0] {
        starts.push(center.iter().map(|c| c + sign * s).collect());
    }
    for sign in [1.0, -1.0] {
        starts.push(
            center
                .iter()
                .enumerate()
                .map(|(k, c)| c + sign * if k % 2 == 0 { s } else { -s })
                .collect(),
        );
    }
    starts
}

struct Ascent {
    theta: Vec<f64>,
    lik: Likelihood,
    converged: bool,
}

/// Fisher scoring with backtracking, confined to the search box.
fn ascend(
    counts: &[f64],
    total: f64,
    model: &Model,
    povm: &Povm,
    start: Vec<f64>,
    center: &[f64],
) -> Result<Ascent> {
    let mut theta = start;
    clamp_to_box(&mut theta, center);
    let mut lik = log_likelihood(counts, model, povm, &theta)?;
    for _ in 0..MAX_ITER {
        if lik.gradient.norm() / total < GRAD_TOL {
            return Ok(Ascent {
                theta,
                lik,
                converged: true,
            });
        }
        let dir = match lik.information.clone().cholesky() {
            Some(ch) => ch.solve(&lik.gradient),
            None => &lik.gradient / total,
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand: Vec<f64> = theta
                .iter()
                .zip(dir.iter())
                .map(|(t, d)| t + step * d)
                .collect();
            clamp_to_box(&mut cand, center);
            if cand == theta {
                break;
            }
            let moved = cand
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let next = log_likelihood(counts, model, povm, &cand)?;
            if next.value >= lik.value || moved < SMALL_STEP {
                accepted = Some((cand, next));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((t, l)) => {
                theta = t;
                lik = l;
            }
            None => break,
        }
    }
    let converged = lik.gradient.norm() / total < GRAD_TOL;
    Ok(Ascent {
        theta,
        lik,
        converged,
    })
}

/// Maximum-likelihood estimate within `center ± π/2`, started from the center
/// and four nearby points. Fails with `NonConvergence` when no start reaches
/// a stationary point or the likelihood is flat there.
pub fn mle(counts: &[u64], model: &Model, povm: &Povm, center: &[f64]) -> Result<Vec<f64>> {
    let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    mle_weighted(&counts, model, povm, center)
}

/// [`mle`] for real-valued (e.g. expected) counts.
pub fn mle_weighted(
    counts: &[f64],
    model: &Model,
    povm: &Povm,
    center: &[f64],
) -> Result<Vec<f64>> {
    model.check_theta(center)?;
    let total: f64 = counts.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::InvalidArgument(
            "counts must contain at least one outcome".into(),
        ));
    }
    let mut best: Option<Ascent> = None;
    let mut best_converged: Option<Ascent> = None;
    for start in starting_points(center) {
        let run = ascend(counts, total, model, povm, start, center)?;
        let slot = if run.converged {
            &mut best_converged
        } else {
            &mut best
        };
        if slot.as_ref().is_none_or(|b| run.lik.value > b.lik.value) {
            *slot = Some(run);
        }
    }
    let Some(found) = best_converged else {
        let best = best.map(|b| b.theta).unwrap_or_default();
        return Err(Error::NonConvergence {
            reason: format!("score did not vanish within {MAX_ITER} iterations"),
            best,
        });
    };
    let info = &found.lik.information / total;
    let scale = info.norm().max(1.0);
    let flat = info.symmetric_eigen().eigenvalues.min() <= 1e-10 * scale;
    if flat {
        return Err(Error::NonConvergence {
            reason: "likelihood is flat at the stationary point".into(),
            best: found.theta,
        });
    }
    Ok(found.theta)
}

/// `|⟨a|b⟩|²` for two pure states of the same kind and dimension.
pub fn fidelity(a: &InputState, b: &InputState) -> Result<f64> {
    let same_kind = matches!(
        (a, b),
        (InputState::Pure(_), InputState::Pure(_))
            | (InputState::Bipartite(_), InputState::Bipartite(_))
    );
    if !same_kind {
        return Err(Error::InvalidArgument(
            "fidelity between a pure and a bipartite state".into(),
        ));
    }
    vector_fidelity(a.amplitudes(), b.amplitudes())
}

pub fn vector_fidelity(a: &ComplexVector, b: &ComplexVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.inner(b).norm_sqr())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSpec {
    Optimal,
    Maxent,
    Random,
    #[serde(untagged)]
    File {
        file: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PovmSpec {
    Optimal,
    Locc,
    #[serde(untagged)]
    File {
        file: PathBuf,
    },
}

fn default_state() -> StateSpec {
    StateSpec::Optimal
}

fn default_povm() -> PovmSpec {
    PovmSpec::Optimal
}

/// One Monte Carlo experiment at a fixed number of copies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub d: usize,
    #[serde(default = "default_state")]
    pub state: StateSpec,
    #[serde(default = "default_povm")]
    pub povm: PovmSpec,
    /// Qubit recipe rotation angle; ignored for `d ≥ 3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// True parameter; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub copies: u64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub dump_estimates: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CopiesGrid {
    One(u64),
    Many(Vec<u64>),
}

/// Config file layout: as [`ExperimentConfig`] but `copies` may be a list.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: ModelKind,
    d: usize,
    #[serde(default = "default_state")]
    state: StateSpec,
    #[serde(default = "default_povm")]
    povm: PovmSpec,
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default)]
    theta: Option<Vec<f64>>,
    copies: CopiesGrid,
    trials: u64,
    seed: u64,
    #[serde(default)]
    dump_estimates: bool,
}

fn key_line(text: &str, key: &str) -> String {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(pos) => format!("line {}: ", text[..pos].matches('\n').count() + 1),
        None => String::new(),
    }
}

/// Parse a config file into one experiment per entry of its `copies` grid.
/// Relative state and POVM paths are resolved against `base`.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<Vec<ExperimentConfig>> {
    let raw: ConfigFile = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let grid = match raw.copies {
        CopiesGrid::One(n) => vec![n],
        CopiesGrid::Many(v) => v,
    };
    if grid.is_empty() {
        return Err(Error::Config(format!(
            "{}copies must not be empty",
            key_line(text, "copies")
        )));
    }
    let resolve = |p: PathBuf| match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    };
    let state = match raw.state {
        StateSpec::File { file } => StateSpec::File {
            file: resolve(file),
        },
        s => s,
    };
    let povm = match raw.povm {
        PovmSpec::File { file } => PovmSpec::File {
            file: resolve(file),
        },
        s => s,
    };
    let configs: Vec<ExperimentConfig> = grid
        .into_iter()
        .map(|copies| ExperimentConfig {
            model: raw.model,
            d: raw.d,
            state: state.clone(),
            povm: povm.clone(),
            eta: raw.eta,
            theta: raw.theta.clone(),
            copies,
            trials: raw.trials,
            seed: raw.seed,
            dump_estimates: raw.dump_estimates,
        })
        .collect();
    for cfg in &configs {
        cfg.validate()
            .map_err(|(key, msg)| Error::Config(format!("{}{msg}", key_line(text, key))))?;
    }
    Ok(configs)
}

pub fn load_config(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent())
}

impl ExperimentConfig {
    pub fn num_params(&self) -> usize {
        match self.model {
            ModelKind::Full => self.d * self.d - 1,
            _ => self.d - 1,
        }
    }

    pub fn true_theta(&self) -> Vec<f64> {
        self.theta
            .clone()
            .unwrap_or_else(|| vec![0.0; self.num_params()])
    }

    /// Field-level checks; the error names the offending key.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.d < 2 {
            return Err(("d", format!("d must be at least 2, got {}", self.d)));
        }
        if self.copies < 1 {
            return Err(("copies", "copies must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(("trials", "trials must be at least 1".into()));
        }
        if let Some(t) = &self.theta {
            if t.len() != self.num_params() {
                return Err((
                    "theta",
                    format!(
                        "theta has {} entries, model needs {}",
                        t.len(),
                        self.num_params()
                    ),
                ));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(("theta", "theta must be finite".into()));
            }
        }
        if let Some(eta) = self.eta {
            if !eta.is_finite() {
                return Err(("eta", "eta must be finite".into()));
            }
        }
        if self.povm == PovmSpec::Locc && self.model != ModelKind::Mpee {
            return Err(("povm", "the locc measurement needs the mpee model".into()));
        }
        if self.state == StateSpec::Maxent && self.model == ModelKind::Mpeu {
            return Err(("state", "maxent input needs a bipartite model".into()));
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        self.validate().map_err(|(_, msg)| Error::Config(msg))
    }
}

/// Model, measurement and true outcome distribution for a config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub model: Model,
    pub povm: Povm,
    pub theta: Vec<f64>,
    pub distribution: OutcomeDistribution,
}

/// Input state for a model kind; `random` draws from a stream of `seed`
/// reserved for states.
pub fn build_input(kind: ModelKind, d: usize, spec: &StateSpec, seed: u64) -> Result<InputState> {
    let bipartite = kind != ModelKind::Mpeu;
    let input = match spec {
        StateSpec::Optimal | StateSpec::Maxent if bipartite => {
            InputState::Bipartite(maximally_entangled(d)?)
        }
        StateSpec::Optimal => InputState::Pure(phase_state(d, &vec![0.0; d])?),
        StateSpec::Maxent => {
            return Err(Error::Config("maxent input needs a bipartite model".into()))
        }
        StateSpec::Random => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(STATE_STREAM);
            if bipartite {
                InputState::Bipartite(random_bipartite(d, &mut rng)?)
            } else {
                InputState::Pure(random_pure(d, &mut rng)?)
            }
        }
        StateSpec::File { file } => {
            let text = std::fs::read_to_string(file)?;
            InputState::from_json(&serde_json::from_str(&text)?)?
        }
    };
    if input.local_dim() != d {
        return Err(Error::Config(format!(
            "state has d = {}, expected d = {d}",
            input.local_dim()
        )));
    }
    Ok(input)
}

pub fn build_model(kind: ModelKind, input: InputState) -> Result<Model> {
    match (kind, input) {
        (ModelKind::Mpeu, InputState::Pure(s)) => Model::mpeu(s),
        (ModelKind::Mpee, InputState::Bipartite(s)) => Model::mpee(s),
        (ModelKind::Full, InputState::Bipartite(s)) => Model::full(s),
        _ => Err(Error::Config(format!(
            "state kind does not fit the {kind} model"
        ))),
    }
}

/// `optimal`: the recipe measurement at `theta`; `locc`: the LOCC measurement
/// shifted to `theta`; otherwise a POVM file.
pub fn build_povm(model: &Model, spec: &PovmSpec, theta: &[f64], eta: Option<f64>) -> Result<Povm> {
    match spec {
        PovmSpec::Optimal => {
            let o = default_recipe_matrix(model.num_params() + 1, eta);
            recipe_povm(model, theta, &o)
        }
        PovmSpec::Locc => {
            if model.kind() != ModelKind::Mpee {
                return Err(Error::Config(
                    "the locc measurement needs the mpee model".into(),
                ));
            }
            let base = locc_povm_mpee_with_eta(model.d(), eta)?;
            shift_povm(&base, model.generators(), theta, true)
        }
        PovmSpec::File { file } => {
            let text = std::fs::read_to_string(file)?;
            let povm = Povm::from_json(&serde_json::from_str(&text)?)?;
            if povm.dim() != model.hilbert_dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.hilbert_dim(),
                    found: povm.dim(),
                });
            }
            Ok(povm)
        }
    }
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.check()?;
    let model = build_model(
        cfg.model,
        build_input(cfg.model, cfg.d, &cfg.state, cfg.seed)?,
    )?;
    let theta = cfg.true_theta();
    let povm = build_povm(&model, &cfg.povm, &theta, cfg.eta)?;
    let distribution = outcome_distribution(&model, &theta, &povm)?;
    Ok(Setup {
        model,
        povm,
        theta,
        distribution,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub model: ModelKind,
    pub d: usize,
    pub copies: u64,
    pub trials: u64,
    pub seed: u64,
    pub theta: Vec<f64>,
    /// QFI at the true parameter.
    pub qfi: Vec<Vec<f64>>,
    /// `V = E[(θ̂ − θ)(θ̂ − θ)ᵀ]` over converged trials.
    pub mse: Vec<Vec<f64>>,
    pub mean_estimate: Vec<f64>,
    /// `F = E|⟨ψ(θ)|ψ(θ̂)⟩|²`.
    pub fidelity: f64,
    /// `N·V`.
    pub scaled_mse: Vec<Vec<f64>>,
    /// `N(1 − F)`.
    pub scaled_infidelity: f64,
    /// `N·tr(H V)/4`, the second-order prediction of `N(1 − F)`.
    pub scaled_trace_hv: f64,
    pub failures: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<Vec<f64>>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

enum TrialOutcome {
    Estimate { theta: Vec<f64>, fidelity: f64 },
    Failed,
}

fn run_trial(
    setup: &Setup,
    psi: &ComplexVector,
    copies: u64,
    seed: u64,
    index: u64,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let counts = sample_outcomes(&setup.distribution, copies, &mut rng);
    match mle(&counts, &setup.model, &setup.povm, &setup.theta) {
        Ok(theta) => {
            let fidelity = vector_fidelity(psi, &setup.model.output_vector(&theta)?)?;
            Ok(TrialOutcome::Estimate { theta, fidelity })
        }
        Err(Error::NonConvergence { .. }) => Ok(TrialOutcome::Failed),
        Err(e) => Err(e),
    }
}

/// Single-pass means of `θ̂`, `(θ̂ − θ)(θ̂ − θ)ᵀ` and the fidelity.
struct Accumulator {
    n: u64,
    mean: DVector<f64>,
    second: DMatrix<f64>,
    fidelity: f64,
}

impl Accumulator {
    fn new(p: usize) -> Self {
        Accumulator {
            n: 0,
            mean: DVector::zeros(p),
            second: DMatrix::zeros(p, p),
            fidelity: 0.0,
        }
    }

    fn push(&mut self, estimate: &DVector<f64>, truth: &DVector<f64>, fidelity: f64) {
        self.n += 1;
        let w = 1.0 / self.n as f64;
        let err = estimate - truth;
        self.mean += (estimate - &self.mean) * w;
        self.second += (&err * err.transpose() - &self.second) * w;
        self.fidelity += (fidelity - self.fidelity) * w;
    }
}

/// Run `trials` independent experiments of `copies` measurements each. Each
/// trial draws from its own ChaCha20 stream keyed by `(seed, trial index)`, so
/// results do not depend on the number of worker threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let setup = setup(cfg)?;
    let p = setup.model.num_params();
    let psi = setup.model.output_vector(&setup.theta)?;
    let truth = DVector::from_column_slice(&setup.theta);
    let max_failures = (MAX_FAILURE_RATE * cfg.trials as f64).floor() as u64;

    let mut acc = Accumulator::new(p);
    let mut failures = 0u64;
    let mut estimates = cfg.dump_estimates.then(Vec::new);
    let mut start = 0u64;
    while start < cfg.trials {
        let end = (start + CHUNK as u64).min(cfg.trials);
        let chunk: Vec<Result<TrialOutcome>> = (start..end)
            .into_par_iter()
            .map(|i| run_trial(&setup, &psi, cfg.copies, cfg.seed, i))
            .collect();
        for outcome in chunk {
            match outcome? {
                TrialOutcome::Estimate { theta, fidelity } => {
                    acc.push(&DVector::from_column_slice(&theta), &truth, fidelity);
                    if let Some(list) = estimates.as_mut() {
                        list.push(theta);
                    }
                }
                TrialOutcome::Failed => failures += 1,
            }
        }
        if failures > max_failures {
            return Err(Error::TooManyFailures {
                failures,
                trials: cfg.trials,
            });
        }
        start = end;
    }

    let h = qfi(&setup.model, &setup.theta)?;
    let n = cfg.copies as f64;
    let scaled = &acc.second * n;
    let scaled_trace_hv = (h.entries() * &scaled).trace() / 4.0;
    Ok(ExperimentResult {
        model: cfg.model,
        d: cfg.d,
        copies: cfg.copies,
        trials: cfg.trials,
        seed: cfg.seed,
        theta: setup.theta.clone(),
        qfi: rows(h.entries()),
        mse: rows(&acc.second),
        mean_estimate: acc.mean.iter().copied().collect(),
        fidelity: acc.fidelity,
        scaled_mse: rows(&scaled),
        scaled_infidelity: n * (1.0 - acc.fidelity),
        scaled_trace_hv,
        failures,
        estimates,
    })
}

/// Column names of the CSV row for `p` parameters.
pub fn csv_header(p: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["d", "model", "N", "trials", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 1..=p {
        for j in 1..=p {
            cols.push(format!("NV_{i}{j}"));
        }
    }
    cols.push("NF_infidelity".into());
    cols.push("failures".into());
    cols
}

impl ExperimentResult {
    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn csv_record(&self) -> Vec<String> {
        let mut rec = vec![
            self.d.to_string(),
            self.model.to_string(),
            self.copies.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
        ];
        rec.extend(self.scaled_mse.iter().flatten().map(|x| x.to_string()));
        rec.push(self.scaled_infidelity.to_string());
        rec.push(self.failures.to_string());
        rec
    }
}

/// Version comment, header and one row per result. All results must share the
/// parameter count.
pub fn write_csv(results: &[ExperimentResult], mut out: impl Write) -> Result<()> {
    let p = results.first().map_or(0, |r| r.num_params());
    if let Some(r) = results.iter().find(|r| r.num_params() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: r.num_params(),
        });
    }
    writeln!(out, "{CSV_VERSION_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(p))?;
    for r in results {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::optimal_povm_mpeu;
    use crate::states::PureState;

    fn qubit_setup() -> (Model, Povm) {
        let m = Model::mpeu(phase_state(2, &[0.0, 0.0]).unwrap()).unwrap();
        let povm = optimal_povm_mpeu(2, &[0.0, 0.0], None).unwrap();
        (m, povm)
    }

    fn dist(probs: Vec<f64>) -> OutcomeDistribution {
        let n = probs.len();
        OutcomeDistribution {
            labels: (1..=n).map(|k| k.to_string()).collect(),
            probabilities: probs,
            gradients: DMatrix::zeros(1, n),
        }
    }

    #[test]
    fn degenerate_distribution_puts_all_counts_on_one_label() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(
            sample_outcomes(&dist(vec![0.0, 1.0, 0.0]), 500, &mut rng),
            vec![0, 500, 0]
        );
    }

    #[test]
    fn uniform_counts_within_five_sigma() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let n = 1_000_000u64;
        let counts = sample_outcomes(&dist(vec![0.25; 4]), n, &mut rng);
        assert_eq!(counts.iter().sum::<u64>(), n);
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 250_000.0).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = dist(vec![0.1, 0.2, 0.3, 0.4]);
        let a = sample_outcomes(&d, 1000, &mut ChaCha20Rng::seed_from_u64(9));
        let b = sample_outcomes(&d, 1000, &mut ChaCha20Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn expected_counts_recover_true_parameter() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let m = Model::mpeu(random_pure(3, &mut rng).unwrap()).unwrap();
        let truth = [0.3, -0.2];
        let o = default_recipe_matrix(3, None);
        let povm = recipe_povm(&m, &truth, &o).unwrap();
        let probs = outcome_distribution(&m, &truth, &povm)
            .unwrap()
            .probabilities;
        let counts: Vec<u64> = probs.iter().map(|p| (p * 1e12).round() as u64).collect();
        let est = mle(&counts, &m, &povm, &[0.25, -0.15]).unwrap();
        for (e, t) in est.iter().zip(truth) {
            assert!((e - t).abs() < 1e-6, "{est:?}");
        }
    }

    #[test]
    fn balanced_qubit_counts_give_zero() {
        let (m, povm) = qubit_setup();
        let est = mle(&[5000, 5000], &m, &povm, &[0.0]).unwrap();
        assert!(est[0].abs() < 1e-9);
    }

    #[test]
    fn trivial_povm_reports_non_convergence() {
        let (m, _) = qubit_setup();
        let r = mle(&[100], &m, &Povm::trivial(2), &[0.0]);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn curvature_scales_with_copies() {
        // observed information at expected counts equals N·I
        let (m, povm) = qubit_setup();
        let theta = [0.2];
        let probs = outcome_distribution(&m, &theta, &povm)
            .unwrap()
            .probabilities;
        let fisher = crate::fisher::fi(&m, &theta, &povm).unwrap().get(0, 0);
        let eps = 1e-5;
        let curvature = |n: f64| {
            let counts: Vec<f64> = probs.iter().map(|p| n * p).collect();
            let g = |t: f64| log_likelihood(&counts, &m, &povm, &[t]).unwrap().gradient[0];
            -(g(theta[0] + eps) - g(theta[0] - eps)) / (2.0 * eps)
        };
        let (c1, c2) = (curvature(100.0), curvature(10_000.0));
        assert!((c1 / 100.0 - fisher).abs() < 1e-6);
        assert!((c2 / c1 - 100.0).abs() < 1e-6);
    }

    #[test]
    fn fidelity_basics() {
        let a = InputState::Pure(PureState::new(ComplexVector::basis(3, 0)).unwrap());
        let b = InputState::Pure(PureState::new(ComplexVector::basis(3, 2)).unwrap());
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let c = InputState::Bipartite(maximally_entangled(3).unwrap());
        assert!(fidelity(&a, &c).is_err());
    }

    #[test]
    fn fidelity_matches_second_order_expansion() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for model in [
            Model::mpeu(random_pure(3, &mut rng).unwrap()).unwrap(),
            Model::mpee(random_bipartite(3, &mut rng).unwrap()).unwrap(),
        ] {
            let theta = [0.4, -0.7];
            let delta = [1e-3, -0.6e-3];
            let h = qfi(&model, &theta).unwrap();
            let shifted: Vec<f64> = theta.iter().zip(delta).map(|(a, b)| a + b).collect();
            let f = vector_fidelity(
                &model.output_vector(&theta).unwrap(),
                &model.output_vector(&shifted).unwrap(),
            )
            .unwrap();
            let mut quad = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    quad += h.get(a, b) * delta[a] * delta[b];
                }
            }
            assert!((f - (1.0 - quad / 4.0)).abs() < 1e-7);
        }
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelKind::Mpeu,
            d: 2,
            state: StateSpec::Optimal,
            povm: PovmSpec::Optimal,
            eta: None,
            theta: Some(vec![0.3]),
            copies: 500,
            trials: 300,
            seed: 11,
            dump_estimates: true,
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = single.install(|| run_experiment(&cfg)).unwrap();
        assert_eq!(a, c);
        assert_eq!(
            a.estimates.as_ref().unwrap().len() as u64 + a.failures,
            cfg.trials
        );
    }

    #[test]
    fn small_experiment_is_near_the_bound() {
        let r = run_experiment(&small_config()).unwrap();
        assert_eq!(r.failures, 0);
        // H = 2 for the optimal qubit input; 300 trials give roughly 8% spread
        assert!(
            (r.scaled_mse[0][0] - 0.5).abs() < 0.15,
            "{}",
            r.scaled_mse[0][0]
        );
        assert!((r.scaled_infidelity - r.scaled_trace_hv).abs() < 0.05);
    }

    #[test]
    fn suboptimal_input_costs_variance() {
        let cfg = ExperimentConfig {
            d: 3,
            state: StateSpec::Random,
            theta: None,
            copies: 2000,
            trials: 400,
            dump_estimates: false,
            ..small_config()
        };
        let r = run_experiment(&cfg).unwrap();
        let h = crate::info::InformationMatrix::new(DMatrix::from_fn(2, 2, |i, j| r.qfi[i][j]))
            .unwrap();
        let bound = h.inverse().unwrap().trace();
        // the optimal input reaches (d - 1) d / 4
        assert!(bound > 1.5);
        let trace_nv = r.scaled_mse[0][0] + r.scaled_mse[1][1];
        assert!(trace_nv >= 0.85 * bound, "{trace_nv} vs {bound}");
    }

    #[test]
    fn config_grid_and_line_numbers() {
        let text = "{\n  \"model\": \"mpee\",\n  \"d\": 3,\n  \"state\": \"maxent\",\n  \"povm\": \"locc\",\n  \"copies\": [100, 1000],\n  \"trials\": 10,\n  \"seed\": 4\n}";
        let cfgs = parse_config(text, None).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[1].copies, 1000);
        let bad = text.replace("[100, 1000]", "[100, 0]");
        let err = parse_config(&bad, None).unwrap_err().to_string();
        assert!(err.contains("line 6"), "{err}");
        let unknown = text.replace("\"seed\"", "\"sed\"");
        assert!(parse_config(&unknown, None)
            .unwrap_err()
            .to_string()
            .contains("line"));
        let with_file = text.replace("\"maxent\"", "{\"file\": \"s.json\"}");
        let cfgs = parse_config(&with_file, Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!(
            cfgs[0].state,
            StateSpec::File {
                file: "/tmp/x/s.json".into()
            }
        );
    }

    #[test]
    fn csv_layout() {
        let r = run_experiment(&ExperimentConfig {
            trials: 20,
            dump_estimates: false,
            ..small_config()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_VERSION_LINE);
        assert_eq!(
            lines[1],
            "d,model,N,trials,seed,NV_11,NF_infidelity,failures"
        );
        assert!(lines[2].starts_with("2,mpeu,500,20,11,"));
    }
}
