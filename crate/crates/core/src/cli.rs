//! Command-line front end. Every subcommand writes one JSON document or a
//! versioned CSV table; failures go to stderr as a JSON error object.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimation::{
    build_input, build_model, build_povm, csv_header, load_config, run_experiment, vector_fidelity,
    PovmSpec, StateSpec, CSV_VERSION_LINE,
};
use crate::fisher::qcrb_report;
use crate::generators::su_basis;
use crate::info::InformationMatrix;
use crate::model::{Model, ModelKind};
use crate::qfi::{max_qfi_trace, qfi, quasiclassicality_witness, trace_bound};
use crate::states::{maximally_entangled, random_bipartite};

/// Ratios above `d² - 1` by more than this count as violations.
const BOUND_TOL: f64 = 1e-8;
/// Deviation `‖H - I‖` below which a measurement is reported as saturating.
const SATURATION_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(
    name = "phase-est-lab",
    version,
    about = "Multiple-phase estimation of commuting unitaries"
)]
pub struct Cli {
    /// Local dimension d (at least 2).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(2..))]
    pub d: Option<u64>,

    /// Seed for every random draw; required with --format csv.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Mpeu,
    Mpee,
    Full,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Mpeu => ModelKind::Mpeu,
            ModelArg::Mpee => ModelKind::Mpee,
            ModelArg::Full => ModelKind::Full,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// QFI matrix, its trace and the quasiclassicality witness.
    Qfi(ModelArgs),
    /// Optimal or LOCC measurement as JSON.
    Povm(PovmArgs),
    /// Classical FI of a measurement against the QFI.
    Fi(FiArgs),
    /// Monte Carlo MLE experiments over the N-grid of a config file.
    Simulate(SimulateArgs),
    /// Exact fidelity along a ray against its second-order expansion.
    FidelityScan(ScanArgs),
    /// Random check of the full-SU(d) trace bound.
    TraceBound(TraceArgs),
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Mpeu)]
    pub model: ModelArg,

    /// optimal, maxent, random, or a state JSON file.
    #[arg(long, default_value = "optimal")]
    pub state: String,

    /// Comma-separated parameter vector; zeros by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct PovmArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// optimal or locc.
    #[arg(long, default_value = "optimal")]
    pub kind: String,

    /// Qubit recipe rotation angle.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FiArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// optimal, locc, or a POVM JSON file.
    #[arg(long, default_value = "optimal")]
    pub povm: String,

    /// Point the optimal or LOCC measurement is built for; zeros by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub povm_theta: Option<Vec<f64>>,

    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Comma-separated direction; normalized. Defaults to (1, ..., 1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,

    #[arg(long, default_value_t = 0.5)]
    pub max_delta: f64,

    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

/// A command result in both encodings.
struct Report {
    json: Value,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn state_spec(s: &str) -> StateSpec {
    match s {
        "optimal" => StateSpec::Optimal,
        "maxent" => StateSpec::Maxent,
        "random" => StateSpec::Random,
        path => StateSpec::File { file: path.into() },
    }
}

fn povm_spec(s: &str) -> PovmSpec {
    match s {
        "optimal" => PovmSpec::Optimal,
        "locc" => PovmSpec::Locc,
        path => PovmSpec::File { file: path.into() },
    }
}

fn require_d(cli: &Cli) -> Result<usize> {
    cli.d
        .map(|d| d as usize)
        .ok_or_else(|| Error::Config("--d is required for this command".into()))
}

fn theta_or_zero(theta: &Option<Vec<f64>>, model: &Model) -> Result<Vec<f64>> {
    let t = theta
        .clone()
        .unwrap_or_else(|| vec![0.0; model.num_params()]);
    model.check_theta(&t)?;
    Ok(t)
}

fn model_from(cli: &Cli, args: &ModelArgs) -> Result<Model> {
    let d = require_d(cli)?;
    let kind = ModelKind::from(args.model);
    build_model(
        kind,
        build_input(kind, d, &state_spec(&args.state), cli.seed.unwrap_or(0))?,
    )
}

fn matrix_columns(prefix: &str, p: usize) -> Vec<String> {
    (1..=p)
        .flat_map(|i| (1..=p).map(move |j| format!("{prefix}_{i}{j}")))
        .collect()
}

fn matrix_values(m: &InformationMatrix) -> Vec<String> {
    m.row_major().iter().map(|x| x.to_string()).collect()
}

fn cmd_qfi(cli: &Cli, args: &ModelArgs) -> Result<Report> {
    let model = model_from(cli, args)?;
    let theta = theta_or_zero(&args.theta, &model)?;
    let h = qfi(&model, &theta)?;
    let witness = quasiclassicality_witness(&model, &theta)?;
    let max_trace = if model.kind() == ModelKind::Full {
        None
    } else {
        Some(max_qfi_trace(model.d()))
    };
    let json = json!({
        "command": "qfi",
        "model": model.kind(),
        "d": model.d(),
        "state": args.state,
        "seed": cli.seed,
        "theta": theta,
        "qfi": h.to_json(),
        "trace": h.trace(),
        "max_trace": max_trace,
        "witness": witness,
    });
    let mut header: Vec<String> = ["d", "model", "trace", "max_trace", "witness"]
        .map(String::from)
        .to_vec();
    header.extend(matrix_columns("H", h.p()));
    let mut row = vec![
        model.d().to_string(),
        model.kind().to_string(),
        h.trace().to_string(),
        max_trace.map_or(String::new(), |x| x.to_string()),
        witness.to_string(),
    ];
    row.extend(matrix_values(&h));
    Ok(Report {
        json,
        header,
        rows: vec![row],
    })
}

fn cmd_povm(cli: &Cli, args: &PovmArgs) -> Result<Report> {
    let model = model_from(cli, &args.model)?;
    let theta = theta_or_zero(&args.model.theta, &model)?;
    let spec = match args.kind.as_str() {
        "optimal" => PovmSpec::Optimal,
        "locc" => PovmSpec::Locc,
        other => return Err(Error::Config(format!("unknown measurement kind '{other}'"))),
    };
    let povm = build_povm(&model, &spec, &theta, args.eta)?;
    let mut json = povm.to_json();
    json["completeness_error"] = json!(povm.completeness_error());
    json["model"] = json!(model.kind());
    json["theta"] = json!(theta);
    let header = ["label", "row", "col", "re", "im"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for (e, label) in povm.elements().iter().zip(povm.labels()) {
        for r in 0..e.dim() {
            for c in 0..e.dim() {
                let z = e.get(r, c);
                rows.push(vec![
                    label.clone(),
                    r.to_string(),
                    c.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ]);
            }
        }
    }
    Ok(Report { json, header, rows })
}

fn cmd_fi(cli: &Cli, args: &FiArgs) -> Result<Report> {
    let model = model_from(cli, &args.model)?;
    let theta = theta_or_zero(&args.model.theta, &model)?;
    let at = theta_or_zero(&args.povm_theta, &model)?;
    let povm = build_povm(&model, &povm_spec(&args.povm), &at, args.eta)?;
    let report = qcrb_report(&model, &theta, &povm)?;
    let saturated = report.deviation <= SATURATION_TOL;
    let json = json!({
        "command": "fi",
        "model": model.kind(),
        "d": model.d(),
        "theta": theta,
        "povm_theta": at,
        "eta": args.eta,
        "fi": report.fi.to_json(),
        "qfi": report.qfi.to_json(),
        "gap": report.gap,
        "deviation": report.deviation,
        "saturated": saturated,
    });
    let p = report.fi.p();
    let mut header: Vec<String> = ["d", "model", "gap", "deviation"]
        .map(String::from)
        .to_vec();
    header.extend(matrix_columns("I", p));
    header.extend(matrix_columns("H", p));
    let mut row = vec![
        model.d().to_string(),
        model.kind().to_string(),
        report.gap.to_string(),
        report.deviation.to_string(),
    ];
    row.extend(matrix_values(&report.fi));
    row.extend(matrix_values(&report.qfi));
    Ok(Report {
        json,
        header,
        rows: vec![row],
    })
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<Report> {
    let mut configs = load_config(&args.config)?;
    for cfg in &mut configs {
        if let Some(d) = cli.d {
            if d as usize != cfg.d {
                return Err(Error::Config(format!(
                    "--d {d} conflicts with d = {} in the config",
                    cfg.d
                )));
            }
        }
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
    }
    let results = configs
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    let p = results.first().map_or(0, |r| r.num_params());
    Ok(Report {
        json: serde_json::to_value(&results)?,
        header: csv_header(p),
        rows: results.iter().map(|r| r.csv_record()).collect(),
    })
}

fn cmd_fidelity_scan(cli: &Cli, args: &ScanArgs) -> Result<Report> {
    let model = model_from(cli, &args.model)?;
    let theta = theta_or_zero(&args.model.theta, &model)?;
    let p = model.num_params();
    let dir = args.direction.clone().unwrap_or_else(|| vec![1.0; p]);
    if dir.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: dir.len(),
        });
    }
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument(
            "direction must be a non-zero finite vector".into(),
        ));
    }
    if args.max_delta <= 0.0 || !args.max_delta.is_finite() {
        return Err(Error::InvalidArgument(
            "--max-delta must be positive".into(),
        ));
    }
    let unit: Vec<f64> = dir.iter().map(|x| x / norm).collect();
    let h = qfi(&model, &theta)?;
    let curvature: f64 = (0..p)
        .flat_map(|a| (0..p).map(move |b| (a, b)))
        .map(|(a, b)| h.get(a, b) * unit[a] * unit[b])
        .sum();
    let psi = model.output_vector(&theta)?;
    let mut points = Vec::with_capacity(args.points);
    for k in 1..=args.points {
        let delta = args.max_delta * k as f64 / args.points as f64;
        let shifted: Vec<f64> = theta
            .iter()
            .zip(&unit)
            .map(|(t, u)| t + delta * u)
            .collect();
        let f = vector_fidelity(&psi, &model.output_vector(&shifted)?)?;
        let quadratic = 1.0 - curvature * delta * delta / 4.0;
        points.push((delta, f, quadratic));
    }
    let json = json!({
        "command": "fidelity-scan",
        "model": model.kind(),
        "d": model.d(),
        "theta": theta,
        "direction": unit,
        "curvature": curvature,
        "points": points.iter().map(|(delta, f, q)| json!({
            "delta": delta, "fidelity": f, "quadratic": q, "residual": f - q,
        })).collect::<Vec<_>>(),
    });
    let header = ["delta", "fidelity", "quadratic", "residual"]
        .map(String::from)
        .to_vec();
    let rows = points
        .iter()
        .map(|(delta, f, q)| {
            vec![
                delta.to_string(),
                f.to_string(),
                q.to_string(),
                (f - q).to_string(),
            ]
        })
        .collect();
    Ok(Report { json, header, rows })
}

fn cmd_trace_bound(cli: &Cli, args: &TraceArgs) -> Result<Report> {
    let d = require_d(cli)?;
    let basis = su_basis(d)?;
    let bound = (d * d - 1) as f64;
    let p = basis.len();
    let mut rng = ChaCha20Rng::seed_from_u64(cli.seed.unwrap_or(0));

    let maxent = trace_bound(&maximally_entangled(d)?, &basis, &vec![0.0; p])?;
    let mut rows = vec![vec![
        "maxent".to_string(),
        String::new(),
        maxent.ratio.to_string(),
        maxent.closed_form.to_string(),
        maxent.casimir_residual.to_string(),
    ]];
    let mut samples = Vec::with_capacity(args.samples);
    for k in 0..args.samples {
        let s = random_bipartite(d, &mut rng)?;
        let theta: Vec<f64> = (0..p)
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let tb = trace_bound(&s, &basis, &theta)?;
        rows.push(vec![
            "sample".to_string(),
            k.to_string(),
            tb.ratio.to_string(),
            tb.closed_form.to_string(),
            tb.casimir_residual.to_string(),
        ]);
        samples.push(tb);
    }
    let max_ratio = samples.iter().map(|t| t.ratio).reduce(f64::max);
    let violations = samples
        .iter()
        .filter(|t| t.ratio > bound + BOUND_TOL)
        .count();
    let max_casimir = samples
        .iter()
        .chain(std::iter::once(&maxent))
        .map(|t| t.casimir_residual)
        .fold(0.0, f64::max);
    let max_closed_form_gap = samples
        .iter()
        .chain(std::iter::once(&maxent))
        .map(|t| (t.ratio - t.closed_form).abs())
        .fold(0.0, f64::max);
    let json = json!({
        "command": "trace-bound",
        "d": d,
        "seed": cli.seed,
        "samples": args.samples,
        "bound": bound,
        "max_ratio": max_ratio,
        "maxent_ratio": maxent.ratio,
        "violations": violations,
        "max_casimir_residual": max_casimir,
        "max_closed_form_gap": max_closed_form_gap,
        "ratios": samples.iter().map(|t| t.ratio).collect::<Vec<_>>(),
    });
    let header = ["kind", "sample", "ratio", "closed_form", "casimir_residual"]
        .map(String::from)
        .to_vec();
    Ok(Report { json, header, rows })
}

fn write_report(cli: &Cli, report: &Report) -> Result<()> {
    let mut buf = Vec::new();
    match cli.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &report.json)?;
            buf.push(b'\n');
        }
        Format::Csv => {
            writeln!(buf, "{CSV_VERSION_LINE}")?;
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&report.header)?;
            for row in &report.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
    }
    match &cli.output {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.format == Format::Csv && cli.seed.is_none() {
        return Err(Error::Config("--seed is required with --format csv".into()));
    }
    let report = match &cli.command {
        Command::Qfi(a) => cmd_qfi(cli, a)?,
        Command::Povm(a) => cmd_povm(cli, a)?,
        Command::Fi(a) => cmd_fi(cli, a)?,
        Command::Simulate(a) => cmd_simulate(cli, a)?,
        Command::FidelityScan(a) => cmd_fidelity_scan(cli, a)?,
        Command::TraceBound(a) => cmd_trace_bound(cli, a)?,
    };
    write_report(cli, &report)
}

fn error_object(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Parse `args`, run, and return the process exit code: 0 on success, 1 for
/// runtime errors, 2 for usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.render().to_string();
            eprintln!("{}", error_object("usage", msg.trim()));
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_object(e.kind(), &e.to_string()));
            1
        }
    }
}
