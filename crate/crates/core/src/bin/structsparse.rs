//! `structsparse` command-line front end.
//!
//! Every subcommand reads its inputs, writes its outputs atomically and
//! embeds `version` and `config_hash` in each JSON it produces. The hash
//! covers the effective settings and the contents of the input files, never
//! their paths. On failure a JSON error object goes to stderr; the exit
//! status is 2 for bad input and 3 for numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use structsparse::error::{Error, Result};
use structsparse::glm::{Dataset, GlmFamily};
use structsparse::io;
use structsparse::model::SparsityModel;
use structsparse::projection::{norm, project_bounded};
use structsparse::smrh::{analytic_smrh_bounds, contraction_gamma, empirical_smrh_probe, SmrhEstimate};
use structsparse::solver::{
    self, reference_gradient_term, verify_contraction, verify_contraction_per_step, SolverConfig, StepPolicy,
};
use structsparse::synth;

const DEFAULT_CAP: usize = 100_000;
const DEFAULT_TRIALS: usize = 2000;

#[derive(Parser)]
#[command(name = "structsparse", version, about = "Structured-sparse GLM estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a model-sparse parameter and a dataset from it.
    Gen(GenArgs),
    /// Run projected gradient descent on a dataset.
    Fit(FitArgs),
    /// Restricted Hessian constants for a dataset.
    Smrh(SmrhArgs),
    /// Bounded model projection of a vector.
    Project(ProjectArgs),
    /// Error decomposition at a known truth.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Linear,
    Logistic,
    Poisson,
}

#[derive(Clone, Copy, ValueEnum)]
enum Design {
    Gaussian,
    NearOrthogonal,
    Identity,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyName,
    /// Noise scale of the linear family.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

impl FamilyArgs {
    fn resolve(&self) -> Result<GlmFamily> {
        match self.family {
            FamilyName::Linear => GlmFamily::linear(self.sigma),
            FamilyName::Logistic => Ok(GlmFamily::Logistic),
            FamilyName::Poisson => Ok(GlmFamily::Poisson),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    n: usize,
    /// Nonzero coordinates in the parameter; defaults to the model order.
    #[arg(long)]
    k_active: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    magnitude: f64,
    /// Covariate rows are shrunk onto this ball (Gaussian design only).
    #[arg(long, default_value_t = 1.0)]
    covariate_scale: f64,
    #[arg(long, value_enum, default_value_t = Design::Gaussian)]
    design: Design,
    /// Gaussian perturbation of the near-orthogonal design.
    #[arg(long, default_value_t = 0.05)]
    perturbation: f64,
    /// Linear family only: responses are exactly `Xθ*`.
    #[arg(long)]
    noiseless: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV; `<stem>.json` and `<stem>_theta.csv` are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    radius: f64,
    /// `fixed:<eta>`, `optimal` or `adaptive`.
    #[arg(long, default_value = "optimal")]
    step: String,
    #[arg(long, default_value_t = solver::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = solver::DEFAULT_REL_TOL)]
    rel_tol: f64,
    /// Feasible reference point; enables distance tracking and the contraction audit.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Probe trials when the curvature constants cannot be enumerated.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimate CSV; `<stem>_trace.csv` and `<stem>.json` are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SmrhArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Ball radius; `inf` projects onto the model alone.
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    vector: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Input file contents together with their hash.
struct Input {
    text: String,
    sha256: String,
}

fn read_input(path: &Path) -> Result<Input> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let sha256 = io::sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|_| Error::Parse(format!("{} is not UTF-8", path.display())))?;
    Ok(Input { text, sha256 })
}

fn load_model(input: &Input) -> Result<SparsityModel> {
    Ok(serde_json::from_str(&input.text)?)
}

fn config_hash(settings: &Value) -> String {
    io::sha256_hex(settings.to_string().as_bytes())
}

/// Adds `version` and `config_hash` to a JSON report.
fn stamp(mut report: Value, hash: &str) -> Value {
    if let Value::Object(map) = &mut report {
        map.insert("version".into(), json!(structsparse::VERSION));
        map.insert("config_hash".into(), json!(hash));
    }
    report
}

fn emit_json(report: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn family_json(family: &GlmFamily) -> Value {
    serde_json::to_value(family).unwrap_or(Value::Null)
}

fn parse_step(spec: &str) -> Result<Option<f64>> {
    match spec {
        "optimal" => Ok(None),
        "adaptive" => Ok(Some(f64::NAN)),
        _ => {
            let eta = spec
                .strip_prefix("fixed:")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("--step must be fixed:<eta>, optimal or adaptive, got {spec:?}")))?;
            Ok(Some(eta))
        }
    }
}

/// Analytic constants, or the empirical probe when `C³` is too large.
fn curvature(
    model: &SparsityModel,
    data: &Dataset,
    family: &GlmFamily,
    radius: f64,
    cap: usize,
    trials: usize,
    seed: u64,
) -> Result<SmrhEstimate> {
    match analytic_smrh_bounds(model, data, family, radius, cap) {
        Err(Error::EnumerationBudget { .. }) => {
            let (lo, hi) = empirical_smrh_probe(model, data, family, radius, trials, seed)?;
            SmrhEstimate::from_probe(lo, hi, radius, trials)
        }
        other => other,
    }
}

fn smrh_json(est: &SmrhEstimate) -> Value {
    json!({
        "alpha": est.alpha,
        "beta": est.beta,
        "mu": est.mu,
        "eta_star": est.eta_star(),
        "gamma_at_eta_star": est.gamma_at_eta_star(),
        "method": est.method,
        "supports_examined": est.supports_examined,
    })
}

fn run_gen(args: &GenArgs) -> Result<()> {
    let model_in = read_input(&args.model)?;
    let model = load_model(&model_in)?;
    let family = args.family.resolve()?;
    if args.noiseless && !matches!(family, GlmFamily::Linear { .. }) {
        return Err(Error::InvalidArgument("--noiseless applies to the linear family only".into()));
    }
    let p = model.ambient_dim();
    let k_active = args.k_active.unwrap_or_else(|| model.order());
    let theta = synth::gen_parameter(&model, args.radius, k_active, args.seed, args.magnitude)?;
    let x = match args.design {
        Design::Gaussian => synth::gen_design(args.n, p, args.covariate_scale, args.seed)?,
        Design::NearOrthogonal => synth::near_orthogonal_design(args.n, p, args.perturbation, args.seed)?,
        Design::Identity => {
            if args.n != p {
                return Err(Error::InvalidArgument(format!("identity design needs n = p = {p}, got n = {}", args.n)));
            }
            DMatrix::identity(p, p) * (p as f64).sqrt()
        }
    };
    let data = if args.noiseless {
        synth::noiseless_linear_dataset(x, &theta)?
    } else {
        let y = synth::gen_responses(&family, &x, &theta, args.seed)?;
        Dataset::new(x, y)?
    };

    let design = match args.design {
        Design::Gaussian => json!({"kind": "gaussian", "covariate_scale": args.covariate_scale}),
        Design::NearOrthogonal => json!({"kind": "near_orthogonal", "perturbation": args.perturbation}),
        Design::Identity => json!({"kind": "identity"}),
    };
    let settings = json!({
        "command": "gen",
        "model_sha256": model_in.sha256,
        "family": family_json(&family),
        "radius": args.radius,
        "n": args.n,
        "k_active": k_active,
        "magnitude": args.magnitude,
        "design": design,
        "noiseless": args.noiseless,
        "seed": args.seed,
    });
    let hash = config_hash(&settings);
    let theta_path = sibling(&args.out, "_theta.csv");
    let sidecar = stamp(
        json!({
            "seed": args.seed,
            "family": family_json(&family),
            "model": model,
            "radius": args.radius,
            "n": args.n,
            "p": p,
            "k_active": k_active,
            "magnitude": args.magnitude,
            "design": design,
            "noiseless": args.noiseless,
            "theta_star": vec_json(&theta),
            "data_file": file_name(&args.out),
            "theta_file": file_name(&theta_path),
        }),
        &hash,
    );
    io::write_atomic(&args.out, io::format_dataset_csv(&data).as_bytes())?;
    io::write_atomic(&theta_path, io::format_vector_csv(&theta).as_bytes())?;
    emit_json(&sidecar, Some(&sibling(&args.out, ".json")))
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let model_in = read_input(&args.model)?;
    let data_in = read_input(&args.data)?;
    let reference_in = args.reference.as_deref().map(read_input).transpose()?;
    let model = load_model(&model_in)?;
    let data = io::parse_dataset_csv(&data_in.text)?;
    let family = args.family.resolve()?;
    let reference = reference_in.as_ref().map(|r| io::parse_vector_csv(&r.text)).transpose()?;
    let step = parse_step(&args.step)?;

    let needs_constants = step.is_none() || reference.is_some();
    let constants = if needs_constants {
        match curvature(&model, &data, &family, args.radius, args.cap, args.trials, args.seed) {
            Ok(c) => Some(Ok(c)),
            // Only the optimal step cannot proceed without constants.
            Err(e) if step.is_none() => return Err(e),
            Err(e) => Some(Err(e)),
        }
    } else {
        None
    };
    let policy = match step {
        None => {
            let c = constants.as_ref().and_then(|c| c.as_ref().ok()).expect("constants computed");
            StepPolicy::FixedOptimal {
                alpha: c.alpha,
                beta: c.beta,
            }
        }
        Some(eta) if eta.is_nan() => StepPolicy::Adaptive,
        Some(eta) => StepPolicy::Fixed { eta },
    };
    let mut config = SolverConfig::new(policy, args.radius)
        .with_max_iters(args.max_iters)
        .with_rel_tol(args.rel_tol);
    if let Some(r) = &reference {
        config = config.with_reference(r.clone());
    }
    let (theta, trace) = solver::fit(&model, &family, &data, &config)?;

    let audit = match (&reference, &constants) {
        (Some(r), Some(Ok(c))) => {
            let (_, grad_term) = reference_gradient_term(&model, args.radius, &family, &data, r)?;
            let report = match policy {
                StepPolicy::Adaptive => verify_contraction_per_step(&trace, c.eta_star(), c.mu, grad_term)?,
                StepPolicy::Fixed { eta } => {
                    verify_contraction(&trace, r, contraction_gamma(eta, c.eta_star(), c.mu), eta, grad_term)?
                }
                StepPolicy::FixedOptimal { .. } => {
                    verify_contraction(&trace, r, c.gamma_at_eta_star(), c.eta_star(), grad_term)?
                }
            };
            json!({
                "status": if report.holds() { "holds" } else { "violated" },
                "certified": matches!(c.method, structsparse::smrh::Method::Analytic),
                "grad_term": grad_term,
                "report": report,
            })
        }
        (Some(_), Some(Err(e))) => json!({"status": "unavailable", "reason": e.to_string()}),
        _ => Value::Null,
    };

    let settings = json!({
        "command": "fit",
        "model_sha256": model_in.sha256,
        "data_sha256": data_in.sha256,
        "reference_sha256": reference_in.as_ref().map(|r| r.sha256.clone()),
        "family": family_json(&family),
        "radius": args.radius,
        "step": args.step,
        "max_iters": args.max_iters,
        "rel_tol": args.rel_tol,
        "cap": args.cap,
        "trials": args.trials,
        "seed": args.seed,
    });
    let hash = config_hash(&settings);
    let trace_path = sibling(&args.out, "_trace.csv");
    let eta = match policy {
        StepPolicy::Fixed { eta } => Some(eta),
        StepPolicy::FixedOptimal { alpha, beta } => Some(2.0 / (alpha + beta)),
        StepPolicy::Adaptive => None,
    };
    let summary = stamp(
        json!({
            "family": family_json(&family),
            "radius": args.radius,
            "step": policy,
            "eta": eta,
            "iterations": trace.iterations(),
            "converged": trace.converged,
            "final_objective": trace.final_objective,
            "final_support": trace.final_support,
            "estimate_norm": norm(&theta),
            "final_dist_to_ref": trace.final_dist_to_ref,
            "smrh": constants.as_ref().and_then(|c| c.as_ref().ok()).map(smrh_json),
            "audit": audit,
            "estimate_file": file_name(&args.out),
            "trace_file": file_name(&trace_path),
        }),
        &hash,
    );
    io::write_atomic(&args.out, io::format_vector_csv(&theta).as_bytes())?;
    io::write_atomic(&trace_path, io::format_trace_csv(&trace).as_bytes())?;
    emit_json(&summary, Some(&sibling(&args.out, ".json")))
}

fn run_smrh(args: &SmrhArgs) -> Result<()> {
    let model_in = read_input(&args.model)?;
    let data_in = read_input(&args.data)?;
    let model = load_model(&model_in)?;
    let data = io::parse_dataset_csv(&data_in.text)?;
    let family = args.family.resolve()?;
    let est = curvature(&model, &data, &family, args.radius, args.cap, args.trials, args.seed)?;
    let settings = json!({
        "command": "smrh",
        "model_sha256": model_in.sha256,
        "data_sha256": data_in.sha256,
        "family": family_json(&family),
        "radius": args.radius,
        "cap": args.cap,
        "trials": args.trials,
        "seed": args.seed,
    });
    emit_json(&stamp(smrh_json(&est), &config_hash(&settings)), args.out.as_deref())
}

fn run_project(args: &ProjectArgs) -> Result<()> {
    let model_in = read_input(&args.model)?;
    let vector_in = read_input(&args.vector)?;
    let model = load_model(&model_in)?;
    let v = io::parse_vector_csv(&vector_in.text)?;
    let result = project_bounded(&model, args.radius, &v)?;
    let settings = json!({
        "command": "project",
        "model_sha256": model_in.sha256,
        "vector_sha256": vector_in.sha256,
        // JSON has no infinity.
        "radius": args.radius.to_string(),
    });
    let report = serde_json::to_value(&result)?;
    emit_json(&stamp(report, &config_hash(&settings)), args.out.as_deref())
}

fn run_check(args: &CheckArgs) -> Result<()> {
    let model_in = read_input(&args.model)?;
    let data_in = read_input(&args.data)?;
    let truth_in = read_input(&args.truth)?;
    let model = load_model(&model_in)?;
    let data = io::parse_dataset_csv(&data_in.text)?;
    let truth = io::parse_vector_csv(&truth_in.text)?;
    let family = args.family.resolve()?;
    let decomposition = synth::error_decomposition(&model, args.radius, &family, &data, &truth, args.cap)?;
    let settings = json!({
        "command": "check",
        "model_sha256": model_in.sha256,
        "data_sha256": data_in.sha256,
        "truth_sha256": truth_in.sha256,
        "family": family_json(&family),
        "radius": args.radius,
        "cap": args.cap,
    });
    let report = serde_json::to_value(&decomposition)?;
    emit_json(&stamp(report, &config_hash(&settings)), args.out.as_deref())
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let body = json!({"error": {"kind": kind, "message": message}, "exit_code": code});
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string(), 2),
    };
    let outcome = match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Fit(a) => run_fit(a),
        Command::Smrh(a) => run_smrh(a),
        Command::Project(a) => run_project(a),
        Command::Check(a) => run_check(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_numerical() { 3 } else { 2 };
            fail(e.kind(), e.to_string(), code)
        }
    }
}
