use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qbcap::battery::capacity;
use qbcap::linalg::CMatrix;
use qbcap::photonics::{apply_noise, prepare_phi, CountRecord};
use qbcap::pipeline::{
    analyze_state, run_pipeline, simulate_theta, verify_relations, PipelineConfig, ReportBundle,
};
use qbcap::report::emit_report;
use qbcap::state::{matrix_from_json, MatrixJson};
use qbcap::tomography::{mle_reconstruct, MleOptions, TomographyJson};
use qbcap::{DensityMatrix, ObservableHamiltonian};
use serde::{Deserialize, Serialize};
use serde_json::Value;

const EXIT_VIOLATION: u8 = 1;
const EXIT_DEGENERATE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "qbcap", version, about = "Quantum battery capacity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate coincidence counts for the angles of a config.
    Simulate(SimulateArgs),
    /// Maximum-likelihood state from a counts file.
    Reconstruct(ReconstructArgs),
    /// All reported quantities of a two-photon state.
    Analyze(AnalyzeArgs),
    /// Simulate, reconstruct, bootstrap and write the report files.
    Pipeline(PipelineArgs),
    /// Check the capacity relations on random qubit states.
    VerifyRelations(VerifyArgs),
    /// Ergotropy, antiergotropy and capacity of a state.
    Capacity(CapacityArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulate only this angle (degrees).
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Counts file written by `simulate`, or a bare array of count records.
    counts: PathBuf,
    /// Report fidelity to the ideal state at this angle.
    #[arg(long)]
    theta: Option<f64>,
    /// White-noise strength of the target when `--theta` is given.
    #[arg(long, default_value_t = 0.0)]
    noise_strength: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// State file: output of `reconstruct` or a bare 4x4 matrix of [re, im].
    state: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    unit_energy: f64,
    #[arg(long, default_value_t = 2.0)]
    tsallis_q: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// json or csv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = qbcap::pipeline::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9, allow_hyphen_values = true)]
    tolerance: f64,
}

#[derive(Args)]
struct CapacityArgs {
    /// State file (matrix of [re, im] or an object with a `rho` field).
    #[arg(long)]
    state: PathBuf,
    /// Dimensionless levels in computational-basis order, e.g. `1,0`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "hamiltonian")]
    levels: Option<Vec<f64>>,
    /// Hamiltonian matrix file in absolute energy units.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    unit_energy: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_DEGENERATE,
            error,
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow::anyhow!(message.into()),
    }
}

#[derive(Serialize, Deserialize)]
struct SimulatedCounts {
    theta_deg: f64,
    records: Vec<CountRecord>,
}

fn write_json<T: Serialize>(value: &T, output: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => Ok(serde_json::from_value(read_json(p)?).with_context(|| format!("config {}", p.display()))?),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_matrix(path: &Path) -> anyhow::Result<CMatrix> {
    let value = read_json(path)?;
    let rows = value.get("rho").cloned().unwrap_or(value);
    let json: MatrixJson = serde_json::from_value(rows).context("expected a matrix of [re, im] pairs")?;
    Ok(matrix_from_json(&json)?)
}

fn load_state(path: &Path) -> anyhow::Result<DensityMatrix> {
    Ok(DensityMatrix::new(load_matrix(path)?)?)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(theta) = args.theta {
        let records = simulate_theta(&config, theta).map_err(anyhow::Error::from)?;
        write_json(&SimulatedCounts { theta_deg: theta, records }, args.output.as_deref())?;
        return Ok(());
    }
    if config.thetas.is_empty() {
        return Err(anyhow::anyhow!("config has no angles").into());
    }
    let all = config
        .thetas
        .iter()
        .map(|&theta| Ok(SimulatedCounts { theta_deg: theta, records: simulate_theta(&config, theta)? }))
        .collect::<qbcap::Result<Vec<_>>>()
        .map_err(anyhow::Error::from)?;
    write_json(&all, args.output.as_deref())?;
    Ok(())
}

fn reconstruct(args: ReconstructArgs) -> Result<(), Failure> {
    let value = read_json(&args.counts)?;
    let (records, file_theta): (Vec<CountRecord>, Option<f64>) = if value.is_array() {
        (serde_json::from_value(value).context("count records")?, None)
    } else {
        let sim: SimulatedCounts = serde_json::from_value(value).context("count records")?;
        (sim.records, Some(sim.theta_deg))
    };
    if records.is_empty() {
        return Err(anyhow::anyhow!("no count records").into());
    }
    if args.max_iter == 0 {
        return Err(usage("--max-iter must be at least 1"));
    }
    let options = MleOptions {
        max_iter: args.max_iter,
        grad_tol: args.grad_tol,
    };
    let mut result = mle_reconstruct(&records, None, &options).map_err(anyhow::Error::from)?;
    if let Some(theta) = args.theta.or(file_theta) {
        let target = apply_noise(
            &prepare_phi(theta).map_err(anyhow::Error::from)?,
            qbcap::photonics::NoiseModel::White,
            args.noise_strength,
        )
        .map_err(anyhow::Error::from)?;
        result = result.with_target(&target).map_err(anyhow::Error::from)?;
    }
    let json: TomographyJson = result.to_json();
    write_json(&json, args.output.as_deref())?;
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let rho = load_state(&args.state)?;
    let quantities = analyze_state(&rho, args.unit_energy, args.tsallis_q).map_err(anyhow::Error::from)?;
    write_json(&quantities, args.output.as_deref())?;
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<(), Failure> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(format) = &args.format {
        config.format = format.parse().map_err(|e: qbcap::Error| usage(e.to_string()))?;
    }
    let dir = PathBuf::from(&config.output_dir);
    if config.thetas.is_empty() {
        let format = config.format;
        emit_report(&ReportBundle::empty(config), format, &dir).map_err(anyhow::Error::from)?;
        return Err(anyhow::anyhow!("config has no angles; wrote manifest only").into());
    }
    let bundle = run_pipeline(&config).map_err(anyhow::Error::from)?;
    let files = emit_report(&bundle, config.format, &dir).map_err(anyhow::Error::from)?;
    for file in files {
        println!("{}", file.display());
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    if args.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let sweep = verify_relations(args.samples, args.seed, args.tolerance).map_err(anyhow::Error::from)?;
    for v in &sweep.violations {
        println!("{}", serde_json::to_string(v).map_err(anyhow::Error::from)?);
    }
    eprintln!(
        "{} samples, seed {}, tolerance {:e}: {} violations",
        sweep.samples,
        sweep.seed,
        sweep.tolerance,
        sweep.violations.len()
    );
    if sweep.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VIOLATION,
            error: anyhow::anyhow!("capacity relations violated"),
        })
    }
}

fn capacity_cmd(args: CapacityArgs) -> Result<(), Failure> {
    let rho = load_state(&args.state)?;
    let h = match (&args.levels, &args.hamiltonian) {
        (Some(levels), None) => ObservableHamiltonian::from_levels(levels, args.unit_energy),
        (None, Some(path)) => ObservableHamiltonian::from_matrix(&load_matrix(path)?, args.unit_energy),
        _ => return Err(usage("give exactly one of --levels or --hamiltonian")),
    }
    .map_err(anyhow::Error::from)?;
    let quantities = capacity(&rho, &h).map_err(anyhow::Error::from)?;
    write_json(&quantities, args.output.as_deref())?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Analyze(a) => analyze(a),
        Command::Pipeline(a) => pipeline(a),
        Command::VerifyRelations(a) => verify(a),
        Command::Capacity(a) => capacity_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
