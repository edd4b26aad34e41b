use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cayley_gibbs::boundary_law::{chain_from_law, natural_law, ChainKernel};
use cayley_gibbs::config::RunConfig;
use cayley_gibbs::estimators::{
    cov_csv, depth_sweep, estimate_bad_rate, estimate_cov_decay, estimate_overlap, estimate_qea,
    estimate_reconstruction, overlap_csv, sweep_csv, SweepReport,
};
use cayley_gibbs::geometry::Spacing;
use cayley_gibbs::model::{constants, eigen_report, lambda_details, ModelSpec};
use cayley_gibbs::oracle::Fault;
use cayley_gibbs::verify::run_verification;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

const SCHEMA_VERSION: u32 = 1;
const BUILD: &str = concat!("cayley-gibbs ", env!("CARGO_PKG_VERSION"));
/// Output directory, used when neither `--out-dir` nor `run.output_dir` is set.
const OUT_ENV: &str = "CAYLEY_GIBBS_OUT";
const DEFAULT_OUT: &str = "cayley-gibbs-out";
/// Exit code when the verification matrix has failing cases.
const VERIFY_FAILED: u8 = 1;

#[derive(Parser)]
#[command(
    name = "cayley-gibbs",
    version,
    about = "Boundary laws, exact inference and Monte Carlo estimators for ferromagnetic models on Cayley trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boundary law, transition matrix, marginal, p1, lambda2 and bound constants.
    ChainInfo(ModelArgs),
    /// Bound constants (delta0, epsilon1, lambda(p1), epsilon2) and the clock spectrum.
    Bounds(ModelArgs),
    /// Run a Monte Carlo estimator over the configured depths.
    Estimate {
        #[arg(value_enum)]
        kind: EstimateKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the verification matrix.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateKind {
    Reconstruction,
    Qea,
    Overlap,
    BadRate,
    CovDecay,
}

impl EstimateKind {
    fn name(self) -> &'static str {
        match self {
            EstimateKind::Reconstruction => "reconstruction",
            EstimateKind::Qea => "qea",
            EstimateKind::Overlap => "overlap",
            EstimateKind::BadRate => "bad-rate",
            EstimateKind::CovDecay => "cov-decay",
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Override `model.beta`.
    #[arg(long)]
    beta: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<u32>>,
    #[arg(long)]
    truncation: Option<usize>,
    /// e.g. `geometric:4`, `constant:3`, `arithmetic:2,1`, `list:2,3,5`.
    #[arg(long)]
    spacing: Option<Spacing>,
    #[arg(long)]
    direction_seed: Option<u64>,
    #[arg(long)]
    spin: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    distances: Option<Vec<u32>>,
    #[arg(long)]
    ray_depth: Option<u32>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Write the full JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corrupt the enumeration oracle to confirm the matrix catches it.
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipPairSign,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<cayley_gibbs::Error> for Failure {
    fn from(e: cayley_gibbs::Error) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(args: &ModelArgs) -> CliResult<RunConfig> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_failure(&args.config, e))?;
    let mut config = RunConfig::from_toml_str(&text)?;
    if let Some(beta) = args.beta {
        config.model.beta = beta;
    }
    Ok(config)
}

fn apply_run_overrides(config: &mut RunConfig, args: &RunArgs) {
    let run = &mut config.run;
    if let Some(v) = args.seed {
        run.seed = Some(v);
    }
    if let Some(v) = args.samples {
        run.samples = v;
    }
    if let Some(v) = args.workers {
        run.workers = Some(v);
    }
    if let Some(v) = args.depth {
        run.depth = v;
        run.depths = None;
    }
    if let Some(v) = &args.depths {
        run.depths = Some(v.clone());
    }
    if let Some(v) = args.truncation {
        run.truncation = v;
    }
    if let Some(v) = &args.spacing {
        run.spacing = v.clone();
    }
    if let Some(v) = args.direction_seed {
        run.direction_seed = v;
    }
    if let Some(v) = args.spin {
        run.spin = v;
    }
    if let Some(v) = &args.distances {
        run.distances = v.clone();
    }
    if let Some(v) = args.ray_depth {
        run.ray_depth = v;
    }
    if let Some(v) = &args.out_dir {
        run.output_dir = Some(v.display().to_string());
    }
}

/// The configuration as echoed in records. The worker count and output
/// directory are left out: results never depend on them.
fn config_echo(config: &RunConfig) -> Value {
    let mut echo = config.clone();
    echo.run.workers = None;
    echo.run.output_dir = None;
    serde_json::to_value(echo).expect("configuration serializes")
}

fn envelope(kind: &str, config: &RunConfig, body: impl Serialize) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "build": BUILD,
        "record": kind,
        "config": config_echo(config),
        "result": body,
    })
}

fn emit_json(value: &Value, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| io_failure(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn kernel_of(
    spec: &ModelSpec,
) -> CliResult<(cayley_gibbs::boundary_law::BoundaryLaw, ChainKernel)> {
    let law = natural_law(spec)?;
    let kernel = chain_from_law(spec, &law)?;
    Ok((law, kernel))
}

fn cmd_chain_info(args: &ModelArgs) -> CliResult<()> {
    let config = load_config(args)?;
    let spec = config.model.build()?;
    let (law, kernel) = kernel_of(&spec)?;
    let bounds = with_p1(&spec, kernel.p1)?;
    let body = json!({ "law": law, "kernel": kernel, "bounds": bounds });
    emit_json(&envelope("chain-info", &config, body), args.out.as_deref())
}

fn with_p1(spec: &ModelSpec, p1: f64) -> CliResult<cayley_gibbs::model::BoundsReport> {
    let base = constants(spec);
    Ok(if p1 > 0.0 && p1 < 1.0 {
        base.with_p1(spec, p1)?
    } else {
        base
    })
}

fn cmd_bounds(args: &ModelArgs) -> CliResult<()> {
    let config = load_config(args)?;
    let spec = config.model.build()?;
    let (_, kernel) = kernel_of(&spec)?;
    let bounds = with_p1(&spec, kernel.p1)?;
    let lambda = if kernel.p1 > 0.0 && kernel.p1 < 1.0 {
        Some(lambda_details(kernel.p1, &spec)?)
    } else {
        None
    };
    let spectrum = if spec.clock_flag() {
        Some(eigen_report(&spec)?)
    } else {
        None
    };
    let body = json!({ "bounds": bounds, "lambda": lambda, "spectrum": spectrum });
    emit_json(&envelope("bounds", &config, body), args.out.as_deref())
}

fn output_dir(config: &RunConfig) -> PathBuf {
    config
        .run
        .output_dir
        .clone()
        .or_else(|| std::env::var(OUT_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_OUT.to_string())
        .into()
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn json_lines(records: &[Value]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

fn sweep_record(config: &RunConfig, sweep: &SweepReport) -> Value {
    envelope(
        "sweep",
        config,
        json!({ "series": sweep.series, "deltas": sweep.deltas, "converged": sweep.converged }),
    )
}

fn cmd_estimate(kind: EstimateKind, args: &RunArgs) -> CliResult<()> {
    let mut config = load_config(&args.model)?;
    apply_run_overrides(&mut config, args);
    let spec = config.validate()?;
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let opts = config.run_options(default_workers)?;
    let dir = output_dir(&config);
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let mut outputs = Outputs {
        dir,
        written: Vec::new(),
    };
    let name = kind.name();
    let depths = config.depths();
    let run = &config.run;

    let mut records = Vec::new();
    match kind {
        EstimateKind::Reconstruction | EstimateKind::Qea => {
            let sweep = depth_sweep(&depths, |n| match kind {
                EstimateKind::Reconstruction => estimate_reconstruction(&spec, run.spin, n, &opts),
                _ => estimate_qea(&spec, n, &opts),
            })?;
            records.extend(sweep.reports.iter().map(|r| envelope(name, &config, r)));
            records.push(sweep_record(&config, &sweep));
            outputs.write(&format!("{name}_sweep.csv"), &sweep_csv(&sweep))?;
        }
        EstimateKind::Overlap => {
            let mut csv = String::new();
            let mut series = Vec::new();
            let sweep = depth_sweep(&depths, |n| {
                let s = estimate_overlap(&spec, &run.spacing, n, run.direction_seed, &opts)?;
                let gap = s.gap_report();
                series.push(s);
                Ok(gap)
            })?;
            for (k, s) in series.iter().enumerate() {
                records.push(envelope(name, &config, s));
                let table = overlap_csv(s);
                // One header for the whole file.
                let skip = if k == 0 {
                    0
                } else {
                    table.find('\n').map_or(0, |i| i + 1)
                };
                csv.push_str(&table[skip..]);
            }
            records.push(sweep_record(&config, &sweep));
            outputs.write("overlap.csv", &csv)?;
            outputs.write("overlap_sweep.csv", &sweep_csv(&sweep))?;
        }
        EstimateKind::BadRate => {
            let mut full = Vec::new();
            let sweep = depth_sweep(&depths, |n| {
                let r = estimate_bad_rate(&spec, run.truncation, n, &run.spacing, &opts)?;
                let report = r.report.clone();
                full.push(r);
                Ok(report)
            })?;
            records.extend(full.iter().map(|r| envelope(name, &config, r)));
            records.push(sweep_record(&config, &sweep));
            outputs.write("bad-rate_sweep.csv", &sweep_csv(&sweep))?;
        }
        EstimateKind::CovDecay => {
            let r =
                estimate_cov_decay(&spec, &run.distances, run.truncation, run.ray_depth, &opts)?;
            records.push(envelope(name, &config, &r));
            outputs.write("cov-decay.csv", &cov_csv(&r))?;
        }
    }
    outputs.write(&format!("{name}.jsonl"), &json_lines(&records))?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for path in &outputs.written {
        let _ = writeln!(lock, "{}", path.display());
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<bool> {
    let fault = args.inject_fault.map(|f| match f {
        FaultArg::FlipPairSign => Fault::FlipPairSign,
    });
    let report = run_verification(fault)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for case in &report.cases {
        let _ = writeln!(
            lock,
            "{} {}/{} error={:e} tolerance={:e}",
            if case.passed { "PASS" } else { "FAIL" },
            case.suite,
            case.name,
            case.error,
            case.tolerance
        );
    }
    let failed = report.failures().count();
    let _ = writeln!(lock, "{} cases, {failed} failed", report.cases.len());
    if let Some(path) = &args.out {
        let value = json!({
            "schema_version": SCHEMA_VERSION,
            "build": BUILD,
            "record": "verify",
            "result": report,
        });
        emit_json(&value, Some(path))?;
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::ChainInfo(args) => cmd_chain_info(args).map(|_| true),
        Command::Bounds(args) => cmd_bounds(args).map(|_| true),
        Command::Estimate { kind, run } => cmd_estimate(*kind, run).map(|_| true),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(VERIFY_FAILED),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
