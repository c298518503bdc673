//! `lmm`: simulate estimator risk on synthetic families, estimate a sorted
//! distribution from a counts file, or estimate a symmetric functional.
//!
//! Counts files are UTF-8 text: a header line `n=<rate>` followed by one
//! nonnegative integer count per line. All outputs are deterministic given
//! the seed: JSON files embed the seed and the full estimator config, and
//! re-running with the embedded values reproduces the file byte for byte.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or parse error.

#![forbid(unsafe_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lmm_core::functionals::{baseline_functional, estimate_functional, FunctionalSpec};
use lmm_core::metrics::{EstimatorKind, SamplingModel};
use lmm_core::sampling::{derive_rng, Family, STREAM_ESTIMATOR};
use lmm_core::{
    lmm_estimate, monte_carlo_risk, CountVector, LmmConfig, LmmDiagnostics, RiskReport,
};

#[derive(Parser)]
#[command(
    name = "lmm",
    version,
    about = "Local moment matching estimation for discrete distributions under sorted-L1 loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo risk comparison on a synthetic family; writes per-trial
    /// CSV and an aggregate JSON report.
    Simulate(SimulateArgs),
    /// Estimate the sorted distribution from a counts file; writes JSON.
    Estimate(EstimateArgs),
    /// Estimate a symmetric functional (and its plug-in baseline) from a
    /// counts file; writes JSON.
    Functional(FunctionalArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Synthetic family to draw the true distribution from.
    #[arg(long, value_enum)]
    family: FamilyName,
    /// Support size of the true distribution.
    #[arg(long = "S", value_parser = clap::value_parser!(u64).range(1..))]
    s: u64,
    /// Expected sample size (multinomial size or Poissonized rate).
    #[arg(long)]
    n: f64,
    /// Number of paired Monte Carlo trials.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Comma-separated estimators to run.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    estimators: Vec<EstimatorName>,
    #[arg(long, value_enum, default_value_t = ModelName::Multinomial)]
    model: ModelName,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long, default_value = "risk")]
    out_prefix: String,
    /// Zipf family: decay exponent.
    #[arg(long, default_value_t = 1.0)]
    zipf_exponent: f64,
    /// Two-level family: fraction of symbols on the high level.
    #[arg(long, default_value_t = 0.1)]
    two_level_fraction: f64,
    /// Two-level family: high/low probability ratio.
    #[arg(long, default_value_t = 10.0)]
    two_level_ratio: f64,
    /// Dirichlet family: symmetric concentration parameter.
    #[arg(long, default_value_t = 1.0)]
    dirichlet_alpha: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EstimateArgs {
    /// Counts file: header `n=<rate>`, then one count per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "estimate.json")]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct FunctionalArgs {
    /// Counts file: header `n=<rate>`, then one count per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "functional.json")]
    output: PathBuf,
    #[arg(long, value_enum)]
    functional: FunctionalName,
    /// Power-sum exponent, required for --functional power-sum.
    #[arg(long)]
    alpha: Option<f64>,
    /// Support-size cap, required for --functional support-size.
    #[arg(long)]
    k_bar: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Overrides for the estimator constants; unset flags keep the defaults.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    c3: Option<f64>,
    #[arg(long)]
    grid_factor: Option<usize>,
    #[arg(long)]
    theory_mode: bool,
    /// Known support size; caps the recovered mass and the output length.
    #[arg(long)]
    support_size: Option<u64>,
    /// Known lower bound on nonzero probabilities (forbidden-zone mode).
    #[arg(long)]
    support_lower: Option<f64>,
}

impl ConfigArgs {
    fn build(&self, seed: u64) -> LmmConfig {
        let defaults = LmmConfig::default();
        LmmConfig {
            c1: self.c1.unwrap_or(defaults.c1),
            c2: self.c2.unwrap_or(defaults.c2),
            c3: self.c3.unwrap_or(defaults.c3),
            theory_mode: self.theory_mode,
            grid_factor: self.grid_factor.unwrap_or(defaults.grid_factor),
            support_size: self.support_size,
            support_lower: self.support_lower,
            seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Uniform,
    Zipf,
    TwoLevel,
    Dirichlet,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum EstimatorName {
    Lmm,
    Empirical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    Multinomial,
    Poissonized,
}

impl ModelName {
    fn to_model(self) -> SamplingModel {
        match self {
            ModelName::Multinomial => SamplingModel::Multinomial,
            ModelName::Poissonized => SamplingModel::Poissonized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalName {
    Entropy,
    PowerSum,
    SupportSize,
}

/// Errors carrying their process exit code: usage and parse problems exit
/// with 2, runtime and I/O problems with 1.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<lmm_core::Error> for CliError {
    fn from(err: lmm_core::Error) -> Self {
        match err {
            lmm_core::Error::Parse { .. } | lmm_core::Error::Config(_) => {
                CliError::Usage(err.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(value) = std::env::var("LMM_THREADS") {
        match value.parse::<usize>() {
            Ok(threads) if threads >= 1 => {
                // Ignore failure: the global pool can only be set once.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
            _ => {
                eprintln!("error: LMM_THREADS must be a positive integer, got {value:?}");
                return ExitCode::from(2);
            }
        }
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Functional(args) => cmd_functional(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn build_family(args: &SimulateArgs) -> Family {
    match args.family {
        FamilyName::Uniform => Family::Uniform,
        FamilyName::Zipf => Family::Zipf {
            exponent: args.zipf_exponent,
        },
        FamilyName::TwoLevel => Family::TwoLevel {
            fraction: args.two_level_fraction,
            ratio: args.two_level_ratio,
        },
        FamilyName::Dirichlet => Family::Dirichlet {
            alpha: args.dirichlet_alpha,
        },
    }
}

/// Aggregate simulation output: the experiment parameters, the estimator
/// config, and one risk report per estimator.
#[derive(Serialize)]
struct SimulateOutput {
    seed: u64,
    family: Family,
    s: usize,
    n: f64,
    trials: usize,
    model: SamplingModel,
    estimators: Vec<String>,
    config: LmmConfig,
    reports: Vec<RiskReport>,
}

fn write_file(path: impl AsRef<std::path::Path>, contents: &str) -> Result<(), CliError> {
    let path = path.as_ref();
    fs::write(path, contents)
        .map_err(|err| CliError::Runtime(format!("cannot write {}: {err}", path.display())))
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let family = build_family(&args);
    let config = args.config.build(args.seed);
    config.validate()?;
    let model = args.model.to_model();
    let (s, trials) = (args.s as usize, args.trials as usize);

    let mut reports = Vec::new();
    for estimator in &args.estimators {
        let kind = match estimator {
            EstimatorName::Lmm => EstimatorKind::Lmm(config.clone()),
            EstimatorName::Empirical => EstimatorKind::SortedEmpirical,
        };
        reports.push(monte_carlo_risk(
            &family, s, args.n, trials, args.seed, model, &kind,
        )?);
    }

    let mut csv = String::from("estimator,family,S,n,model,seed,trial,loss\n");
    for report in &reports {
        for (trial, loss) in report.losses.iter().enumerate() {
            writeln!(
                csv,
                "{},{},{},{},{},{},{trial},{loss}",
                csv_field(&report.estimator),
                csv_field(&report.family.label()),
                report.s,
                report.n,
                report.model.label(),
                report.seed
            )
            .expect("writing to a string cannot fail");
        }
    }

    let output = SimulateOutput {
        seed: args.seed,
        family,
        s,
        n: args.n,
        trials,
        model,
        estimators: args
            .estimators
            .iter()
            .map(|e| label_of(*e).to_string())
            .collect(),
        config,
        reports,
    };
    let json = serde_json::to_string_pretty(&output)?;

    let csv_path = format!("{}.csv", args.out_prefix);
    let json_path = format!("{}.json", args.out_prefix);
    write_file(&csv_path, &csv)?;
    write_file(&json_path, &(json + "\n"))?;

    for report in &output.reports {
        println!(
            "{}: mean sorted-l1 {:.6} ± {:.6} over {} trials",
            report.estimator, report.mean_loss, report.std_error, report.trials
        );
    }
    println!("wrote {csv_path} and {json_path}");
    Ok(())
}

fn label_of(name: EstimatorName) -> &'static str {
    match name {
        EstimatorName::Lmm => "lmm",
        EstimatorName::Empirical => "empirical",
    }
}

/// Parses a counts file: line 1 must be `n=<rate>`, every following line one
/// nonnegative integer. Line numbers in errors are 1-based.
fn read_counts(path: &PathBuf) -> Result<CountVector, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::Runtime(format!("cannot read {}: {err}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(lmm_core::Error::Parse {
        line: 1,
        message: "empty file, expected a header line n=<rate>".into(),
    })?;
    let rate: f64 = header
        .trim()
        .strip_prefix("n=")
        .ok_or_else(|| lmm_core::Error::Parse {
            line: 1,
            message: format!("expected a header line n=<rate>, got {header:?}"),
        })?
        .parse()
        .map_err(|_| lmm_core::Error::Parse {
            line: 1,
            message: format!("rate in {header:?} is not a number"),
        })?;

    let mut counts = Vec::new();
    for (idx, line) in lines {
        let count: u64 = line.trim().parse().map_err(|_| lmm_core::Error::Parse {
            line: idx + 1,
            message: format!("expected a nonnegative integer count, got {line:?}"),
        })?;
        counts.push(count);
    }
    if counts.is_empty() {
        return Err(lmm_core::Error::Parse {
            line: 2,
            message: "expected at least one count line".into(),
        }
        .into());
    }
    CountVector::new(counts, rate).map_err(|err| {
        lmm_core::Error::Parse {
            line: 1,
            message: err.to_string(),
        }
        .into()
    })
}

#[derive(Serialize)]
struct EstimateOutput {
    seed: u64,
    rate: f64,
    config: LmmConfig,
    estimate: Vec<f64>,
    diagnostics: LmmDiagnostics,
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let counts = read_counts(&args.input)?;
    let config = args.config.build(args.seed);
    config.validate()?;
    let mut rng = derive_rng(args.seed, 0, STREAM_ESTIMATOR);
    let (estimate, diagnostics) = lmm_estimate(&counts, &config, &mut rng)?;

    let output = EstimateOutput {
        seed: args.seed,
        rate: counts.rate(),
        config,
        estimate: estimate.values().to_vec(),
        diagnostics,
    };
    let json = serde_json::to_string_pretty(&output)?;
    write_file(&args.output, &(json + "\n"))?;
    println!(
        "wrote {}: {} probabilities, total mass {:.6}, fallback {}",
        args.output.display(),
        output.estimate.len(),
        output.diagnostics.total_mass,
        output.diagnostics.fallback
    );
    Ok(())
}

#[derive(Serialize)]
struct FunctionalOutput {
    seed: u64,
    rate: f64,
    config: LmmConfig,
    spec: FunctionalSpec,
    lmm_value: f64,
    baseline_value: f64,
    diagnostics: LmmDiagnostics,
}

fn build_functional(args: &FunctionalArgs) -> Result<FunctionalSpec, CliError> {
    let spec = match args.functional {
        FunctionalName::Entropy => FunctionalSpec::Entropy,
        FunctionalName::PowerSum => {
            let alpha = args
                .alpha
                .ok_or_else(|| CliError::Usage("--functional power-sum requires --alpha".into()))?;
            FunctionalSpec::PowerSum { alpha }
        }
        FunctionalName::SupportSize => {
            let k_bar = args.k_bar.ok_or_else(|| {
                CliError::Usage("--functional support-size requires --k-bar".into())
            })?;
            FunctionalSpec::SupportSize { k_bar }
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_functional(args: FunctionalArgs) -> Result<(), CliError> {
    let spec = build_functional(&args)?;
    let counts = read_counts(&args.input)?;
    let config = args.config.build(args.seed);
    config.validate()?;
    let mut rng = derive_rng(args.seed, 0, STREAM_ESTIMATOR);
    let (lmm_value, diagnostics) = estimate_functional(&counts, &config, &spec, &mut rng)?;
    let baseline_value = baseline_functional(&counts, &spec);

    let output = FunctionalOutput {
        seed: args.seed,
        rate: counts.rate(),
        config,
        spec,
        lmm_value,
        baseline_value,
        diagnostics,
    };
    let json = serde_json::to_string_pretty(&output)?;
    write_file(&args.output, &(json + "\n"))?;
    println!(
        "wrote {}: lmm {lmm_value:.6}, baseline {baseline_value:.6}",
        args.output.display()
    );
    Ok(())
}
