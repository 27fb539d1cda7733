//! `forge`: analyze scenarios, solve single jump sites, run the self-test.
//!
//! Exit status: 0 viable (or success), 1 internal failure or failed
//! self-test, 2 usage error, 3 parse error, 4 validation error,
//! 5 non-viable, 6 assumption violated.

use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use forge_core::report::{analyze, AnalyzeOptions, KernelAnalysis};
use forge_core::scalar::set_float_tolerance;
use forge_core::scenario::{parse_site, peek_settings, Scenario, ScenarioError};
use forge_core::selftest::{self, SelftestOptions};
use forge_core::viability::Status;
use forge_core::{Error, Rational, Scalar};

const EXIT_INTERNAL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_INVALID: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Viability analysis for finite markets under enlarged filtrations")]
struct Cli {
    /// Arithmetic backend; the FORGE_MODE environment variable takes precedence.
    #[arg(long, value_enum, global = true)]
    mode: Option<Mode>,
    /// Comparison tolerance in float mode.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Also write the JSON report to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Worker threads for independent site solves (1 = sequential).
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze a scenario file ("-" reads standard input).
    Analyze {
        file: String,
        /// Solve the sites even when the support or positivity assumption fails.
        #[arg(long)]
        no_gate: bool,
    },
    /// Solve one jump site file ("-" reads standard input).
    Kernel { file: String },
    /// Run the built-in fixture and randomized battery.
    Selftest {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Random cases per property.
        #[arg(long, default_value_t = 40)]
        cases: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

enum Failure {
    Usage(String),
    Parse(String),
    Invalid(String),
    Internal(anyhow::Error),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Parse(_) => Failure::Parse(e.to_string()),
            ScenarioError::Invalid { .. } => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Internal(_) => Failure::Internal(e.into()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

fn read_input(file: &str) -> anyhow::Result<String> {
    let mut text = String::new();
    if file == "-" {
        std::io::stdin().read_to_string(&mut text).context("reading standard input")?;
    } else {
        text = std::fs::read_to_string(file).with_context(|| format!("reading {file}"))?;
    }
    Ok(text)
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Viable => 0,
        Status::NonViable => 5,
        Status::AssumptionViolated => 6,
    }
}

/// Precedence: FORGE_MODE, then `--mode`, then the file, then exact.
fn resolve_mode(cli: &Cli, file_mode: Option<&str>) -> Result<Mode, Failure> {
    if let Ok(env) = std::env::var("FORGE_MODE") {
        return Mode::from_str(&env, true).map_err(|_| Failure::Usage(format!("FORGE_MODE must be exact or float, got '{env}'")));
    }
    if let Some(m) = cli.mode {
        return Ok(m);
    }
    Ok(if file_mode == Some("float") { Mode::Float } else { Mode::Exact })
}

fn apply_tolerance(cli: &Cli, file_tol: Option<f64>) -> Result<(), Failure> {
    match cli.tolerance.or(file_tol) {
        Some(t) if t.is_finite() && t >= 0.0 => {
            set_float_tolerance(t);
            Ok(())
        }
        Some(t) => Err(Failure::Usage(format!("tolerance must be finite and non-negative, got {t}"))),
        None => Ok(()),
    }
}

fn write_report(path: Option<&Path>, json: &serde_json::Value) -> anyhow::Result<()> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(json)?;
        std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn emit(cli: &Cli, json: &serde_json::Value, text: String) -> anyhow::Result<()> {
    let out = if cli.json { serde_json::to_string_pretty(json)? + "\n" } else { text };
    match std::io::stdout().lock().write_all(out.as_bytes()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => return Err(e).context("writing standard output"),
        _ => {}
    }
    write_report(cli.report.as_deref(), json)
}

fn analyze_as<S: Scalar>(cli: &Cli, text: &str, no_gate: bool) -> Result<u8, Failure> {
    let scenario = Scenario::<S>::from_json(text)?;
    let opts = AnalyzeOptions { parallel: cli.parallel > 1, bypass_gate: no_gate };
    let analysis = if cli.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.parallel).build().context("building the worker pool")?;
        pool.install(|| analyze(&scenario, &opts))?
    } else {
        analyze(&scenario, &opts)?
    };
    emit(cli, &analysis.to_json(), analysis.to_text())?;
    Ok(status_code(analysis.status()))
}

fn kernel_as<S: Scalar>(cli: &Cli, text: &str) -> Result<u8, Failure> {
    let k = KernelAnalysis::new(parse_site::<S>(text)?);
    emit(cli, &k.to_json(), k.to_text())?;
    Ok(status_code(k.status()))
}

fn selftest_as<S: Scalar>(cli: &Cli, opts: &SelftestOptions) -> Result<u8, Failure> {
    let r = selftest::run::<S>(opts);
    emit(cli, &r.to_json(), r.to_text())?;
    Ok(if r.passed() { 0 } else { EXIT_INTERNAL })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    if cli.parallel == 0 {
        return Err(Failure::Usage("--parallel must be at least 1".into()));
    }
    match &cli.command {
        Command::Analyze { file, no_gate } => {
            let text = read_input(file)?;
            let settings = peek_settings(&text)?;
            let mode = resolve_mode(cli, settings.mode.as_deref())?;
            apply_tolerance(cli, settings.tolerance)?;
            match mode {
                Mode::Exact => analyze_as::<Rational>(cli, &text, *no_gate),
                Mode::Float => analyze_as::<f64>(cli, &text, *no_gate),
            }
        }
        Command::Kernel { file } => {
            let text = read_input(file)?;
            let settings = peek_settings(&text)?;
            let mode = resolve_mode(cli, settings.mode.as_deref())?;
            apply_tolerance(cli, settings.tolerance)?;
            match mode {
                Mode::Exact => kernel_as::<Rational>(cli, &text),
                Mode::Float => kernel_as::<f64>(cli, &text),
            }
        }
        Command::Selftest { seed, cases, inject_fault } => {
            let opts = SelftestOptions { seed: *seed, cases: *cases, inject_fault: *inject_fault };
            apply_tolerance(cli, None)?;
            match resolve_mode(cli, None)? {
                Mode::Exact => selftest_as::<Rational>(cli, &opts),
                Mode::Float => selftest_as::<f64>(cli, &opts),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("forge: {m}");
            EXIT_USAGE
        }
        Err(Failure::Parse(m)) => {
            eprintln!("forge: {m}");
            EXIT_PARSE
        }
        Err(Failure::Invalid(m)) => {
            eprintln!("forge: {m}");
            EXIT_INVALID
        }
        Err(Failure::Internal(e)) => {
            eprintln!("forge: {e:#}");
            EXIT_INTERNAL
        }
    };
    ExitCode::from(code)
}
