//! `nilmobius`: command-line front end for the experiments.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nilmobius::fourier::FunctionSpec;
use nilmobius::observables::ObservableSpec;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use config::{CliError, CliResult};

/// Environment variable holding the worker thread count.
pub const THREADS_VAR: &str = "NILMOBIUS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "nilmobius", version, about = "Heisenberg skew products and Möbius correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate μ(n) and write the binary table.
    Sieve(SieveArgs),
    /// Partial quotients and convergents of α.
    Convergents(ConvergentsArgs),
    /// Resonant/non-resonant split of φ and its cobounding series.
    Decompose(DecomposeArgs),
    /// Running Möbius-weighted averages along an orbit.
    Correlate(CorrelateArgs),
    /// Möbius-weighted polynomial exponential sums in a residue class.
    Expsum(ExpsumArgs),
    /// Covering estimate for the resonant form, as JSON.
    Complexity(ComplexityArgs),
    /// Per-trial shadowing distances against the F(k) grid.
    Shadow(ShadowArgs),
    /// Distance between two orbits.
    Distality(DistalityArgs),
    /// Points of one orbit.
    Orbit(OrbitArgs),
}

fn parse_count(s: &str) -> Result<u64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("not a non-negative integer: {s:?}"));
    }
    Ok(v as u64)
}

fn parse_spec<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    let t = s.trim();
    let value = if t.starts_with('{') || t.starts_with('[') || t.starts_with('"') {
        serde_json::from_str(t).map_err(|e| e.to_string())?
    } else {
        serde_json::Value::String(t.to_string())
    };
    serde_json::from_value(value).map_err(|e| e.to_string())
}

fn parse_function(s: &str) -> Result<FunctionSpec, String> {
    parse_spec(s)
}

fn parse_observable(s: &str) -> Result<ObservableSpec, String> {
    parse_spec(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Kind {
    /// Skew product with fiber increment (φ, φ, ψ).
    #[value(name = "T")]
    #[serde(rename = "T")]
    T,
    /// General skew product with fiber increment (φ₁, φ₂, ψ).
    #[value(name = "S")]
    #[serde(rename = "S")]
    S,
    /// Resonant form of T.
    #[value(name = "T1")]
    #[serde(rename = "T1")]
    T1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsArg {
    Mobius,
    Ones,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iterate,
    Closed,
    Geometric,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct Common {
    /// JSON file of parameters; flags override it.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// α, the cocycle, and how the expansion and resonance split are computed.
#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct FlowArgs {
    /// `dec:<digits>`, `rat:<p>/<q>` or `cf:<a1>,<a2>,...`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    /// φ (or φ₁): a preset name or `{"real": true, "coeffs": [[m, re, im], ...]}`.
    #[arg(long, value_parser = parse_function)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<FunctionSpec>,
    /// φ₂ for kind S.
    #[arg(long, value_parser = parse_function)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi2: Option<FunctionSpec>,
    #[arg(long, value_parser = parse_function)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<FunctionSpec>,
    /// Growth exponent B of the resonance split.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_cap: Option<u64>,
    /// Frequency cutoff the series are modelled at.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct SieveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmented: Option<bool>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct ConvergentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    /// Number of partial quotients.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_cap: Option<u64>,
    /// Adds a column with the class of each denominator.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct CorrelateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    /// `fA`, `one`, or a JSON observable.
    #[arg(long, value_parser = parse_observable)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<ObservableSpec>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[arg(long, value_parser = parse_count, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    /// Start point `t,x,y,z`; drawn from the seed when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsArg>,
    /// Binary μ table written by `sieve`; computed when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sieve_cache: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct ExpsumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Coefficients `c0,c1,c2,...` of the phase polynomial.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[arg(long, value_parser = parse_count, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sieve_cache: Option<PathBuf>,
}

/// Parameters shared by the covering and shadowing runs.
#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct GridArgs {
    /// ε⁻¹.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_inv: Option<u64>,
    /// Index k of the sharp denominator; the first sharp one when absent.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    /// Lipschitz constant L; computed from the flow when absent.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Cap on group steps.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct ComplexityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Empirical sample size.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    /// Bowen horizon n; `n_k` when absent.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Ball radius; `20ε` when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Shadowing trials written to `trials_csv`.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials_csv: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct ShadowArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// JSON summary file.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct DistalityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    /// First point `t,x,y,z`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    /// Second point `t,x,y,z`.
    #[arg(long = "q", value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Emit every `stride`-th distance.
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct OrbitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Resource(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Sieve(a) => commands::sieve(a),
        Command::Convergents(a) => commands::convergents(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Expsum(a) => commands::expsum(a),
        Command::Complexity(a) => commands::complexity(a),
        Command::Shadow(a) => commands::shadow(a),
        Command::Distality(a) => commands::distality(a),
        Command::Orbit(a) => commands::orbit(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nilmobius: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
