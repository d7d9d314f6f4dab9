//! Command-line flags and their parsing into experiment settings.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use smoothck::experiment::{Design, ParamRange};
use smoothck::gp::KernelConfig;

#[derive(Debug, Parser)]
#[command(
    name = "smoothck",
    version,
    about = "Smoothed statistical model checking for parametric CTMCs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the satisfaction probability over a parameter box (default).
    Estimate(EstimateArgs),
    /// Plain statistical model checking at one parameter point.
    Smc(SmcArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Reaction network model file.
    #[arg(long)]
    pub model: PathBuf,
    /// File holding one MiTL formula.
    #[arg(long)]
    pub property: PathBuf,
    /// Root seed; fixes every output.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, env = "SMOOTHCK_THREADS")]
    pub threads: Option<usize>,
    /// Abort a trajectory after this many reactions.
    #[arg(long)]
    pub max_jumps: Option<u64>,
    /// Ensemble size for `mean(X)` signals.
    #[arg(long, default_value_t = 100)]
    pub pilot_runs: usize,
    /// Refuse properties whose horizon exceeds this time.
    #[arg(long)]
    pub max_horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Varied parameter as `name:low:high`; repeat for more dimensions.
    #[arg(long = "param", required = true, value_parser = parse_range)]
    pub params: Vec<ParamRange>,
    /// Parameter held at a value other than its default, as `name=value`.
    #[arg(long = "fix", value_parser = parse_assignment)]
    pub fixed: Vec<(String, f64)>,
    /// Training design: `grid:N`, `grid:NxM...` or `lhs:N`.
    #[arg(long, value_parser = parse_design)]
    pub train: Design,
    /// Simulations per training point.
    #[arg(long)]
    pub runs: u64,
    /// Prediction grid: `N` per dimension or `NxM...`.
    #[arg(long, value_parser = parse_counts)]
    pub predict: Counts,
    /// `optimize` or `fixed:amplitude:lengthscale[:lengthscale...]`.
    #[arg(long, default_value = "optimize", value_parser = parse_kernel)]
    pub kernel: KernelSpec,
    /// Classifier inputs: `unit` (rescaled box) or `raw`.
    #[arg(long, default_value = "unit", value_parser = ["unit", "raw"])]
    pub scaling: String,
    /// Output files are `<prefix>_predictions.csv`, `<prefix>_training.csv`
    /// and `<prefix>_predictions.csv.meta`.
    #[arg(long)]
    pub out_prefix: String,
    /// Also run plain SMC as `runs:probes` at a regular grid of probes per
    /// dimension, written to `<prefix>_baseline.csv`.
    #[arg(long, value_parser = parse_baseline)]
    pub baseline: Option<(u64, usize)>,
    /// No progress on standard error.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SmcArgs {
    #[command(flatten)]
    pub common: Common,
    /// Parameter value other than its default, as `name=value`.
    #[arg(long = "set", value_parser = parse_assignment)]
    pub set: Vec<(String, f64)>,
    /// Number of simulations.
    #[arg(long)]
    pub runs: u64,
}

/// Per-dimension point counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Optimize,
    /// Amplitude and one or more lengthscales.
    Fixed(f64, Vec<f64>),
}

impl KernelSpec {
    /// Kernel for `dim` inputs; a single lengthscale is shared by all of them.
    pub fn fixed_config(amplitude: f64, lengthscales: &[f64], dim: usize) -> Result<KernelConfig, String> {
        let ls = match lengthscales.len() {
            1 => vec![lengthscales[0]; dim],
            n if n == dim => lengthscales.to_vec(),
            n => return Err(format!("{n} lengthscales for {dim} varied parameters")),
        };
        KernelConfig::new(amplitude, ls).map_err(|e| e.to_string())
    }
}

fn number(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(x)
}

fn count(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("`{s}` is not a count"))
}

pub fn parse_range(s: &str) -> Result<ParamRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [name, low, high] = parts[..] else {
        return Err(format!("expected name:low:high, got `{s}`"));
    };
    let (low, high) = (number(low)?, number(high)?);
    if low >= high {
        return Err(format!(
            "malformed range for `{name}`: low {low} must be below high {high}"
        ));
    }
    Ok(ParamRange {
        name: name.to_string(),
        low,
        high,
    })
}

pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    Ok((name.trim().to_string(), number(value)?))
}

pub fn parse_counts(s: &str) -> Result<Counts, String> {
    s.split('x').map(count).collect::<Result<_, _>>().map(Counts)
}

pub fn parse_design(s: &str) -> Result<Design, String> {
    match s.split_once(':') {
        Some(("grid", c)) => Ok(Design::Grid(parse_counts(c)?.0)),
        Some(("lhs", n)) => Ok(Design::Lhs(count(n)?)),
        _ => Err(format!("expected grid:N[xM...] or lhs:N, got `{s}`")),
    }
}

pub fn parse_kernel(s: &str) -> Result<KernelSpec, String> {
    if s == "optimize" {
        return Ok(KernelSpec::Optimize);
    }
    let mut parts = s.split(':');
    if parts.next() != Some("fixed") {
        return Err(format!(
            "expected optimize or fixed:amplitude:lengthscale..., got `{s}`"
        ));
    }
    let values = parts.map(number).collect::<Result<Vec<_>, _>>()?;
    if values.len() < 2 {
        return Err("fixed kernel needs an amplitude and at least one lengthscale".into());
    }
    Ok(KernelSpec::Fixed(values[0], values[1..].to_vec()))
}

pub fn parse_baseline(s: &str) -> Result<(u64, usize), String> {
    let (runs, probes) = s
        .split_once(':')
        .ok_or_else(|| format!("expected runs:probes, got `{s}`"))?;
    let runs = runs
        .trim()
        .parse()
        .map_err(|_| format!("`{runs}` is not a run count"))?;
    Ok((runs, count(probes)?))
}

/// Inserts the default `estimate` subcommand when the first argument is a flag.
pub fn with_default_subcommand(mut argv: Vec<String>) -> Vec<String> {
    let needs = argv
        .get(1)
        .is_some_and(|a| a.starts_with("--") && !matches!(a.as_str(), "--help" | "--version"));
    if needs {
        argv.insert(1, "estimate".into());
    }
    argv
}
