//! End-to-end smoothed model checking over a parameter box.
//!
//! Training points are checked by simulation, the Binomial counts are
//! smoothed with a GP classifier fitted by EP, and the classifier is queried
//! on a prediction grid.

mod csv;
mod design;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::gp::{ep_fit, optimize_hyperparams, EpState, GpError, HyperBounds, KernelConfig, Prediction, TrainingSet};
use crate::mitl::{Formula, FormulaError};
use crate::model::Model;
use crate::rng::derive_seed;
use crate::smc::{BernoulliEstimate, Checker, Observation, SmcError, SmcOptions};

pub use csv::{read_predictions_csv, write_baseline_csv, write_csv, write_csv_to, CsvRow};
pub use design::{latin_hypercube, regular_grid, ParamRange, ParameterDomain};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid parameter domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Smc(#[from] SmcError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("property needs a simulation horizon of {needed}, above the allowed {limit}")]
    HorizonBudget { needed: f64, limit: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// How training points are laid out.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    /// Regular grid with the given count per dimension.
    Grid(Vec<usize>),
    /// Latin hypercube with this many points.
    Lhs(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelMode {
    Fixed(KernelConfig),
    Optimize { init: KernelConfig, bounds: HyperBounds },
}

impl KernelMode {
    /// Marginal-likelihood search from unit amplitude and lengthscale.
    pub fn optimize(dim: usize) -> Self {
        KernelMode::Optimize {
            init: KernelConfig::isotropic(1.0, 1.0, dim).expect("unit kernel is valid"),
            bounds: HyperBounds::default(),
        }
    }
}

/// Coordinates the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputScaling {
    /// Each varied parameter mapped affinely onto `[0, 1]`.
    #[default]
    UnitBox,
    /// Parameter values as given.
    Raw,
}

impl InputScaling {
    pub fn name(self) -> &'static str {
        match self {
            InputScaling::UnitBox => "unit",
            InputScaling::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub design: Design,
    pub runs_per_point: u64,
    /// Prediction grid counts per dimension.
    pub predict_counts: Vec<usize>,
    pub kernel: KernelMode,
    pub scaling: InputScaling,
    pub seed: u64,
    pub smc: SmcOptions,
    /// Refuse formulas whose horizon exceeds this.
    pub max_horizon: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(design: Design, runs_per_point: u64, predict_counts: Vec<usize>, kernel: KernelMode, seed: u64) -> Self {
        ExperimentConfig {
            design,
            runs_per_point,
            predict_counts,
            kernel,
            scaling: InputScaling::default(),
            seed,
            smc: SmcOptions::default(),
            max_horizon: None,
        }
    }
}

/// Wall-clock time spent in each phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub simulation: Duration,
    pub hyperopt: Duration,
    pub prediction: Duration,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub domain: ParameterDomain,
    pub scaling: InputScaling,
    pub seed: u64,
    pub runs_per_point: u64,
    /// Training points in parameter units, in design order.
    pub training_points: Vec<Vec<f64>>,
    pub observations: Vec<Observation>,
    /// Fitted classifier, in the scaled coordinates.
    pub state: EpState,
    /// Prediction grid in parameter units, row-major.
    pub grid: Vec<Vec<f64>>,
    /// One per grid point; `point` holds the parameter-unit coordinates.
    pub predictions: Vec<Prediction>,
    pub timings: Timings,
}

impl ExperimentResult {
    pub fn kernel(&self) -> &KernelConfig {
        self.state.kernel()
    }
}

/// Progress callback: `(completed, total)` training points.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

fn scale(domain: &ParameterDomain, scaling: InputScaling, point: &[f64]) -> Vec<f64> {
    match scaling {
        InputScaling::UnitBox => domain.to_unit(point),
        InputScaling::Raw => point.to_vec(),
    }
}

/// Stream tag for the Latin hypercube layout.
const LHS_TAG: u64 = 0x4c48_535f_4445_5349;

pub fn training_design(domain: &ParameterDomain, design: &Design, seed: u64) -> Result<Vec<Vec<f64>>, ExperimentError> {
    match design {
        Design::Grid(counts) => regular_grid(domain, counts),
        Design::Lhs(0) => Err(ExperimentError::Config(
            "latin hypercube needs at least one point".into(),
        )),
        Design::Lhs(n) => Ok(latin_hypercube(domain, *n, derive_seed(seed, LHS_TAG))),
    }
}

fn check_horizon(checker: &Checker, max_horizon: Option<f64>) -> Result<(), ExperimentError> {
    if let Some(limit) = max_horizon {
        let needed = checker.horizon();
        if needed > limit {
            return Err(ExperimentError::HorizonBudget { needed, limit });
        }
    }
    Ok(())
}

/// Simulates the training design, fits the classifier and predicts on the
/// prediction grid. Training point `j` draws its runs from seed
/// `derive_seed(seed, j)`, so results do not depend on the thread count.
pub fn run_smoothed_mc(
    model: &Model,
    formula: &Formula,
    domain: &ParameterDomain,
    config: &ExperimentConfig,
    progress: Option<Progress>,
) -> Result<ExperimentResult, ExperimentError> {
    domain.check_against(model)?;
    if config.runs_per_point == 0 {
        return Err(ExperimentError::Config(
            "at least one run per training point is required".into(),
        ));
    }
    let kernel_dim = match &config.kernel {
        KernelMode::Fixed(k) => k.dim(),
        KernelMode::Optimize { init, .. } => init.dim(),
    };
    if kernel_dim != domain.dim() {
        return Err(GpError::DimensionMismatch {
            expected: domain.dim(),
            actual: kernel_dim,
        }
        .into());
    }
    let checker = Checker::new(model, formula, config.smc)?;
    check_horizon(&checker, config.max_horizon)?;
    let training_points = training_design(domain, &config.design, config.seed)?;
    let grid = regular_grid(domain, &config.predict_counts)?;

    let start = Instant::now();
    let total = training_points.len();
    let done = AtomicUsize::new(0);
    let observations: Vec<Observation> = training_points
        .par_iter()
        .enumerate()
        .map(|(j, x)| {
            let params = domain.full_params(model, x);
            let obs = checker.sample(&params, config.runs_per_point, derive_seed(config.seed, j as u64));
            let completed = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(report) = progress {
                report(completed, total);
            }
            obs
        })
        .collect::<Result<_, _>>()?;
    let simulation = start.elapsed();

    let start = Instant::now();
    let scaled: Vec<Vec<f64>> = training_points
        .iter()
        .map(|x| scale(domain, config.scaling, x))
        .collect();
    let data = TrainingSet::new(scaled, observations.clone())?;
    let state = match &config.kernel {
        KernelMode::Fixed(k) => ep_fit(&data, k)?,
        KernelMode::Optimize { init, bounds } => optimize_hyperparams(&data, init, bounds)?.1,
    };
    let hyperopt = start.elapsed();

    let start = Instant::now();
    let predictions = predict_grid(&state, domain, config.scaling, &grid)?;
    let prediction = start.elapsed();

    Ok(ExperimentResult {
        domain: domain.clone(),
        scaling: config.scaling,
        seed: config.seed,
        runs_per_point: config.runs_per_point,
        training_points,
        observations,
        state,
        grid,
        predictions,
        timings: Timings {
            simulation,
            hyperopt,
            prediction,
        },
    })
}

const PREDICT_CHUNK: usize = 256;

fn predict_grid(
    state: &EpState,
    domain: &ParameterDomain,
    scaling: InputScaling,
    grid: &[Vec<f64>],
) -> Result<Vec<Prediction>, GpError> {
    let chunks: Vec<Vec<Prediction>> = grid
        .par_chunks(PREDICT_CHUNK)
        .map(|chunk| {
            let scaled: Vec<Vec<f64>> = chunk.iter().map(|x| scale(domain, scaling, x)).collect();
            let mut preds = state.predict_probability(&scaled)?;
            for (p, x) in preds.iter_mut().zip(chunk) {
                p.point.clone_from(x);
            }
            Ok(preds)
        })
        .collect::<Result<_, GpError>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Plain statistical model checking at each probe point with `runs` runs,
/// probe `j` seeded by `derive_seed(seed, j)`.
pub fn smc_baseline(
    model: &Model,
    formula: &Formula,
    domain: &ParameterDomain,
    probes: &[Vec<f64>],
    runs: u64,
    seed: u64,
    options: SmcOptions,
) -> Result<Vec<BernoulliEstimate>, ExperimentError> {
    domain.check_against(model)?;
    let checker = Checker::new(model, formula, options)?;
    let estimates = probes
        .par_iter()
        .enumerate()
        .map(|(j, x)| checker.estimate(&domain.full_params(model, x), runs, derive_seed(seed, j as u64)))
        .collect::<Result<_, _>>()?;
    Ok(estimates)
}

/// `P(N <= 3)` for a Poisson count `N` with mean `rate`.
pub fn poisson_sat_exact(rate: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=3 {
        term *= rate / k as f64;
        sum += term;
    }
    (-rate).exp() * sum
}
