mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::Parser;
use smoothck::experiment::{
    regular_grid, run_smoothed_mc, smc_baseline, write_baseline_csv, write_csv, Design, ExperimentConfig,
    ExperimentError, InputScaling, KernelMode, ParameterDomain,
};
use smoothck::mitl::{parse_formula, Formula};
use smoothck::model::{parse_model, Model};
use smoothck::smc::{Checker, SmcError, SmcOptions};
use smoothck::ssa::SimOptions;

use args::{Cli, Command, Common, EstimateArgs, KernelSpec, SmcArgs};

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Failure {
    Parse = 2,
    Simulation = 3,
    Inference = 4,
    Io = 5,
}

struct Error {
    kind: Failure,
    message: String,
}

fn fail(kind: Failure, message: impl std::fmt::Display) -> Error {
    Error {
        kind,
        message: message.to_string(),
    }
}

impl From<ExperimentError> for Error {
    fn from(e: ExperimentError) -> Self {
        let kind = match &e {
            ExperimentError::Domain(_) | ExperimentError::Config(_) | ExperimentError::Formula(_) => Failure::Parse,
            ExperimentError::Smc(SmcError::Formula(_)) => Failure::Parse,
            ExperimentError::Smc(_) => Failure::Simulation,
            ExperimentError::Gp(_) | ExperimentError::HorizonBudget { .. } => Failure::Inference,
            ExperimentError::Io(_) => Failure::Io,
        };
        fail(kind, e)
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| fail(Failure::Io, format!("cannot read {}: {e}", path.display())))
}

fn load(common: &Common) -> Result<(Model, Formula), Error> {
    let model = parse_model(&read(&common.model)?)
        .map_err(|e| fail(Failure::Parse, format!("{}: {e}", common.model.display())))?;
    let formula = parse_formula(&read(&common.property)?)
        .map_err(|e| fail(Failure::Parse, format!("{}: {e}", common.property.display())))?;
    Ok((model, formula))
}

fn smc_options(common: &Common) -> SmcOptions {
    let mut opts = SmcOptions {
        pilot_runs: common.pilot_runs,
        ..SmcOptions::default()
    };
    if let Some(n) = common.max_jumps {
        opts.sim = SimOptions { max_jumps: n };
    }
    opts
}

fn per_dimension(counts: &[usize], dim: usize) -> Vec<usize> {
    if counts.len() == 1 {
        vec![counts[0]; dim]
    } else {
        counts.to_vec()
    }
}

fn output_path(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

fn check_writable_dir(path: &Path) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(fail(
            Failure::Io,
            format!("output directory {} does not exist", dir.display()),
        ));
    }
    Ok(())
}

/// Progress line on stderr at most twice a second, plus the final count.
struct Reporter {
    last: Mutex<Option<Instant>>,
}

impl Reporter {
    fn report(&self, done: usize, total: usize) {
        let mut last = self.last.lock().unwrap_or_else(|p| p.into_inner());
        let due = last.is_none_or(|t| t.elapsed() >= Duration::from_millis(500));
        if due || done == total {
            eprintln!("simulated {done}/{total} training points");
            *last = Some(Instant::now());
        }
    }
}

fn estimate(a: EstimateArgs) -> Result<(), Error> {
    let (model, formula) = load(&a.common)?;
    let domain = ParameterDomain::new(a.params, a.fixed)?;
    let dim = domain.dim();
    let kernel = match &a.kernel {
        KernelSpec::Optimize => KernelMode::optimize(dim),
        KernelSpec::Fixed(amp, ls) => {
            KernelMode::Fixed(KernelSpec::fixed_config(*amp, ls, dim).map_err(|e| fail(Failure::Parse, e))?)
        }
    };
    let design = match a.train {
        Design::Grid(c) => Design::Grid(per_dimension(&c, dim)),
        lhs => lhs,
    };
    let mut config = ExperimentConfig::new(design, a.runs, per_dimension(&a.predict.0, dim), kernel, a.common.seed);
    config.scaling = if a.scaling == "raw" {
        InputScaling::Raw
    } else {
        InputScaling::UnitBox
    };
    config.smc = smc_options(&a.common);
    config.max_horizon = a.common.max_horizon;

    let predictions = output_path(&a.out_prefix, "predictions.csv");
    let training = output_path(&a.out_prefix, "training.csv");
    check_writable_dir(&predictions)?;

    let reporter = Reporter { last: Mutex::new(None) };
    let report = |done: usize, total: usize| reporter.report(done, total);
    let progress: Option<&(dyn Fn(usize, usize) + Sync)> = if a.quiet { None } else { Some(&report) };
    let result = run_smoothed_mc(&model, &formula, &domain, &config, progress)?;
    write_csv(&result, &predictions, &training).map_err(|e| fail(Failure::Io, format!("writing results: {e}")))?;

    let k = result.kernel();
    if !result.state.converged() {
        eprintln!(
            "warning: EP stopped after {} sweeps without converging",
            result.state.sweeps()
        );
    }
    println!("training points   {}", result.training_points.len());
    println!(
        "kernel            amplitude {:.6} lengthscales {:?}",
        k.amplitude, k.lengthscales
    );
    println!("SMC               {:.3} s", result.timings.simulation.as_secs_f64());
    println!("hyperparameters   {:.3} s", result.timings.hyperopt.as_secs_f64());
    println!("GP prediction     {:.3} s", result.timings.prediction.as_secs_f64());
    println!("wrote {} and {}", predictions.display(), training.display());

    if let Some((runs, probes)) = a.baseline {
        let start = Instant::now();
        let grid = regular_grid(&domain, &vec![probes; dim])?;
        let est = smc_baseline(
            &model,
            &formula,
            &domain,
            &grid,
            runs,
            a.common.seed ^ BASELINE_SALT,
            config.smc,
        )?;
        let path = output_path(&a.out_prefix, "baseline.csv");
        write_baseline_csv(&path, &domain.names(), &grid, &est)
            .map_err(|e| fail(Failure::Io, format!("writing baseline: {e}")))?;
        println!(
            "baseline SMC      {:.3} s, wrote {}",
            start.elapsed().as_secs_f64(),
            path.display()
        );
    }
    Ok(())
}

/// Keeps baseline runs apart from the training runs of the same seed.
const BASELINE_SALT: u64 = 0xba5e_11ae_0000_0001;

fn smc(a: SmcArgs) -> Result<(), Error> {
    let (model, formula) = load(&a.common)?;
    let mut params = model.default_params();
    for (name, v) in &a.set {
        let i = model
            .param_index(name)
            .ok_or_else(|| fail(Failure::Parse, format!("model declares no parameter `{name}`")))?;
        params[i] = *v;
    }
    let checker = Checker::new(&model, &formula, smc_options(&a.common)).map_err(|e| fail(Failure::Parse, e))?;
    if let Some(limit) = a.common.max_horizon {
        if checker.horizon() > limit {
            return Err(ExperimentError::HorizonBudget {
                needed: checker.horizon(),
                limit,
            }
            .into());
        }
    }
    let est = checker.estimate(&params, a.runs, a.common.seed).map_err(|e| match e {
        SmcError::NoRuns => fail(Failure::Parse, e),
        e => fail(Failure::Simulation, e),
    })?;
    println!("p_hat,ci_low,ci_high,successes,trials");
    println!(
        "{:.16e},{:.16e},{:.16e},{},{}",
        est.p_hat, est.ci_low, est.ci_high, est.successes, est.trials
    );
    Ok(())
}

fn main() -> ExitCode {
    let argv = args::with_default_subcommand(std::env::args().collect());
    let cli = Cli::parse_from(argv);
    let threads = match &cli.command {
        Command::Estimate(a) => a.common.threads,
        Command::Smc(a) => a.common.threads,
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(Failure::Parse as u8);
        }
    }
    let outcome = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Smc(a) => smc(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.kind as u8)
        }
    }
}
