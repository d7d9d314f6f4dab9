//! Statistical model checking at a fixed parameter point.
//!
//! Each run simulates one trajectory on its own random stream and monitors the
//! formula at time 0, so a batch of runs is a Binomial sample of the
//! satisfaction probability.

use rayon::prelude::*;
use statrs::function::beta::inv_beta_reg;
use thiserror::Error;

use crate::mitl::{monitor, BoundFormula, Formula, FormulaError, MonitorError, SignalContext};
use crate::model::Model;
use crate::rng::derive_seed;
use crate::ssa::{uniform_grid, MeanSignal, SimError, SimOptions, Simulator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmcError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("at least one run is required")]
    NoRuns,
}

/// `successes` satisfying runs out of `trials`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub successes: u64,
    pub trials: u64,
}

impl Observation {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials, "{successes} successes out of {trials} trials");
        Observation { successes, trials }
    }

    pub fn failures(&self) -> u64 {
        self.trials - self.successes
    }

    pub fn fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

/// Frequentist estimate with a 95% Clopper–Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BernoulliEstimate {
    pub fn from_observation(obs: Observation) -> Self {
        let (ci_low, ci_high) = clopper_pearson(obs.successes, obs.trials, 0.05);
        BernoulliEstimate {
            successes: obs.successes,
            trials: obs.trials,
            p_hat: obs.fraction(),
            ci_low,
            ci_high,
        }
    }
}

/// Exact binomial interval at confidence `1 - alpha`.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let (s, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        inv_beta_reg(s, n - s + 1.0, alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else if successes == 0 {
        // closed form, also the most common case near extinction boundaries
        1.0 - (alpha / 2.0).powf(1.0 / n)
    } else {
        inv_beta_reg(s + 1.0, n - s, 1.0 - alpha / 2.0)
    };
    let p = s / n;
    (lo.clamp(0.0, p), hi.clamp(p, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcOptions {
    pub sim: SimOptions,
    /// Ensemble size for the mean signal of formulas that read `mean(X)`.
    pub pilot_runs: usize,
    /// Number of grid points of that mean signal.
    pub pilot_grid_points: usize,
}

impl Default for SmcOptions {
    fn default() -> Self {
        SmcOptions {
            sim: SimOptions::default(),
            pilot_runs: 100,
            pilot_grid_points: 1001,
        }
    }
}

/// Stream index reserved for pilot ensembles, far from run indices.
const PILOT_TAG: u64 = 0x5049_4c4f_545f_5345;

/// A formula bound to a model, ready to be checked at any parameter point.
#[derive(Debug, Clone)]
pub struct Checker<'m> {
    model: &'m Model,
    formula: BoundFormula,
    options: SmcOptions,
}

impl<'m> Checker<'m> {
    pub fn new(model: &'m Model, formula: &Formula, options: SmcOptions) -> Result<Self, SmcError> {
        Ok(Checker {
            model,
            formula: formula.bind(model)?,
            options,
        })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn formula(&self) -> &BoundFormula {
        &self.formula
    }

    /// Simulation horizon needed to decide the formula.
    pub fn horizon(&self) -> f64 {
        self.formula.horizon()
    }

    fn simulator(&self) -> Simulator<'m> {
        Simulator::new(self.model, self.options.sim)
    }

    /// Ensemble-mean signal for every species the formula reads through
    /// `mean(X)`, or `None` if it reads none.
    pub fn mean_signal(&self, params: &[f64], seed: u64) -> Result<Option<MeanSignal>, SmcError> {
        let species = self.formula.mean_species();
        if species.is_empty() {
            return Ok(None);
        }
        let n = self.options.pilot_runs.max(1);
        let horizon = self.horizon();
        let grid = uniform_grid(horizon, self.options.pilot_grid_points.max(2));
        let idx: Vec<usize> = species
            .iter()
            .map(|s| self.model.species_index(s).expect("bound formula names model species"))
            .collect();
        let sim = self.simulator();
        let pilot_seed = derive_seed(seed, PILOT_TAG);
        // Integer sums keep the reduction exact, hence independent of scheduling.
        let sums = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let tr = sim.run_stream(params, horizon, pilot_seed, i)?;
                let mut acc = vec![0i64; grid.len() * idx.len()];
                for (g, &t) in grid.iter().enumerate() {
                    let state = tr.state_at(t);
                    for (k, &s) in idx.iter().enumerate() {
                        acc[k * grid.len() + g] = state[s];
                    }
                }
                Ok(acc)
            })
            .try_reduce(
                || vec![0i64; grid.len() * idx.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    Ok::<_, SimError>(a)
                },
            )?;
        let mut signal: Option<MeanSignal> = None;
        for (k, name) in species.iter().enumerate() {
            let means = sums[k * grid.len()..(k + 1) * grid.len()]
                .iter()
                .map(|&s| s as f64 / n as f64)
                .collect();
            let track = MeanSignal::new(grid.clone(), name.clone(), means).map_err(SimError::InvalidGrid)?;
            signal = Some(match signal {
                None => track,
                Some(prev) => prev.merge(track).map_err(SimError::InvalidGrid)?,
            });
        }
        Ok(signal)
    }

    /// Outcome of run `index` on stream `(seed, index)`.
    pub fn check_run(
        &self,
        params: &[f64],
        seed: u64,
        index: u64,
        mean: Option<&MeanSignal>,
    ) -> Result<bool, SmcError> {
        let tr = self.simulator().run_stream(params, self.horizon(), seed, index)?;
        let mut ctx = SignalContext::new(&tr, params);
        if let Some(m) = mean {
            ctx = ctx.with_mean(m);
        }
        Ok(monitor(&self.formula, &ctx)?)
    }

    /// Runs `m` independent simulations and counts the satisfying ones.
    pub fn sample(&self, params: &[f64], m: u64, seed: u64) -> Result<Observation, SmcError> {
        if m == 0 {
            return Err(SmcError::NoRuns);
        }
        let mean = self.mean_signal(params, seed)?;
        let successes = (0..m)
            .into_par_iter()
            .map(|i| self.check_run(params, seed, i, mean.as_ref()).map(u64::from))
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        Ok(Observation::new(successes, m))
    }

    pub fn estimate(&self, params: &[f64], n: u64, seed: u64) -> Result<BernoulliEstimate, SmcError> {
        Ok(BernoulliEstimate::from_observation(self.sample(params, n, seed)?))
    }
}

/// Counts how many of `m` simulated runs satisfy `f` at time 0.
pub fn sample_observations(
    model: &Model,
    params: &[f64],
    f: &Formula,
    m: u64,
    seed: u64,
) -> Result<Observation, SmcError> {
    Checker::new(model, f, SmcOptions::default())?.sample(params, m, seed)
}

/// Point estimate and 95% interval of the satisfaction probability from `n` runs.
pub fn estimate_at(
    model: &Model,
    params: &[f64],
    f: &Formula,
    n: u64,
    seed: u64,
) -> Result<BernoulliEstimate, SmcError> {
    Checker::new(model, f, SmcOptions::default())?.estimate(params, n, seed)
}
