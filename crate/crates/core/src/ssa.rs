//! Exact trajectory sampling with Gillespie's direct method.

use std::io::{self, Write};

use rand::RngCore;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Model, RateError};
use crate::rng::{open_unit, stream_rng};

/// Default cap on the number of jumps in a single trajectory.
pub const DEFAULT_MAX_JUMPS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("reaction {reaction} at t={time}: {source}")]
    Rate {
        reaction: usize,
        time: f64,
        #[source]
        source: RateError,
    },
    #[error("reaction {reaction} fired at t={time} would make species `{species}` negative")]
    NegativeCount {
        reaction: usize,
        time: f64,
        species: String,
    },
    #[error("trajectory exceeded the jump limit of {0}")]
    MaxJumps(u64),
    #[error("invalid simulation horizon {0}")]
    InvalidHorizon(f64),
    #[error("parameter vector has length {actual}, model declares {expected} parameters")]
    ParamLength { expected: usize, actual: usize },
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("invalid mean-signal grid: {0}")]
    InvalidGrid(String),
}

/// Piecewise-constant, right-continuous sample path on `[0, horizon]`.
///
/// `states` holds one more state than there are jumps: the initial state is
/// in force on `[0, t_1)`, state `j` on `[t_j, t_{j+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n_species: usize,
    times: Vec<f64>,
    states: Vec<i64>,
    horizon: f64,
}

impl Trajectory {
    pub fn new(initial: &[i64], horizon: f64) -> Self {
        Trajectory {
            n_species: initial.len(),
            times: Vec::new(),
            states: initial.to_vec(),
            horizon,
        }
    }

    /// Builds a trajectory from explicit jump times and states, checking the
    /// time ordering and non-negativity invariants.
    pub fn from_parts(times: Vec<f64>, states: Vec<Vec<i64>>, horizon: f64) -> Result<Self, String> {
        if states.len() != times.len() + 1 {
            return Err(format!("{} states for {} jumps", states.len(), times.len()));
        }
        let n = states[0].len();
        let mut tr = Trajectory::new(&states[0], horizon);
        for (t, s) in times.into_iter().zip(states.into_iter().skip(1)) {
            if s.len() != n {
                return Err("states differ in length".into());
            }
            tr.push_jump(t, &s);
        }
        tr.check_basic()?;
        Ok(tr)
    }

    fn push_jump(&mut self, t: f64, state: &[i64]) {
        self.times.push(t);
        self.states.extend_from_slice(state);
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    /// State after `j` jumps (`j = 0` is the initial state).
    pub fn state(&self, j: usize) -> &[i64] {
        &self.states[j * self.n_species..(j + 1) * self.n_species]
    }

    /// Index of the state in force at time `t`: the number of jump times `<= t`.
    pub fn segment_at(&self, t: f64) -> usize {
        self.times.partition_point(|&tj| tj <= t)
    }

    pub fn state_at(&self, t: f64) -> &[i64] {
        self.state(self.segment_at(t))
    }

    pub fn final_state(&self) -> &[i64] {
        self.state(self.times.len())
    }

    fn check_basic(&self) -> Result<(), String> {
        let mut prev = 0.0;
        for &t in &self.times {
            if !(t > prev) || t > self.horizon {
                return Err(format!("jump time {t} out of order or outside (0, {}]", self.horizon));
            }
            prev = t;
        }
        if let Some(c) = self.states.iter().find(|&&c| c < 0) {
            return Err(format!("negative count {c}"));
        }
        Ok(())
    }

    /// Checks the trajectory invariants against a model: ordered jump times
    /// in `(0, horizon]`, non-negative counts, and every jump equal to the
    /// net change of some reaction.
    pub fn check_invariants(&self, model: &Model) -> Result<(), String> {
        self.check_basic()?;
        if self.n_species != model.species.len() {
            return Err("species count mismatch".into());
        }
        let changes: Vec<Vec<i64>> = model.reactions.iter().map(|r| r.net_change()).collect();
        for j in 0..self.times.len() {
            let diff: Vec<i64> = self
                .state(j + 1)
                .iter()
                .zip(self.state(j))
                .map(|(b, a)| b - a)
                .collect();
            if !changes.contains(&diff) {
                return Err(format!("jump {j} changes state by {diff:?}, which no reaction does"));
            }
        }
        Ok(())
    }

    /// Debug dump: header `t,<species...>`, the initial row at `t = 0`, then one row per jump.
    pub fn write_csv<W: Write>(&self, species: &[String], mut out: W) -> io::Result<()> {
        writeln!(out, "t,{}", species.join(","))?;
        let row = |out: &mut W, t: f64, s: &[i64]| -> io::Result<()> {
            write!(out, "{t:?}")?;
            for c in s {
                write!(out, ",{c}")?;
            }
            writeln!(out)
        };
        row(&mut out, 0.0, self.state(0))?;
        for (j, &t) in self.times.iter().enumerate() {
            row(&mut out, t, self.state(j + 1))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub max_jumps: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_jumps: DEFAULT_MAX_JUMPS,
        }
    }
}

/// Direct-method SSA bound to one model.
#[derive(Debug, Clone)]
pub struct Simulator<'m> {
    model: &'m Model,
    changes: Vec<Vec<i64>>,
    options: SimOptions,
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m Model, options: SimOptions) -> Self {
        Simulator {
            model,
            changes: model.reactions.iter().map(|r| r.net_change()).collect(),
            options,
        }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    /// Samples one trajectory on `[0, horizon]`.
    ///
    /// A zero horizon yields the initial state with no jumps.
    pub fn run(&self, params: &[f64], horizon: f64, rng: &mut impl RngCore) -> Result<Trajectory, SimError> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(SimError::InvalidHorizon(horizon));
        }
        if params.len() != self.model.parameters.len() {
            return Err(SimError::ParamLength {
                expected: self.model.parameters.len(),
                actual: params.len(),
            });
        }
        let mut traj = Trajectory::new(&self.model.initial_state, horizon);
        let mut state = self.model.initial_state.clone();
        let mut props = vec![0.0; self.model.reactions.len()];
        let mut t = 0.0f64;
        let mut jumps = 0u64;
        loop {
            let mut total = 0.0;
            for (k, (r, p)) in self.model.reactions.iter().zip(props.iter_mut()).enumerate() {
                *p = r.rate.eval(&state, params).map_err(|source| SimError::Rate {
                    reaction: k,
                    time: t,
                    source,
                })?;
                total += *p;
            }
            if total <= 0.0 {
                break;
            }
            let mut next = t - open_unit(rng).ln() / total;
            if next <= t {
                next = t.next_up();
            }
            if next > horizon {
                break;
            }
            let target = open_unit(rng) * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (k, &p) in props.iter().enumerate() {
                acc += p;
                if p > 0.0 {
                    chosen = Some(k);
                    if target < acc {
                        break;
                    }
                }
            }
            // chosen is the last positive channel if rounding left target >= acc
            let k = chosen.expect("positive total propensity");
            for (i, (x, d)) in state.iter_mut().zip(&self.changes[k]).enumerate() {
                *x += d;
                if *x < 0 {
                    return Err(SimError::NegativeCount {
                        reaction: k,
                        time: next,
                        species: self.model.species[i].clone(),
                    });
                }
            }
            jumps += 1;
            if jumps > self.options.max_jumps {
                return Err(SimError::MaxJumps(self.options.max_jumps));
            }
            t = next;
            traj.push_jump(t, &state);
        }
        Ok(traj)
    }

    /// Trajectory `index` of the ensemble keyed by `seed`.
    pub fn run_stream(&self, params: &[f64], horizon: f64, seed: u64, index: u64) -> Result<Trajectory, SimError> {
        self.run(params, horizon, &mut stream_rng(seed, index))
    }

    pub fn ensemble(&self, params: &[f64], horizon: f64, n: usize, seed: u64) -> Result<Vec<Trajectory>, SimError> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.run_stream(params, horizon, seed, i))
            .collect()
    }
}

/// One trajectory from stream 0 of `seed`, with default options.
pub fn simulate(model: &Model, params: &[f64], horizon: f64, seed: u64) -> Result<Trajectory, SimError> {
    Simulator::new(model, SimOptions::default()).run_stream(params, horizon, seed, 0)
}

/// `n` independent trajectories; member `i` uses stream `(seed, i)`.
pub fn simulate_ensemble(
    model: &Model,
    params: &[f64],
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, SimError> {
    Simulator::new(model, SimOptions::default()).ensemble(params, horizon, n, seed)
}

/// Pointwise ensemble mean of species counts on a time grid.
///
/// Between grid points the signal is linearly interpolated; outside the grid
/// it is held at the end values.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSignal {
    grid: Vec<f64>,
    tracks: Vec<(String, Vec<f64>)>,
}

impl MeanSignal {
    pub fn new(grid: Vec<f64>, species: impl Into<String>, means: Vec<f64>) -> Result<Self, String> {
        if grid.is_empty() || grid.len() != means.len() {
            return Err(format!("{} grid points for {} means", grid.len(), means.len()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("mean-signal grid must be strictly increasing".into());
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err("mean-signal values must be finite".into());
        }
        Ok(MeanSignal {
            grid,
            tracks: vec![(species.into(), means)],
        })
    }

    /// Adds the tracks of `other`, which must share this grid.
    pub fn merge(mut self, other: MeanSignal) -> Result<Self, String> {
        if other.grid != self.grid {
            return Err("cannot merge mean signals on different grids".into());
        }
        for (name, means) in other.tracks {
            if self.track_index(&name).is_none() {
                self.tracks.push((name, means));
            }
        }
        Ok(self)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn track_index(&self, species: &str) -> Option<usize> {
        self.tracks.iter().position(|(s, _)| s == species)
    }

    pub fn means(&self, species: &str) -> Option<&[f64]> {
        self.track_index(species).map(|i| self.tracks[i].1.as_slice())
    }

    pub fn species(&self) -> impl Iterator<Item = &str> {
        self.tracks.iter().map(|(s, _)| s.as_str())
    }

    pub fn value_at(&self, track: usize, t: f64) -> f64 {
        let means = &self.tracks[track].1;
        let g = &self.grid;
        if t <= g[0] {
            return means[0];
        }
        if t >= g[g.len() - 1] {
            return means[means.len() - 1];
        }
        let hi = g.partition_point(|&x| x <= t);
        let lo = hi - 1;
        let w = (t - g[lo]) / (g[hi] - g[lo]);
        means[lo] + w * (means[hi] - means[lo])
    }

    pub fn value(&self, species: &str, t: f64) -> Option<f64> {
        self.track_index(species).map(|i| self.value_at(i, t))
    }
}

/// `points` evenly spaced times covering `[0, horizon]`.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2, "a time grid needs at least two points");
    (0..points)
        .map(|i| {
            if i + 1 == points {
                horizon
            } else {
                horizon * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

/// Sample mean of `species` over the ensemble at each grid time.
pub fn mean_trajectory(
    model: &Model,
    ensemble: &[Trajectory],
    grid: &[f64],
    species: &str,
) -> Result<MeanSignal, SimError> {
    let idx = model
        .species_index(species)
        .ok_or_else(|| SimError::UnknownSpecies(species.to_string()))?;
    if ensemble.is_empty() {
        return Err(SimError::EmptyEnsemble);
    }
    let n = ensemble.len() as f64;
    let means = grid
        .iter()
        .map(|&t| ensemble.iter().map(|tr| tr.state_at(t)[idx] as f64).sum::<f64>() / n)
        .collect();
    MeanSignal::new(grid.to_vec(), species, means).map_err(SimError::InvalidGrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn poisson(rate: f64) -> Model {
        parse_model(&format!("species N=0\nparam mu={rate:?}\nreaction -> N @ mu\n")).unwrap()
    }

    fn sir() -> Model {
        parse_model(
            "species S=99 I=1 R=0\nparam k_i=0.12 k_r=0.05\n\
             reaction S + I -> I + I @ k_i*S*I\nreaction I -> R @ k_r*I\n",
        )
        .unwrap()
    }

    #[test]
    fn exponential_gaps_for_constant_rate() {
        let mu = 2.0;
        let model = poisson(mu);
        let horizon = 60_000.0;
        let tr = simulate(&model, &[mu], horizon, 11).unwrap();
        assert!(tr.jump_count() >= 100_000, "{}", tr.jump_count());
        let times = &tr.jump_times()[..100_000];
        let mut prev = 0.0;
        let gaps: Vec<f64> = times
            .iter()
            .map(|&t| {
                let g = t - prev;
                prev = t;
                g
            })
            .collect();
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        // Exponential(mu): mean 1/mu, sd 1/mu
        let se = (1.0 / mu) / n.sqrt();
        assert!((mean - 1.0 / mu).abs() < 3.0 * se, "mean gap {mean}");
    }

    #[test]
    fn zero_rates_give_constant_path() {
        let model = parse_model("species A=0 B=5\nparam k=1\nreaction A -> B @ k*A\n").unwrap();
        let tr = simulate(&model, &[1.0], 10.0, 3).unwrap();
        assert_eq!(tr.jump_count(), 0);
        assert_eq!(tr.state_at(7.5), &[0, 5]);
        assert_eq!(tr.horizon(), 10.0);
    }

    #[test]
    fn simulation_is_deterministic() {
        let m = sir();
        let a = simulate(&m, &m.default_params(), 150.0, 42).unwrap();
        let b = simulate(&m, &m.default_params(), 150.0, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &m.default_params(), 150.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn singleton_ensemble_matches_simulate() {
        let m = sir();
        let p = m.default_params();
        let e = simulate_ensemble(&m, &p, 100.0, 1, 5).unwrap();
        assert_eq!(e, vec![simulate(&m, &p, 100.0, 5).unwrap()]);
        let again = simulate_ensemble(&m, &p, 100.0, 10, 9).unwrap();
        assert_eq!(again, simulate_ensemble(&m, &p, 100.0, 10, 9).unwrap());
    }

    #[test]
    fn sir_conserves_population_and_meets_invariants() {
        let m = sir();
        for tr in simulate_ensemble(&m, &m.default_params(), 200.0, 20, 1).unwrap() {
            tr.check_invariants(&m).unwrap();
            for j in 0..=tr.jump_count() {
                assert_eq!(tr.state(j).iter().sum::<i64>(), 100);
            }
        }
    }

    #[test]
    fn pure_birth_is_monotone() {
        let m = poisson(3.0);
        let tr = simulate(&m, &[3.0], 20.0, 8).unwrap();
        for j in 0..tr.jump_count() {
            assert!(tr.state(j + 1)[0] > tr.state(j)[0]);
        }
    }

    #[test]
    fn cadlag_lookup_is_right_continuous() {
        let tr = Trajectory::from_parts(vec![0.5, 1.0], vec![vec![3], vec![4], vec![5]], 2.0).unwrap();
        assert_eq!(tr.state_at(0.0), &[3]);
        assert_eq!(tr.state_at(0.4999), &[3]);
        assert_eq!(tr.state_at(0.5), &[4]);
        assert_eq!(tr.state_at(1.0), &[5]);
        assert_eq!(tr.state_at(2.0), &[5]);
    }

    #[test]
    fn from_parts_rejects_bad_paths() {
        assert!(Trajectory::from_parts(vec![1.0, 0.5], vec![vec![0], vec![1], vec![2]], 2.0).is_err());
        assert!(Trajectory::from_parts(vec![0.0], vec![vec![0], vec![1]], 2.0).is_err());
        assert!(Trajectory::from_parts(vec![3.0], vec![vec![0], vec![1]], 2.0).is_err());
        assert!(Trajectory::from_parts(vec![1.0], vec![vec![0], vec![-1]], 2.0).is_err());
    }

    #[test]
    fn max_jump_guard() {
        let m = poisson(100.0);
        let sim = Simulator::new(&m, SimOptions { max_jumps: 50 });
        let err = sim.run_stream(&[100.0], 10.0, 0, 0).unwrap_err();
        assert_eq!(err, SimError::MaxJumps(50));
    }

    #[test]
    fn invalid_rates_surface_as_errors() {
        let m = parse_model("species A=1\nparam k=1\nreaction A -> 0 @ k - 2*A\n").unwrap();
        let err = simulate(&m, &[1.0], 1.0, 0).unwrap_err();
        assert!(matches!(err, SimError::Rate { reaction: 0, .. }), "{err:?}");
        let m = parse_model("species A=0\nreaction A -> 0 @ 1\n").unwrap();
        let err = simulate(&m, &[], 1.0, 0).unwrap_err();
        assert!(matches!(err, SimError::NegativeCount { .. }), "{err:?}");
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let m = poisson(1.0);
        let tr = simulate(&m, &[1.0], 0.0, 0).unwrap();
        assert_eq!(tr.jump_count(), 0);
        assert!(simulate(&m, &[1.0], -1.0, 0).is_err());
    }

    #[test]
    fn mean_of_constant_paths() {
        let m = parse_model("species X=3\nreaction X -> X @ 0\n").unwrap();
        let ens = simulate_ensemble(&m, &[], 5.0, 4, 0).unwrap();
        let grid = uniform_grid(5.0, 11);
        let mean = mean_trajectory(&m, &ens, &grid, "X").unwrap();
        assert!(mean.means("X").unwrap().iter().all(|&v| v == 3.0));

        let a = Trajectory::new(&[0], 5.0);
        let b = Trajectory::new(&[4], 5.0);
        let mean = mean_trajectory(&m, &[a, b], &grid, "X").unwrap();
        assert!(mean.means("X").unwrap().iter().all(|&v| v == 2.0));
        assert!(matches!(
            mean_trajectory(&m, &[], &grid, "X"),
            Err(SimError::EmptyEnsemble)
        ));
        assert!(matches!(
            mean_trajectory(&m, &ens, &grid, "Y"),
            Err(SimError::UnknownSpecies(s)) if s == "Y"
        ));
    }

    #[test]
    fn poisson_mean_at_two() {
        let m = poisson(1.0);
        let n = 10_000;
        let ens = simulate_ensemble(&m, &[1.0], 2.0, n, 77).unwrap();
        let mean = mean_trajectory(&m, &ens, &[0.0, 1.0, 2.0], "N").unwrap();
        let at_two = mean.means("N").unwrap()[2];
        // Poisson(2): mean 2, variance 2
        assert!((at_two - 2.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{at_two}");
    }

    #[test]
    fn mean_signal_interpolates_linearly() {
        let s = MeanSignal::new(vec![0.0, 1.0, 3.0], "X", vec![0.0, 2.0, 6.0]).unwrap();
        assert_eq!(s.value("X", 0.5), Some(1.0));
        assert_eq!(s.value("X", 2.0), Some(4.0));
        assert_eq!(s.value("X", 10.0), Some(6.0));
        assert_eq!(s.value("Y", 1.0), None);
        let t = MeanSignal::new(vec![0.0, 1.0, 3.0], "Y", vec![1.0; 3]).unwrap();
        let both = s.merge(t).unwrap();
        assert_eq!(both.value("Y", 2.0), Some(1.0));
    }

    #[test]
    fn csv_dump_has_initial_row() {
        let tr = Trajectory::from_parts(vec![0.5], vec![vec![1, 0], vec![0, 1]], 1.0).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&["A".into(), "B".into()], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,A,B\n0.0,1,0\n0.5,0,1\n");
    }
}
