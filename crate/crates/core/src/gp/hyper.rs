//! Type-II maximum likelihood for the kernel hyperparameters.
//!
//! Coordinate-wise golden-section search over the log-hyperparameters,
//! maximizing the EP approximation of the log marginal likelihood. The search
//! is deterministic, and EP at every candidate starts from the sites of the
//! best fit found so far.

use super::ep::{ep_fit_with, EpOptions, EpState, SiteParams, TrainingSet};
use super::kernel::{KernelConfig, DEFAULT_JITTER};
use super::GpError;

/// Search box for the hyperparameters, as natural-log ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBounds {
    pub log_amplitude: (f64, f64),
    pub log_lengthscale: (f64, f64),
    /// Coordinate-descent passes over all hyperparameters.
    pub passes: usize,
    /// Width, in log units, at which a golden-section search stops.
    pub tol: f64,
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            log_amplitude: (1e-2f64.ln(), 1e2f64.ln()),
            log_lengthscale: (1e-2f64.ln(), 1e1f64.ln()),
            passes: 3,
            tol: 1e-3,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

struct Search<'a> {
    data: &'a TrainingSet,
    options: EpOptions,
    best: Option<(Vec<f64>, EpState)>,
    last_error: Option<GpError>,
}

impl Search<'_> {
    fn config(theta: &[f64]) -> Result<KernelConfig, GpError> {
        let amplitude = theta[0].exp();
        let mut cfg = KernelConfig::new(amplitude, theta[1..].iter().map(|l| l.exp()).collect())?;
        cfg.jitter = DEFAULT_JITTER * amplitude;
        Ok(cfg)
    }

    /// Log marginal likelihood at `theta`, or `-inf` if EP fails there.
    fn score(&mut self, theta: &[f64]) -> f64 {
        let warm: Option<SiteParams> = self.best.as_ref().map(|(_, s)| s.sites().clone());
        let fit = Search::config(theta).and_then(|cfg| ep_fit_with(self.data, &cfg, self.options, warm.as_ref()));
        match fit {
            Ok(state) => {
                let value = state.log_marginal();
                let better = self.best.as_ref().is_none_or(|(_, b)| value > b.log_marginal());
                if better {
                    self.best = Some((theta.to_vec(), state));
                }
                value
            }
            Err(e) => {
                self.last_error = Some(e);
                f64::NEG_INFINITY
            }
        }
    }

    /// Golden-section maximization of coordinate `d` within `[lo, hi]`.
    fn line_search(&mut self, theta: &mut Vec<f64>, d: usize, lo: f64, hi: f64, tol: f64) {
        let (mut a, mut b) = (lo, hi);
        if b - a <= tol {
            theta[d] = 0.5 * (a + b);
            return;
        }
        let eval_at = |s: &mut Self, x: f64| {
            let mut t = theta.clone();
            t[d] = x;
            s.score(&t)
        };
        let mut c = b - INV_PHI * (b - a);
        let mut e = a + INV_PHI * (b - a);
        let mut fc = eval_at(self, c);
        let mut fe = eval_at(self, e);
        while b - a > tol {
            if fc >= fe {
                b = e;
                e = c;
                fe = fc;
                c = b - INV_PHI * (b - a);
                fc = eval_at(self, c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + INV_PHI * (b - a);
                fe = eval_at(self, e);
            }
        }
        // continue from the best point seen so far
        if let Some((best, _)) = &self.best {
            theta.clone_from(best);
        }
    }
}

/// Maximizes the EP log marginal likelihood over amplitude and lengthscales,
/// starting from `init`. The returned configuration is never worse than `init`.
pub fn optimize_hyperparams(
    data: &TrainingSet,
    init: &KernelConfig,
    bounds: &HyperBounds,
) -> Result<(KernelConfig, EpState), GpError> {
    init.validate()?;
    let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo - 1e-12 && x <= hi + 1e-12;
    let mut theta: Vec<f64> = std::iter::once(init.amplitude.ln())
        .chain(init.lengthscales.iter().map(|l| l.ln()))
        .collect();
    if !inside(theta[0], bounds.log_amplitude) || !theta[1..].iter().all(|&t| inside(t, bounds.log_lengthscale)) {
        return Err(GpError::InvalidConfig(
            "initial hyperparameters lie outside the search bounds".into(),
        ));
    }
    let mut search = Search {
        data,
        options: EpOptions::default(),
        best: None,
        last_error: None,
    };
    // the initial configuration itself, exactly as given
    let init_fit = ep_fit_with(data, init, search.options, None);
    match init_fit {
        Ok(state) => search.best = Some((theta.clone(), state)),
        Err(e) => search.last_error = Some(e),
    }

    for _ in 0..bounds.passes {
        for d in 0..theta.len() {
            let (lo, hi) = if d == 0 {
                bounds.log_amplitude
            } else {
                bounds.log_lengthscale
            };
            search.line_search(&mut theta, d, lo, hi, bounds.tol);
        }
    }

    match search.best {
        Some((best_theta, state)) => {
            if best_theta == theta_of(init) {
                return Ok((init.clone(), state));
            }
            Ok((state.kernel().clone(), state))
        }
        None => Err(GpError::AllCandidatesFailed(
            search.last_error.map(|e| e.to_string()).unwrap_or_default(),
        )),
    }
}

fn theta_of(cfg: &KernelConfig) -> Vec<f64> {
    std::iter::once(cfg.amplitude.ln())
        .chain(cfg.lengthscales.iter().map(|l| l.ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::ep_fit;
    use crate::smc::Observation;

    fn sigmoid_data() -> TrainingSet {
        let xs: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 / 14.0]).collect();
        let obs = (0..15).map(|i| Observation::new((i * 10 / 14) as u64, 10)).collect();
        TrainingSet::new(xs, obs).unwrap()
    }

    #[test]
    fn never_worse_than_init() {
        let data = sigmoid_data();
        let init = KernelConfig::isotropic(1.0, 1.0, 1).unwrap();
        let base = ep_fit(&data, &init).unwrap().log_marginal();
        let (cfg, state) = optimize_hyperparams(&data, &init, &HyperBounds::default()).unwrap();
        assert!(state.log_marginal() >= base);
        assert_eq!(cfg, *state.kernel());
        let refit = ep_fit(&data, &cfg).unwrap().log_marginal();
        assert!((refit - state.log_marginal()).abs() < 1e-4);
    }

    #[test]
    fn collapsed_bounds_return_the_point() {
        let data = sigmoid_data();
        let init = KernelConfig::isotropic(2.0, 0.5, 1).unwrap();
        let bounds = HyperBounds {
            log_amplitude: (2f64.ln(), 2f64.ln()),
            log_lengthscale: (0.5f64.ln(), 0.5f64.ln()),
            ..HyperBounds::default()
        };
        let (cfg, _) = optimize_hyperparams(&data, &init, &bounds).unwrap();
        assert_eq!(cfg, init);
    }

    #[test]
    fn deterministic() {
        let data = sigmoid_data();
        let init = KernelConfig::isotropic(1.0, 0.3, 1).unwrap();
        let a = optimize_hyperparams(&data, &init, &HyperBounds::default()).unwrap().0;
        let b = optimize_hyperparams(&data, &init, &HyperBounds::default()).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn init_outside_bounds_is_rejected() {
        let init = KernelConfig::isotropic(1e3, 0.3, 1).unwrap();
        assert!(optimize_hyperparams(&sigmoid_data(), &init, &HyperBounds::default()).is_err());
    }
}
