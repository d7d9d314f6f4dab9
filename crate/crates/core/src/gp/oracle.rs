//! Brute-force posterior means by tensor-grid quadrature, for checking EP.

use super::kernel::{gram, KernelConfig};
use super::probit::log_probit;
use super::GpError;
use crate::smc::Observation;

const NODES: usize = 401;
const SPAN: f64 = 8.0;
/// Resolution of the tabulated per-point log-likelihood.
const TABLE: usize = 40_001;

/// Posterior means of the latent values under the exact model
/// `N(g; 0, K) * prod_j Phi(g_j)^s_j (1 - Phi(g_j))^(m_j - s_j)`.
///
/// The integral is taken over whitened coordinates `g = L u` on a grid of
/// `NODES` points per axis spanning `+-8` prior standard deviations. Points
/// with zero trials contribute no likelihood.
pub fn quadrature_posterior_oracle(
    points: &[Vec<f64>],
    observations: &[Observation],
    kernel: &KernelConfig,
) -> Result<Vec<f64>, GpError> {
    let n = points.len();
    if n > 3 {
        return Err(GpError::TooManyPoints(n));
    }
    if observations.len() != n {
        return Err(GpError::InvalidData(format!(
            "{n} points but {} observations",
            observations.len()
        )));
    }
    let l = gram(kernel, points)?.cholesky().l();
    let h = 2.0 * SPAN / (NODES - 1) as f64;
    let nodes: Vec<f64> = (0..NODES).map(|k| -SPAN + k as f64 * h).collect();
    let log_prior: Vec<f64> = nodes.iter().map(|u| -0.5 * u * u).collect();

    let tables: Vec<LogLik> = (0..n)
        .map(|j| {
            let reach = SPAN * (0..n).map(|d| l[(j, d)].abs()).sum::<f64>() * 1.001;
            LogLik::new(observations[j], reach)
        })
        .collect();
    if n == 0 {
        return Ok(Vec::new());
    }
    let grid = Grid {
        n,
        l: &l,
        nodes: &nodes,
        log_prior: &log_prior,
        tables: &tables,
    };
    let (z, first) = grid.integrate(0, [0.0; 3], 0.0);
    if !(z > 0.0) {
        return Err(GpError::Numerical("quadrature weights underflowed".into()));
    }
    Ok(first[..n].iter().map(|m| m / z).collect())
}

/// Below this log weight `exp` is exactly zero, so whole subtrees can be skipped.
const UNDERFLOW: f64 = -746.0;

struct Grid<'a> {
    n: usize,
    l: &'a nalgebra::DMatrix<f64>,
    nodes: &'a [f64],
    log_prior: &'a [f64],
    tables: &'a [LogLik],
}

impl Grid<'_> {
    /// Sums the weights over axes `j..n` given the contributions `partial` of
    /// the axes already fixed, returning the total weight and the
    /// weight-times-latent sums of rows `j..n`. Log weights are relative to
    /// the per-table maxima, so they only decrease with depth.
    fn integrate(&self, j: usize, partial: [f64; 3], log_w: f64) -> (f64, [f64; 3]) {
        let (mut z, mut first) = (0.0, [0.0; 3]);
        let diag = self.l[(j, j)];
        let table = &self.tables[j];
        for (k, &u) in self.nodes.iter().enumerate() {
            let g = partial[j] + diag * u;
            let lw = log_w + self.log_prior[k] + table.eval(g) - table.max;
            if lw < UNDERFLOW {
                continue;
            }
            if j + 1 == self.n {
                let w = lw.exp();
                z += w;
                first[j] += w * g;
            } else {
                let mut next = partial;
                for (r, slot) in next.iter_mut().enumerate().take(self.n).skip(j + 1) {
                    *slot += self.l[(r, j)] * u;
                }
                let (iz, inner) = self.integrate(j + 1, next, lw);
                z += iz;
                first[j] += g * iz;
                for r in j + 1..self.n {
                    first[r] += inner[r];
                }
            }
        }
        (z, first)
    }
}

/// `s ln Phi(g) + f ln Phi(-g)` tabulated on `[-reach, reach]` and linearly
/// interpolated.
struct LogLik {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    max: f64,
}

impl LogLik {
    fn new(obs: Observation, reach: f64) -> Self {
        let (s, f) = (obs.successes as f64, obs.failures() as f64);
        let reach = reach.max(1e-12);
        let step = 2.0 * reach / (TABLE - 1) as f64;
        let values: Vec<f64> = (0..TABLE)
            .map(|k| {
                let g = -reach + k as f64 * step;
                let mut v = 0.0;
                if s > 0.0 {
                    v += s * log_probit(g);
                }
                if f > 0.0 {
                    v += f * log_probit(-g);
                }
                v
            })
            .collect();
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        LogLik {
            lo: -reach,
            step,
            values,
            max,
        }
    }

    fn eval(&self, g: f64) -> f64 {
        let x = ((g - self.lo) / self.step).clamp(0.0, (TABLE - 1) as f64);
        let k = (x as usize).min(TABLE - 2);
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}
