//! Expectation Propagation for GP classification with binomial observations.
//!
//! Each training point carries one site for its whole Binomial likelihood
//! `Phi(g)^s Phi(-g)^(m-s)`, attached to the latent value `g(x)` of that
//! point. Sites are refined one at a time by moment matching against their
//! tilted distributions; a single trial uses the closed-form probit moments,
//! larger counts a one-dimensional quadrature around the tilted mode.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{cross_gram, gram, GramMatrix, KernelConfig};
use super::probit::{log_probit, pdf_over_cdf, probit};
use super::GpError;
use crate::smc::Observation;

/// Distinct training points with their Binomial observations, stored in
/// lexicographic order of the points so that fits do not depend on the order
/// the data arrived in.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    points: Vec<Vec<f64>>,
    observations: Vec<Observation>,
}

impl TrainingSet {
    pub fn new(points: Vec<Vec<f64>>, observations: Vec<Observation>) -> Result<Self, GpError> {
        if points.is_empty() {
            return Err(GpError::EmptyTrainingSet);
        }
        if points.len() != observations.len() {
            return Err(GpError::InvalidData(format!(
                "{} points but {} observations",
                points.len(),
                observations.len()
            )));
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(GpError::DimensionMismatch {
                    expected: dim,
                    actual: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(GpError::InvalidData(format!("point {i} has a non-finite coordinate")));
            }
            if points[..i].contains(p) {
                return Err(GpError::InvalidData(format!("point {i} duplicates an earlier point")));
            }
        }
        for (i, o) in observations.iter().enumerate() {
            if o.trials == 0 || o.successes > o.trials {
                return Err(GpError::InvalidData(format!(
                    "point {i}: {} successes out of {} trials",
                    o.successes, o.trials
                )));
            }
        }
        let mut pairs: Vec<(Vec<f64>, Observation)> = points.into_iter().zip(observations).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coordinates"));
        let (points, observations) = pairs.into_iter().unzip();
        Ok(TrainingSet { points, observations })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpOptions {
    /// Sweep limit; zero leaves every site at its initial value.
    pub max_sweeps: usize,
    /// Convergence threshold on the largest change of a site parameter.
    pub tol: f64,
}

impl Default for EpOptions {
    fn default() -> Self {
        EpOptions {
            max_sweeps: 100,
            tol: 1e-6,
        }
    }
}

/// Natural parameters of the Gaussian site approximations, one per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteParams {
    pub tau: Vec<f64>,
    pub nu: Vec<f64>,
}

impl SiteParams {
    fn zeros(n: usize) -> Self {
        SiteParams {
            tau: vec![0.0; n],
            nu: vec![0.0; n],
        }
    }
}

/// Fitted EP approximation.
#[derive(Debug, Clone)]
pub struct EpState {
    kernel: KernelConfig,
    points: Vec<Vec<f64>>,
    observations: Vec<Observation>,
    gram: GramMatrix,
    sites: SiteParams,
    /// Site precisions as a vector.
    tau_total: DVector<f64>,
    /// Site precision-means as a vector.
    nu_total: DVector<f64>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// Factor of `I + S^1/2 K S^1/2`.
    b_chol: Cholesky<f64, Dyn>,
    /// Predictive weights: latent mean at `x*` is `k*^T weights`.
    weights: DVector<f64>,
    log_marginal: f64,
    sweeps: usize,
    max_delta: f64,
    converged: bool,
}

/// Moments of a probit-tilted Gaussian: `(log Z, mean, variance)`.
fn tilted_probit(y: f64, mu: f64, var: f64) -> (f64, f64, f64) {
    let s = (1.0 + var).sqrt();
    let z = y * mu / s;
    let r = pdf_over_cdf(z);
    let mean = mu + y * var * r / s;
    let v = var - var * var * r * (z + r) / (1.0 + var);
    (log_probit(z), mean, v)
}

/// Moments of `N(g; mu, var) Phi(g)^s Phi(-g)^f`: `(log Z, mean, variance)`.
fn tilted(obs: Observation, mu: f64, var: f64) -> (f64, f64, f64) {
    match (obs.successes, obs.failures()) {
        (1, 0) => tilted_probit(1.0, mu, var),
        (0, 1) => tilted_probit(-1.0, mu, var),
        (s, f) => tilted_binomial(s as f64, f as f64, mu, var),
    }
}

/// Log-density drop at which the quadrature range is cut.
const TAIL_DROP: f64 = 40.0;

fn tilted_binomial(s: f64, f: f64, mu: f64, var: f64) -> (f64, f64, f64) {
    let h = |g: f64| {
        let mut v = -0.5 * (g - mu) * (g - mu) / var;
        if s > 0.0 {
            v += s * log_probit(g);
        }
        if f > 0.0 {
            v += f * log_probit(-g);
        }
        v
    };
    let grad = |g: f64| -(g - mu) / var + s * pdf_over_cdf(g) - f * pdf_over_cdf(-g);
    // minus the second derivative, positive since h is strictly concave
    let curv = |g: f64| {
        let (rp, rn) = (pdf_over_cdf(g), pdf_over_cdf(-g));
        1.0 / var + s * rp * (g + rp) + f * rn * (rn - g)
    };

    // safeguarded Newton ascent to the mode
    let mut g = mu;
    let mut hg = h(g);
    for _ in 0..200 {
        let mut step = grad(g) / curv(g);
        let mut next = g + step;
        let mut hn = h(next);
        while hn < hg && step.abs() > 1e-300 {
            step *= 0.5;
            next = g + step;
            hn = h(next);
        }
        let done = step.abs() <= 1e-13 * (1.0 + g.abs());
        g = next;
        hg = hn;
        if done {
            break;
        }
    }
    let mode = g;
    let hmax = hg;
    let sd = 1.0 / curv(mode).sqrt();

    let reach = |dir: f64| {
        let mut k = 8.0;
        while h(mode + dir * k * sd) > hmax - TAIL_DROP && k < 1e12 {
            k *= 2.0;
        }
        mode + dir * k * sd
    };
    let (lo, hi) = (reach(-1.0), reach(1.0));
    let nodes = (((hi - lo) / (0.25 * sd)).ceil() as usize).clamp(64, 20_000);
    let dx = (hi - lo) / nodes as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..=nodes {
        let x = lo + k as f64 * dx;
        let w = if k == 0 || k == nodes { 0.5 } else { 1.0 } * (h(x) - hmax).exp();
        let d = x - mode;
        z += w;
        m1 += w * d;
        m2 += w * d * d;
    }
    let mean_offset = m1 / z;
    let variance = (m2 / z - mean_offset * mean_offset).max(0.0);
    let log_z = hmax + (z * dx).ln() - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
    (log_z, mode + mean_offset, variance)
}

/// Runs EP to convergence or the sweep limit.
pub fn ep_fit(data: &TrainingSet, kernel: &KernelConfig) -> Result<EpState, GpError> {
    ep_fit_with(data, kernel, EpOptions::default(), None)
}

/// EP with explicit options and optional initial site parameters (e.g. from
/// a fit at nearby hyperparameters).
pub fn ep_fit_with(
    data: &TrainingSet,
    kernel: &KernelConfig,
    options: EpOptions,
    init: Option<&SiteParams>,
) -> Result<EpState, GpError> {
    if kernel.dim() != data.dim() {
        return Err(GpError::DimensionMismatch {
            expected: kernel.dim(),
            actual: data.dim(),
        });
    }
    let gram = gram(kernel, data.points())?;
    let k = gram.matrix().clone();
    let n = data.len();

    let mut sites = match init {
        Some(s) if s.tau.len() == n && s.nu.len() == n => s.clone(),
        _ => SiteParams::zeros(n),
    };
    let (tau0, nu0) = totals(&sites);
    let (mut mean, mut cov) = posterior(&k, &tau0, &nu0)?;

    let mut sweeps = 0;
    let mut max_delta = f64::INFINITY;
    let mut converged = false;
    let mut damping = 1.0;
    while sweeps < options.max_sweeps {
        sweeps += 1;
        max_delta = 0.0f64;
        let mut skipped = false;
        for i in 0..n {
            let prec = 1.0 / cov[(i, i)];
            let cav_prec = prec - sites.tau[i];
            if !(cav_prec > 0.0) {
                skipped = true;
                continue;
            }
            let cav_var = 1.0 / cav_prec;
            let cav_mean = (mean[i] * prec - sites.nu[i]) * cav_var;
            let (_, m_hat, v_hat) = tilted(data.observations()[i], cav_mean, cav_var);
            let tau_new = 1.0 / v_hat - cav_prec;
            let nu_new = m_hat / v_hat - cav_mean * cav_prec;
            if !tau_new.is_finite() || !nu_new.is_finite() {
                skipped = true;
                continue;
            }
            let tau_new = damping * tau_new.max(0.0) + (1.0 - damping) * sites.tau[i];
            let nu_new = damping * nu_new + (1.0 - damping) * sites.nu[i];
            let d_tau = tau_new - sites.tau[i];
            let d_nu = nu_new - sites.nu[i];
            max_delta = max_delta.max(d_tau.abs()).max(d_nu.abs());
            sites.tau[i] = tau_new;
            sites.nu[i] = nu_new;

            // rank-one update of the joint posterior
            if d_tau != 0.0 || d_nu != 0.0 {
                let col = cov.column(i).clone_owned();
                let denom = 1.0 + d_tau * cov[(i, i)];
                let mean_step = (d_nu - d_tau * mean[i]) / denom;
                mean.axpy(mean_step, &col, 1.0);
                cov.ger(-d_tau / denom, &col, &col, 1.0);
            }
        }
        // Refresh from scratch to stop round-off from accumulating.
        let (tau_total, nu_total) = totals(&sites);
        let fresh = posterior(&k, &tau_total, &nu_total)?;
        mean = fresh.0;
        cov = fresh.1;
        if skipped {
            damping = 0.5;
        } else if max_delta < options.tol {
            converged = true;
            break;
        }
    }
    if options.max_sweeps == 0 {
        max_delta = 0.0;
    }

    let (tau_total, nu_total) = totals(&sites);
    let (mean, cov) = posterior(&k, &tau_total, &nu_total)?;
    let s_half = tau_total.map(f64::sqrt);
    let b_chol = b_factor(&k, &s_half)?;
    let kn = &k * &nu_total;
    let weights = &nu_total - s_half.component_mul(&b_chol.solve(&s_half.component_mul(&kn)));
    let log_marginal = log_marginal(&sites, data.observations(), &mean, &cov, &nu_total, &b_chol);
    if !log_marginal.is_finite() {
        return Err(GpError::Numerical("EP log marginal likelihood is not finite".into()));
    }

    Ok(EpState {
        kernel: kernel.clone(),
        points: data.points().to_vec(),
        observations: data.observations().to_vec(),
        gram,
        sites,
        tau_total,
        nu_total,
        mean,
        cov,
        b_chol,
        weights,
        log_marginal,
        sweeps,
        max_delta,
        converged,
    })
}

fn totals(sites: &SiteParams) -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_column_slice(&sites.tau),
        DVector::from_column_slice(&sites.nu),
    )
}

fn b_factor(k: &DMatrix<f64>, s_half: &DVector<f64>) -> Result<Cholesky<f64, Dyn>, GpError> {
    let n = k.nrows();
    let b = DMatrix::from_fn(n, n, |i, j| {
        let v = s_half[i] * k[(i, j)] * s_half[j];
        if i == j {
            1.0 + v
        } else {
            v
        }
    });
    Cholesky::new(b).ok_or_else(|| GpError::Numerical("I + S^1/2 K S^1/2 is not positive definite".into()))
}

/// Posterior mean and covariance `Sigma = K - K S^1/2 B^-1 S^1/2 K`, `mu = Sigma nu`.
fn posterior(k: &DMatrix<f64>, tau: &DVector<f64>, nu: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), GpError> {
    let s_half = tau.map(f64::sqrt);
    let chol = b_factor(k, &s_half)?;
    // V = L^-1 S^1/2 K
    let mut v = k.clone();
    for (i, mut row) in v.row_iter_mut().enumerate() {
        row *= s_half[i];
    }
    chol.l_dirty().solve_lower_triangular_mut(&mut v);
    let mut cov = k - v.transpose() * &v;
    cov.fill_upper_triangle_with_lower_triangle();
    let mean = &cov * nu;
    Ok((mean, cov))
}

fn log_marginal(
    sites: &SiteParams,
    observations: &[Observation],
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    nu_total: &DVector<f64>,
    b_chol: &Cholesky<f64, Dyn>,
) -> f64 {
    let log_det_b: f64 = 2.0 * b_chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut total = -0.5 * log_det_b + 0.5 * nu_total.dot(mean);
    for (i, &obs) in observations.iter().enumerate() {
        let (v, m) = (cov[(i, i)], mean[i]);
        let cav_prec = 1.0 / v - sites.tau[i];
        if !(cav_prec > 0.0) {
            continue;
        }
        let cav_var = 1.0 / cav_prec;
        let cav_mean = (m / v - sites.nu[i]) * cav_var;
        let (log_z, _, _) = tilted(obs, cav_mean, cav_var);
        total += log_z + 0.5 * (1.0 + sites.tau[i] * cav_var).ln() - 0.5 * (m * m / v - cav_mean * cav_mean / cav_var);
    }
    total
}

/// Gaussian predictive marginal of the latent function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentPrediction {
    pub mean: f64,
    pub var: f64,
}

/// Predicted satisfaction probability at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub point: Vec<f64>,
    pub prob_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub latent_mean: f64,
    pub latent_var: f64,
}

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

impl EpState {
    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn sites(&self) -> &SiteParams {
        &self.sites
    }

    pub fn site_precisions(&self) -> &DVector<f64> {
        &self.tau_total
    }

    pub fn site_shifts(&self) -> &DVector<f64> {
        &self.nu_total
    }

    pub fn posterior_mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn posterior_cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn max_delta(&self) -> f64 {
        self.max_delta
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// Covariances between `xstar` and the training points. A test point
    /// that coincides with a training point gets the jittered diagonal entry,
    /// so predicting at a training point reproduces its posterior marginal.
    fn cross(&self, xstar: &[Vec<f64>]) -> Result<DMatrix<f64>, GpError> {
        let mut ks = cross_gram(&self.kernel, &self.points, xstar)?;
        for (r, x) in xstar.iter().enumerate() {
            if let Some(j) = self.points.iter().position(|p| p == x) {
                ks[(r, j)] += self.gram.jitter();
            }
        }
        Ok(ks)
    }

    pub fn predict_latent(&self, xstar: &[Vec<f64>]) -> Result<Vec<LatentPrediction>, GpError> {
        let ks = self.cross(xstar)?;
        let s_half = self.tau_total.map(f64::sqrt);
        let means = &ks * &self.weights;
        // v = L^-1 S^1/2 k*, one column per test point
        let mut v = ks.transpose();
        for (i, mut row) in v.row_iter_mut().enumerate() {
            row *= s_half[i];
        }
        self.b_chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let out = xstar
            .iter()
            .enumerate()
            .map(|(r, x)| {
                let prior = if self.points.contains(x) {
                    self.kernel.amplitude + self.gram.jitter()
                } else {
                    self.kernel.amplitude
                };
                let var = prior - v.column(r).norm_squared();
                LatentPrediction {
                    mean: means[r],
                    var: var.max(0.0),
                }
            })
            .collect();
        Ok(out)
    }

    pub fn predict_probability(&self, xstar: &[Vec<f64>]) -> Result<Vec<Prediction>, GpError> {
        let latent = self.predict_latent(xstar)?;
        Ok(xstar
            .iter()
            .zip(latent)
            .map(|(x, l)| prediction_from_latent(x.clone(), l))
            .collect())
    }
}

/// Maps a latent Gaussian `N(mean, var)` to the expected probability
/// `E[Phi(g)] = Phi(mean / sqrt(1 + var))` and the `Phi`-image of the latent
/// 95% interval.
pub fn prediction_from_latent(point: Vec<f64>, l: LatentPrediction) -> Prediction {
    let sd = l.var.max(0.0).sqrt();
    let prob_mean = probit(l.mean / (1.0 + l.var).sqrt());
    // The expectation is pulled towards 1/2, while the quantiles are not;
    // clamping keeps the reported band around the reported mean when the
    // two disagree in the last bits.
    let ci_low = probit(l.mean - Z_95 * sd).min(prob_mean);
    let ci_high = probit(l.mean + Z_95 * sd).max(prob_mean);
    Prediction {
        point,
        prob_mean,
        ci_low,
        ci_high,
        latent_mean: l.mean,
        latent_var: l.var,
    }
}
