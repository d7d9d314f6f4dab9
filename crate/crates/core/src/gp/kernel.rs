//! Squared-exponential covariance and Gram-matrix algebra.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::GpError;

/// `k(x, x') = amplitude * exp(-sum_d (x_d - x'_d)^2 / lengthscale_d^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub amplitude: f64,
    pub lengthscales: Vec<f64>,
    /// Added to the Gram diagonal before factorization.
    pub jitter: f64,
}

/// Relative jitter: the default diagonal nugget is this times the amplitude.
pub const DEFAULT_JITTER: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-2;

impl KernelConfig {
    pub fn new(amplitude: f64, lengthscales: Vec<f64>) -> Result<Self, GpError> {
        let cfg = KernelConfig {
            amplitude,
            jitter: DEFAULT_JITTER * amplitude,
            lengthscales,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same lengthscale in every one of `dim` dimensions.
    pub fn isotropic(amplitude: f64, lengthscale: f64, dim: usize) -> Result<Self, GpError> {
        KernelConfig::new(amplitude, vec![lengthscale; dim])
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.amplitude) {
            return Err(GpError::InvalidConfig(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.lengthscales.is_empty() {
            return Err(GpError::InvalidConfig("at least one lengthscale is required".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|&&l| !ok(l)) {
            return Err(GpError::InvalidConfig(format!(
                "lengthscales must be positive, got {l}"
            )));
        }
        if !ok(self.jitter) {
            return Err(GpError::InvalidConfig(format!(
                "jitter must be positive, got {}",
                self.jitter
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GpError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(GpError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            })
        }
    }

    /// Covariance between `x` and `y`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, GpError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum();
        self.amplitude * (-r2).exp()
    }
}

pub fn kernel_eval(cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64, GpError> {
    cfg.eval(x, y)
}

/// Jittered Gram matrix over training points together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Jitter actually on the diagonal, after any escalation.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

fn unjittered(cfg: &KernelConfig, xs: &[Vec<f64>]) -> Result<DMatrix<f64>, GpError> {
    for x in xs {
        cfg.check_dim(x)?;
    }
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = cfg.amplitude;
        for j in 0..i {
            let v = cfg.eval_unchecked(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Gram matrix with `cfg.jitter` on the diagonal. If the factorization fails
/// the jitter is raised tenfold at a time up to `1e-2 * amplitude`.
pub fn gram(cfg: &KernelConfig, xs: &[Vec<f64>]) -> Result<GramMatrix, GpError> {
    cfg.validate()?;
    if xs.is_empty() {
        return Err(GpError::EmptyTrainingSet);
    }
    factor_with_jitter(unjittered(cfg, xs)?, cfg.jitter, cfg.amplitude)
}

fn factor_with_jitter(base: DMatrix<f64>, start: f64, amplitude: f64) -> Result<GramMatrix, GpError> {
    let mut jitter = start;
    loop {
        let mut m = base.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(GramMatrix {
                matrix: m,
                chol,
                jitter,
            });
        }
        if jitter >= MAX_JITTER * amplitude {
            return Err(GpError::NotPositiveDefinite { jitter });
        }
        jitter = (jitter * 10.0).min(MAX_JITTER * amplitude);
    }
}

/// `K*[i][j] = k(xstar_i, x_j)`, without jitter.
pub fn cross_gram(cfg: &KernelConfig, xs: &[Vec<f64>], xstar: &[Vec<f64>]) -> Result<DMatrix<f64>, GpError> {
    for x in xs.iter().chain(xstar) {
        cfg.check_dim(x)?;
    }
    Ok(DMatrix::from_fn(xstar.len(), xs.len(), |i, j| {
        cfg.eval_unchecked(&xstar[i], &xs[j])
    }))
}
