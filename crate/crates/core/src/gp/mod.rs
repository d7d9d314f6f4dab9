//! Gaussian-process classification of satisfaction probabilities.
//!
//! The satisfaction probability is modelled as `Phi(g(theta))` with a GP
//! prior on the latent `g`. Binomial observations are absorbed with
//! Expectation Propagation, and predictions are reported as the expected
//! probability together with a 95% band.

mod ep;
mod hyper;
mod kernel;
mod oracle;
mod probit;

use thiserror::Error;

pub use ep::{
    ep_fit, ep_fit_with, prediction_from_latent, EpOptions, EpState, LatentPrediction, Prediction, SiteParams,
    TrainingSet, Z_95,
};
pub use hyper::{optimize_hyperparams, HyperBounds};
pub use kernel::{cross_gram, gram, kernel_eval, GramMatrix, KernelConfig, DEFAULT_JITTER};
pub use oracle::quadrature_posterior_oracle;
pub use probit::{log_probit, normal_pdf, pdf_over_cdf, probit, probit_inv};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid kernel configuration: {0}")]
    InvalidConfig(String),
    #[error("Gram matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("probit_inv is defined on (0, 1), got {0}")]
    ProbitDomain(f64),
    #[error("quadrature oracle supports at most 3 points, got {0}")]
    TooManyPoints(usize),
    #[error("no hyperparameter candidate could be fitted: {0}")]
    AllCandidatesFailed(String),
}
