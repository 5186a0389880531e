//! Natural-gradient descent over Gaussian search distributions.
//!
//! Two flavours share the same update rule `mu -= nu_mu * delta_mu`,
//! `Sigma -= nu_sigma * delta_sigma`:
//!
//! - the closed-form step ([`cf_ngd_step`]) consumes exact gradient terms
//!   supplied by an analytic objective, and
//! - the Monte-Carlo step ([`mc_ngd_step`]) estimates them from a sampled
//!   population using a rank-based loss estimator, which makes the iterate
//!   sequence invariant under strictly increasing transformations of the
//!   objective.
//!
//! The covariance stays symmetric positive definite throughout: updates are
//! explicitly symmetrized and a learning-rate guard keeps the step short of
//! the positivity bound `1 / lambda_1(Sigma^{-1/2} dSigma Sigma^{-1/2})`.

mod loss;
mod runner;
mod step;

pub use loss::{estimate_loss, LossEstimates};
pub use runner::{
    run_cf, run_optimizer, CfRow, CfTrace, Objective, OptimizerConfig, OptimizerTrace, TraceRow,
};
pub use step::{
    cf_ngd_step, mc_natural_gradient, mc_ngd_step, positivity_guard, sample_population,
    McStepDiagnostics, StepInfo,
};

use crate::matrix::{MatrixError, SpdMatrix};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NgdError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("covariance would lose positive definiteness, step rejected")]
    StepRejected,
    #[error("invalid learning-rate schedule: {0}")]
    InvalidSchedule(String),
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("dimension mismatch between distribution ({0}) and input ({1})")]
    DimensionMismatch(usize, usize),
}

/// Gaussian search distribution `N(mu, Sigma)` over the parameter space.
#[derive(Debug, Clone)]
pub struct GaussianSearchDistribution {
    mu: DVector<f64>,
    sigma: SpdMatrix,
}

impl GaussianSearchDistribution {
    pub fn new(mu: DVector<f64>, sigma: SpdMatrix) -> Result<Self, NgdError> {
        if mu.len() != sigma.dim() {
            return Err(NgdError::DimensionMismatch(mu.len(), sigma.dim()));
        }
        Ok(Self { mu, sigma })
    }

    /// Standard normal search distribution in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: DVector::zeros(dim),
            sigma: SpdMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }
}

/// How the per-iteration learning rates are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// `alpha_mu` and `alpha_sigma` are used directly as `nu_mu`, `nu_sigma`.
    Fixed,
    /// `nu = alpha / lambda_1(Sigma^{-1} dSigma)`, which keeps
    /// `nu * lambda_1` pinned at `alpha` on every step.
    Adaptive,
}

/// Learning-rate schedule shared by the closed-form and Monte-Carlo steps.
#[derive(Debug, Clone)]
pub struct LearningRateSchedule {
    pub mode: ScheduleMode,
    /// Mean learning-rate constant, in `(0, 1]`.
    pub alpha_mu: f64,
    /// Covariance learning-rate constant, in `(0, 1/2]`.
    pub alpha_sigma: f64,
    /// Whether the positivity guard may shorten `nu_sigma`.
    pub guard_enabled: bool,
    /// Safety factor applied to the positivity bound `1 / lambda_1`.
    pub guard_safety: f64,
}

impl LearningRateSchedule {
    pub fn fixed(nu_mu: f64, nu_sigma: f64) -> Self {
        Self {
            mode: ScheduleMode::Fixed,
            alpha_mu: nu_mu,
            alpha_sigma: nu_sigma,
            guard_enabled: true,
            guard_safety: 0.5,
        }
    }

    pub fn adaptive(alpha_mu: f64, alpha_sigma: f64) -> Self {
        Self {
            mode: ScheduleMode::Adaptive,
            alpha_mu,
            alpha_sigma,
            guard_enabled: true,
            guard_safety: 0.5,
        }
    }

    pub fn without_guard(mut self) -> Self {
        self.guard_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<(), NgdError> {
        if !(self.alpha_mu > 0.0 && self.alpha_mu <= 1.0) {
            return Err(NgdError::InvalidSchedule(format!(
                "alpha_mu must lie in (0, 1], got {}",
                self.alpha_mu
            )));
        }
        if !(self.alpha_sigma > 0.0 && self.alpha_sigma <= 0.5) {
            return Err(NgdError::InvalidSchedule(format!(
                "alpha_sigma must lie in (0, 1/2], got {}",
                self.alpha_sigma
            )));
        }
        if !(self.guard_safety > 0.0 && self.guard_safety < 1.0) {
            return Err(NgdError::InvalidSchedule(format!(
                "guard_safety must lie in (0, 1), got {}",
                self.guard_safety
            )));
        }
        Ok(())
    }

    /// Learning rates for a step whose covariance gradient has top eigenvalue
    /// `lambda1` in the `Sigma^{-1} dSigma` metric. When no positive
    /// curvature exists (`lambda1 <= 0`) the adaptive rule has nothing to
    /// normalize by and falls back to the raw constants.
    pub(crate) fn rates(&self, lambda1: f64) -> (f64, f64) {
        match self.mode {
            ScheduleMode::Fixed => (self.alpha_mu, self.alpha_sigma),
            ScheduleMode::Adaptive => {
                if lambda1 > f64::MIN_POSITIVE {
                    (self.alpha_mu / lambda1, self.alpha_sigma / lambda1)
                } else {
                    (self.alpha_mu, self.alpha_sigma)
                }
            }
        }
    }
}

/// Full optimizer loop state. Identical seed and configuration reproduce a
/// bit-identical iterate sequence.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub dist: GaussianSearchDistribution,
    pub iteration: u64,
    pub rng_seed: u64,
    pub population: usize,
    pub schedule: LearningRateSchedule,
}

/// Default population size, `4 + floor(3 ln d) * 4`.
pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize * 4
}

/// RNG for one population draw, derived from the run seed and the iteration
/// counter so any iteration can be reproduced in isolation.
pub fn population_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}
