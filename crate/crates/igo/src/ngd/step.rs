//! Single natural-gradient update steps.

use super::loss::{estimate_loss, LossEstimates};
use super::runner::Objective;
use super::{population_rng, GaussianSearchDistribution, NgdError, OptimizerState};
use crate::matrix::{spd_inv_sqrt, spd_sqrt, sym_eigen, symmetrize, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

/// Learning rates actually applied by a step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub nu_mu: f64,
    pub nu_sigma: f64,
    /// Top eigenvalue of `Sigma^{-1/2} dSigma Sigma^{-1/2}` (equivalently of
    /// `Sigma^{-1} dSigma`).
    pub lambda1: f64,
}

/// Per-step diagnostics of the Monte-Carlo step.
#[derive(Debug, Clone)]
pub struct McStepDiagnostics {
    /// Best (smallest) objective value seen in the population.
    pub best_f: f64,
    /// Candidates whose objective came back non-finite; they were ranked
    /// worst instead of aborting the step.
    pub non_finite: usize,
    pub info: StepInfo,
}

/// Draws the population for the state's current iteration.
///
/// Returns the standardized draws `z_i` and the candidates
/// `x_i = mu + sqrt(Sigma) z_i`, where `sqrt(Sigma)` is the symmetric SPD
/// square root. The sequence is a pure function of `(rng_seed, iteration)`.
pub fn sample_population(
    state: &OptimizerState,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>), NgdError> {
    if state.population == 0 {
        return Err(NgdError::EmptyPopulation);
    }
    let d = state.dist.dim();
    let root = spd_sqrt(state.dist.sigma());
    let mut rng = population_rng(state.rng_seed, state.iteration);
    let mut zs = Vec::with_capacity(state.population);
    let mut xs = Vec::with_capacity(state.population);
    for _ in 0..state.population {
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let x = state.dist.mu() + root.as_matrix() * &z;
        zs.push(z);
        xs.push(x);
    }
    Ok((zs, xs))
}

/// Monte-Carlo estimate of the natural gradient from weighted recombination.
///
/// `delta_mu = 1/n sum_i w_i (x_i - mu)` and
/// `delta_sigma = 1/n sum_i w_i ((x_i - mu)(x_i - mu)^T - Sigma)` with
/// `w_i = Lhat(x_i)^(2/d)`. Sums run in index order so the result does not
/// depend on evaluation scheduling; `delta_sigma` is exactly symmetric by
/// construction.
pub fn mc_natural_gradient(
    x: &[DVector<f64>],
    loss: &LossEstimates,
    dist: &GaussianSearchDistribution,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = dist.dim();
    let n = x.len();
    assert_eq!(n, loss.len(), "one loss estimate per candidate");
    let weights = loss.weights(d);

    let mut delta_mu = DVector::zeros(d);
    let mut outer_sum = DMatrix::zeros(d, d);
    let mut weight_sum = 0.0;
    for (xi, &w) in x.iter().zip(&weights) {
        let v = xi - dist.mu();
        delta_mu.axpy(w, &v, 1.0);
        // Upper triangle of w * v v^T; mirrored below, which is exact because
        // v_i * v_j = v_j * v_i in floating point.
        for i in 0..d {
            for j in i..d {
                outer_sum[(i, j)] += w * v[i] * v[j];
            }
        }
        weight_sum += w;
    }
    for i in 0..d {
        for j in 0..i {
            outer_sum[(i, j)] = outer_sum[(j, i)];
        }
    }
    let inv_n = 1.0 / n as f64;
    delta_mu *= inv_n;
    let delta_sigma = (outer_sum - dist.sigma().as_matrix() * weight_sum) * inv_n;
    (delta_mu, delta_sigma)
}

/// Caps `nu_sigma` below the positivity bound.
///
/// With `lambda1` the top eigenvalue of `Sigma^{-1/2} dSigma Sigma^{-1/2}`,
/// the update keeps the covariance positive definite iff
/// `nu_sigma < 1 / lambda1`. Returns `min(nu_sigma, safety / lambda1)` when
/// `lambda1 > 0`; when no eigenvalue is positive there is no bound and
/// `nu_sigma` passes through unchanged.
pub fn positivity_guard(
    sigma: &SpdMatrix,
    nu_sigma: f64,
    delta_sigma: &DMatrix<f64>,
    safety: f64,
) -> Result<f64, NgdError> {
    let lambda1 = gradient_lambda1(sigma, delta_sigma)?;
    Ok(guard_with_lambda1(nu_sigma, lambda1, safety))
}

pub(super) fn guard_with_lambda1(nu_sigma: f64, lambda1: f64, safety: f64) -> f64 {
    if lambda1 > 0.0 {
        nu_sigma.min(safety / lambda1)
    } else {
        nu_sigma
    }
}

/// Top eigenvalue of the symmetrized gradient `Sigma^{-1/2} dSigma Sigma^{-1/2}`.
pub(super) fn gradient_lambda1(
    sigma: &SpdMatrix,
    delta_sigma: &DMatrix<f64>,
) -> Result<f64, NgdError> {
    let inv_root = spd_inv_sqrt(sigma);
    let sandwich = symmetrize(&(inv_root.as_matrix() * delta_sigma * inv_root.as_matrix()));
    let (values, _) = sym_eigen(&sandwich)?;
    Ok(values[0])
}

fn apply_update(
    dist: &GaussianSearchDistribution,
    delta_mu: &DVector<f64>,
    delta_sigma: &DMatrix<f64>,
    nu_mu: f64,
    nu_sigma: f64,
) -> Result<GaussianSearchDistribution, NgdError> {
    let mu = dist.mu() - delta_mu * nu_mu;
    let sigma_raw = dist.sigma().as_matrix() - delta_sigma * nu_sigma;
    let sigma = SpdMatrix::from_symmetrized(sigma_raw).map_err(|_| NgdError::StepRejected)?;
    GaussianSearchDistribution::new(mu, sigma)
}

/// Closed-form natural-gradient step with exact gradient terms.
pub fn cf_ngd_step(
    dist: &GaussianSearchDistribution,
    delta_mu: &DVector<f64>,
    delta_sigma: &DMatrix<f64>,
    schedule: &super::LearningRateSchedule,
) -> Result<(GaussianSearchDistribution, StepInfo), NgdError> {
    schedule.validate()?;
    let lambda1 = gradient_lambda1(dist.sigma(), delta_sigma)?;
    let (nu_mu, mut nu_sigma) = schedule.rates(lambda1);
    if schedule.guard_enabled {
        nu_sigma = guard_with_lambda1(nu_sigma, lambda1, schedule.guard_safety);
    }
    let next = apply_update(dist, delta_mu, delta_sigma, nu_mu, nu_sigma)?;
    Ok((
        next,
        StepInfo {
            nu_mu,
            nu_sigma,
            lambda1,
        },
    ))
}

/// One Monte-Carlo natural-gradient iteration: sample, evaluate, estimate the
/// gradient and update. Candidates with non-finite objective values are
/// ranked worst rather than aborting.
pub fn mc_ngd_step<O: Objective + ?Sized>(
    state: &OptimizerState,
    objective: &O,
) -> Result<(OptimizerState, McStepDiagnostics), NgdError> {
    state.schedule.validate()?;
    let (zs, xs) = sample_population(state)?;
    let raw = objective.evaluate_population(&xs);
    let mut non_finite = 0;
    let f_values: Vec<f64> = raw
        .into_iter()
        .map(|f| {
            if f.is_finite() {
                f
            } else {
                non_finite += 1;
                f64::INFINITY
            }
        })
        .collect();
    let best_f = f_values.iter().copied().fold(f64::INFINITY, f64::min);

    let loss = estimate_loss(&f_values, &zs, state.dist.sigma())?;
    let (delta_mu, delta_sigma) = mc_natural_gradient(&xs, &loss, &state.dist);

    let lambda1 = gradient_lambda1(state.dist.sigma(), &delta_sigma)?;
    let (nu_mu, mut nu_sigma) = state.schedule.rates(lambda1);
    if state.schedule.guard_enabled {
        nu_sigma = guard_with_lambda1(nu_sigma, lambda1, state.schedule.guard_safety);
    }
    let dist = apply_update(&state.dist, &delta_mu, &delta_sigma, nu_mu, nu_sigma)?;

    let next = OptimizerState {
        dist,
        iteration: state.iteration + 1,
        rng_seed: state.rng_seed,
        population: state.population,
        schedule: state.schedule.clone(),
    };
    Ok((
        next,
        McStepDiagnostics {
            best_f,
            non_finite,
            info: StepInfo {
                nu_mu,
                nu_sigma,
                lambda1,
            },
        },
    ))
}
