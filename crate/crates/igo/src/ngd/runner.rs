//! Optimizer loops and trace emission.

use super::step::{cf_ngd_step, mc_ngd_step, StepInfo};
use super::{GaussianSearchDistribution, LearningRateSchedule, NgdError, OptimizerState};
use crate::matrix::{condition_product, frobenius_norm, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// A black-box objective. Population evaluation defaults to a sequential
/// map; implementations may evaluate concurrently as long as the objective
/// is a pure function of its input, since the reduction downstream uses a
/// fixed index order either way.
pub trait Objective: Sync {
    fn evaluate(&self, x: &DVector<f64>) -> f64;

    fn evaluate_population(&self, xs: &[DVector<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<F> Objective for F
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    fn evaluate(&self, x: &DVector<f64>) -> f64 {
        self(x)
    }
}

/// Configuration of a Monte-Carlo optimizer run.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub population: usize,
    pub max_iterations: usize,
    /// Stop once `||Sigma||_F` falls below this.
    pub sigma_tolerance: f64,
    pub schedule: LearningRateSchedule,
    /// When given, every trace row carries `Cond(Sigma * H)` against this
    /// reference matrix.
    pub cond_reference: Option<SpdMatrix>,
}

impl OptimizerConfig {
    pub fn new(seed: u64, population: usize, max_iterations: usize) -> Self {
        Self {
            seed,
            population,
            max_iterations,
            sigma_tolerance: 0.0,
            schedule: LearningRateSchedule::adaptive(0.5, 0.25),
            cond_reference: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: u64,
    pub best_f: f64,
    pub norm_mu: f64,
    pub frobenius_sigma: f64,
    pub cond_sigma_h: Option<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug)]
pub struct OptimizerTrace {
    pub rows: Vec<TraceRow>,
    pub final_state: OptimizerState,
}

impl OptimizerTrace {
    /// Writes `iteration,best_f,norm_mu,frobenius_sigma,cond_sigma_h` plus
    /// flattened `mu` columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.final_state.dist.dim();
        write!(w, "iteration,best_f,norm_mu,frobenius_sigma,cond_sigma_h")?;
        for i in 0..dim {
            write!(w, ",mu_{i}")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            write!(
                w,
                "{},{},{},{},{}",
                row.iteration,
                row.best_f,
                row.norm_mu,
                row.frobenius_sigma,
                row.cond_sigma_h.map(|c| c.to_string()).unwrap_or_default()
            )?;
            for v in &row.mu {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn trace_row(
    state: &OptimizerState,
    best_f: f64,
    cond_reference: Option<&SpdMatrix>,
) -> Result<TraceRow, NgdError> {
    let cond = match cond_reference {
        Some(h) => Some(condition_product(state.dist.sigma(), h)?),
        None => None,
    };
    Ok(TraceRow {
        iteration: state.iteration,
        best_f,
        norm_mu: state.dist.mu().norm(),
        frobenius_sigma: frobenius_norm(state.dist.sigma().as_matrix()),
        cond_sigma_h: cond,
        mu: state.dist.mu().iter().copied().collect(),
    })
}

/// Runs the Monte-Carlo natural-gradient loop until the iteration budget is
/// exhausted or the covariance norm drops below tolerance. The trace starts
/// with a row for the initial state (its `best_f` is the objective at the
/// initial mean) followed by one row per iteration.
pub fn run_optimizer<O: Objective + ?Sized>(
    initial: GaussianSearchDistribution,
    config: &OptimizerConfig,
    objective: &O,
) -> Result<OptimizerTrace, NgdError> {
    config.schedule.validate()?;
    let mut state = OptimizerState {
        dist: initial,
        iteration: 0,
        rng_seed: config.seed,
        population: config.population,
        schedule: config.schedule.clone(),
    };
    let mut rows = Vec::with_capacity(config.max_iterations + 1);
    let f0 = objective.evaluate(state.dist.mu());
    rows.push(trace_row(&state, f0, config.cond_reference.as_ref())?);

    while state.iteration < config.max_iterations as u64
        && frobenius_norm(state.dist.sigma().as_matrix()) >= config.sigma_tolerance
    {
        let (next, diag) = mc_ngd_step(&state, objective)?;
        state = next;
        rows.push(trace_row(&state, diag.best_f, config.cond_reference.as_ref())?);
    }
    Ok(OptimizerTrace {
        rows,
        final_state: state,
    })
}

/// One row of a closed-form run trace (state after the step plus the rates
/// the step used).
#[derive(Debug, Clone)]
pub struct CfRow {
    pub iteration: u64,
    pub norm_mu: f64,
    pub frobenius_sigma: f64,
    pub cond_sigma_h: Option<f64>,
    pub info: StepInfo,
}

#[derive(Debug)]
pub struct CfTrace {
    pub rows: Vec<CfRow>,
    pub final_dist: GaussianSearchDistribution,
}

/// Runs the closed-form loop for `iterations` steps, with exact gradient
/// terms supplied by `gradient`. Emits one row per completed step.
pub fn run_cf<G>(
    initial: GaussianSearchDistribution,
    gradient: G,
    schedule: &LearningRateSchedule,
    iterations: usize,
    cond_reference: Option<&SpdMatrix>,
) -> Result<CfTrace, NgdError>
where
    G: Fn(&GaussianSearchDistribution) -> (DVector<f64>, DMatrix<f64>),
{
    schedule.validate()?;
    let mut dist = initial;
    let mut rows = Vec::with_capacity(iterations);
    for iteration in 1..=iterations {
        let (delta_mu, delta_sigma) = gradient(&dist);
        let (next, info) = cf_ngd_step(&dist, &delta_mu, &delta_sigma, schedule)?;
        dist = next;
        let cond = match cond_reference {
            Some(h) => Some(condition_product(dist.sigma(), h)?),
            None => None,
        };
        rows.push(CfRow {
            iteration: iteration as u64,
            norm_mu: dist.mu().norm(),
            frobenius_sigma: frobenius_norm(dist.sigma().as_matrix()),
            cond_sigma_h: cond,
            info,
        });
    }
    Ok(CfTrace {
        rows,
        final_dist: dist,
    })
}
