//! Information-geometric optimization of Gaussian search distributions, plus
//! the application stack it was built for: a two-latent state-space price
//! forecaster and a trend-following trading harness whose model and action
//! parameters are learned jointly from a Sharpe-based loss.
//!
//! The crate is organized as a library first; see the `examples/` directory
//! for one runnable program per capability and `src/main.rs` for the thin
//! command-line front end (`bench`, `optimize`, `fit-em`, `backtest`,
//! `gen-data`).
//!
//! Module map:
//!
//! - [`matrix`]: dense SPD matrix kernels (eigen, square root, condition
//!   numbers) shared by everything else.
//! - [`ngd`]: the natural-gradient descent engine, in closed form for
//!   analytic objectives and as a rank-based Monte-Carlo scheme for black-box
//!   objectives.
//! - [`objectives`]: analytic benchmark objectives, chiefly the convex
//!   quadratic with its closed-form loss, utility and exact natural gradient.
//! - [`ssm`]: the two-latent-variable state-space model, one-step Kalman
//!   forecasting and an EM baseline fitter.
//! - [`strategy`]: signal generation, trade simulation with profit target and
//!   stop loss, performance metrics and the joint loss.
//! - [`data`]: OHLC bar ingestion, synthetic series generation and splits.
//! - [`config`] / [`commands`]: reproducible run configuration and the
//!   command implementations behind the CLI.

pub mod commands;
pub mod config;
pub mod data;
pub mod matrix;
pub mod ngd;
pub mod objectives;
pub mod ssm;
pub mod strategy;

pub use matrix::SpdMatrix;
pub use ngd::{GaussianSearchDistribution, LearningRateSchedule, OptimizerState, ScheduleMode};
