//! Core of the SH hospitalization model.
//!
//! The SH model is a two-compartment reduction of SIR in which `S̄` is a
//! scaled susceptible pool and `H` is the hospital census:
//!
//! ```text
//! S̄(t+1) = S̄(t) - β̄ S̄(t) H(t)
//! H(t+1) = H(t) + β̄ S̄(t) H(t) - γ H(t)
//! ```
//!
//! This crate holds everything that does not touch the filesystem: series
//! reconciliation, the one-day Euler integrator, a Nelder-Mead minimizer,
//! the estimators for `(β̄, γ, S̄(t_i), H(t_i))`, and train/test backtesting.
//! It is `no_std` and only needs `alloc`.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod backtest;
pub mod estimation;
mod math;
pub mod model;
pub mod optimizer;
pub mod series;

pub use backtest::{
    backtest_sweep, contour_grid, fit_window, forecast, mape, sweep_window_count, AxisSpec,
    BacktestError, BacktestReport, ContourGrid, ForecastResult, Mape, SweepConfig, WindowOutcome,
    WindowRecord,
};
pub use estimation::{
    estimate_closed_form, estimate_gamma_least_squares, estimate_gamma_ratio_of_means, estimate_h0,
    fit_joint4d, fit_sequential, objective_phi, ClosedFormEstimate, EstimationError, FitMethod,
    FitOptions, FitResult, GammaEstimator, LossWeights, Window, DEFAULT_GUESS,
};
pub use model::{
    euler_step, simulate, threshold_diagnostic, Growth, ModelError, SHParams, SHState, Trajectory,
};
pub use optimizer::{
    nelder_mead, nelder_mead_observed, OptimizeError, SimplexConfig, SolveReport, TerminationReason,
};
pub use series::{
    aggregate_national, reconcile_flows, DataError, ObservedSeries, RawCounts, RawRecord,
    RawRecordSet, Schema,
};
