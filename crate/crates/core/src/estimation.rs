//! Estimation of the four estimands `β̄`, `γ`, `S̄(t_i)` and `H(t_i)` from a
//! train window.
//!
//! Three routes are offered:
//!
//! * [`fit_sequential`]: `H(t_i)` read from the data, `γ` from a closed-form
//!   estimator, then Nelder-Mead over `(β̄, S̄(t_i))`;
//! * [`fit_joint4d`]: Nelder-Mead over all four estimands, seeded by the
//!   sequential fit;
//! * [`estimate_closed_form`]: a one-day finite-difference estimate of `β̄`
//!   and `S̄`, kept as a diagnostic.
//!
//! Flow alignment: model flows `E(t)`, `L(t)` are evaluated at the left end of
//! each Euler step, so they exist for `t` in `[t_i, t_c - 1]` and are compared
//! with the observed flows of the same day. Flows on series day 0 are never
//! read.

use core::fmt;

use thiserror::Error;

use crate::model::{simulate_from, ModelError, SHParams, SHState, Trajectory};
use crate::optimizer::{nelder_mead, OptimizeError, SimplexConfig, SolveReport};
use crate::series::ObservedSeries;

/// Initial guess `(β̄, S̄(t_i))` for the sequential fit.
pub const DEFAULT_GUESS: (f64, f64) = (1e-5, 1e4);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("window [{t_i}, {t_c}] must span at least 3 days")]
    WindowTooShort { t_i: usize, t_c: usize },
    #[error("window [{t_i}, {t_c}] exceeds a series of {len} days")]
    WindowOutOfRange { t_i: usize, t_c: usize, len: usize },
    #[error("degenerate window: {0} is zero")]
    DegenerateWindow(&'static str),
    #[error("loss weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error("closed-form estimate needs day {t} and {t}+1 inside a series of {len} days")]
    DayOutOfRange { t: usize, len: usize },
    #[error("closed-form estimate divides by zero: {0} is zero on day {1}")]
    DivisionByZero(&'static str, usize),
    #[error("solver returned an inadmissible point")]
    Inadmissible,
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Closed train window `[t_i, t_c]` in day indices from the series start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Window {
    pub t_i: usize,
    pub t_c: usize,
}

impl Window {
    pub fn new(t_i: usize, t_c: usize) -> Result<Self, EstimationError> {
        if t_c < t_i + 2 {
            return Err(EstimationError::WindowTooShort { t_i, t_c });
        }
        Ok(Self { t_i, t_c })
    }

    /// Number of days in the window.
    pub fn len(&self) -> usize {
        self.t_c - self.t_i + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check(&self, series: &ObservedSeries) -> Result<(), EstimationError> {
        if self.t_c < self.t_i + 2 {
            return Err(EstimationError::WindowTooShort {
                t_i: self.t_i,
                t_c: self.t_c,
            });
        }
        if self.t_c >= series.len() {
            return Err(EstimationError::WindowOutOfRange {
                t_i: self.t_i,
                t_c: self.t_c,
                len: series.len(),
            });
        }
        Ok(())
    }

    /// Whole series as one window.
    pub fn whole(series: &ObservedSeries) -> Result<Self, EstimationError> {
        Self::new(0, series.len().saturating_sub(1))
    }

    /// Days in `[t_i, t_c]` whose observed flows are defined.
    fn flow_days(&self) -> core::ops::RangeInclusive<usize> {
        self.t_i.max(1)..=self.t_c
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.t_i, self.t_c)
    }
}

/// Coefficients `c_H`, `c_E`, `c_L` of the squared-error terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub c_h: f64,
    pub c_e: f64,
    pub c_l: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            c_h: 1.0,
            c_e: 1.0,
            c_l: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(c_h: f64, c_e: f64, c_l: f64) -> Result<Self, EstimationError> {
        let w = Self { c_h, c_e, c_l };
        w.validate()?;
        Ok(w)
    }

    /// Census term only.
    pub fn census_only() -> Self {
        Self {
            c_h: 1.0,
            c_e: 0.0,
            c_l: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let all = [self.c_h, self.c_e, self.c_l];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) || all.iter().all(|c| *c == 0.0) {
            return Err(EstimationError::InvalidWeights);
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            c_h: k * self.c_h,
            c_e: k * self.c_e,
            c_l: k * self.c_l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Sequential,
    Joint4d,
    ClosedForm,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::Sequential => "sequential",
            FitMethod::Joint4d => "joint4d",
            FitMethod::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaEstimator {
    #[default]
    RatioOfMeans,
    LeastSquares,
}

impl GammaEstimator {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaEstimator::RatioOfMeans => "ratio_of_means",
            GammaEstimator::LeastSquares => "least_squares",
        }
    }

    pub fn estimate(self, series: &ObservedSeries, window: Window) -> Result<f64, EstimationError> {
        match self {
            GammaEstimator::RatioOfMeans => estimate_gamma_ratio_of_means(series, window),
            GammaEstimator::LeastSquares => estimate_gamma_least_squares(series, window),
        }
    }
}

/// Settings shared by the fitting routes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub weights: LossWeights,
    pub gamma_estimator: GammaEstimator,
    pub simplex: SimplexConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub window: Window,
    pub params: SHParams,
    /// State at `t_i`.
    pub initial: SHState,
    pub phi_star: f64,
    pub method: FitMethod,
    pub gamma_estimator: GammaEstimator,
    pub weights: LossWeights,
    pub solver: SolveReport,
    /// Model run over the window, `states[k]` at day `t_i + k`.
    pub fitted: Trajectory,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.solver.converged
    }

    /// Objective re-evaluated at the stored estimands.
    pub fn recompute_objective(&self, series: &ObservedSeries) -> f64 {
        objective_phi(
            self.params.beta_bar,
            self.initial.s_bar,
            self.params.gamma,
            self.initial.h,
            series,
            self.window,
            &self.weights,
        )
    }
}

/// `H(t_i)`, taken verbatim from the series.
pub fn estimate_h0(series: &ObservedSeries, window: Window) -> Result<f64, EstimationError> {
    window.check(series)?;
    Ok(series.h()[window.t_i])
}

/// `Σ l / Σ h` over the window.
pub fn estimate_gamma_ratio_of_means(
    series: &ObservedSeries,
    window: Window,
) -> Result<f64, EstimationError> {
    window.check(series)?;
    let mut sum_l = 0.0;
    let mut sum_h = 0.0;
    for t in window.flow_days() {
        sum_l += series.l()[t];
        sum_h += series.h()[t];
    }
    if sum_h == 0.0 {
        return Err(EstimationError::DegenerateWindow("sum of H"));
    }
    Ok(sum_l / sum_h)
}

/// Least-squares slope of `l` on `h` through the origin: `Σ l h / Σ h²`.
pub fn estimate_gamma_least_squares(
    series: &ObservedSeries,
    window: Window,
) -> Result<f64, EstimationError> {
    window.check(series)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for t in window.flow_days() {
        num += series.l()[t] * series.h()[t];
        den += series.h()[t] * series.h()[t];
    }
    if den == 0.0 {
        return Err(EstimationError::DegenerateWindow("sum of H squared"));
    }
    Ok(num / den)
}

/// Weighted sum of squared errors between the simulated and observed
/// census, admissions and discharges on the window.
///
/// Returns `+inf` for inadmissible estimands (negative `β̄`, `S̄`, `H`, or `γ`
/// outside `[0, 1]`) and for simulations that leave the finite range.
pub fn objective_phi(
    beta_bar: f64,
    s_bar_0: f64,
    gamma: f64,
    h0: f64,
    series: &ObservedSeries,
    window: Window,
    weights: &LossWeights,
) -> f64 {
    if window.check(series).is_err() {
        return f64::INFINITY;
    }
    if !(s_bar_0 >= 0.0 && h0 >= 0.0 && s_bar_0.is_finite() && h0.is_finite()) {
        return f64::INFINITY;
    }
    let Ok(params) = SHParams::new(beta_bar, gamma) else {
        return f64::INFINITY;
    };
    let days = window.t_c - window.t_i;
    let Ok(traj) = simulate_from(window.t_i, SHState::new(s_bar_0, h0), &params, days) else {
        return f64::INFINITY;
    };
    residual_sum(&traj, series, window, weights)
}

fn residual_sum(
    traj: &Trajectory,
    series: &ObservedSeries,
    window: Window,
    weights: &LossWeights,
) -> f64 {
    let (h_o, e_o, l_o) = (series.h(), series.e(), series.l());
    let mut sum_h = 0.0;
    for (k, state) in traj.states.iter().enumerate() {
        let r = state.h - h_o[window.t_i + k];
        sum_h += r * r;
    }
    let mut sum_e = 0.0;
    let mut sum_l = 0.0;
    for t in window.t_i.max(1)..window.t_c {
        let k = t - window.t_i;
        let re = traj.admissions[k] - e_o[t];
        let rl = traj.discharges[k] - l_o[t];
        sum_e += re * re;
        sum_l += rl * rl;
    }
    let phi = weights.c_h * sum_h + weights.c_e * sum_e + weights.c_l * sum_l;
    if phi.is_finite() {
        phi
    } else {
        f64::INFINITY
    }
}

/// `H(t_i)` from the data, `γ` from the selected estimator, then Nelder-Mead
/// over `(β̄, S̄(t_i))` from `guess`.
///
/// A solver that stops on a cap still yields a result, flagged through
/// `solver.converged`.
pub fn fit_sequential(
    series: &ObservedSeries,
    window: Window,
    options: &FitOptions,
    guess: (f64, f64),
) -> Result<FitResult, EstimationError> {
    options.weights.validate()?;
    let h0 = estimate_h0(series, window)?;
    let gamma = options.gamma_estimator.estimate(series, window)?;
    let weights = options.weights;
    let report = nelder_mead(
        |x: &[f64]| objective_phi(x[0], x[1], gamma, h0, series, window, &weights),
        &[guess.0, guess.1],
        &options.simplex,
    )?;
    let (beta_bar, s_bar) = (report.x_min[0], report.x_min[1]);
    package(
        window,
        options,
        FitMethod::Sequential,
        [beta_bar, s_bar, gamma, h0],
        report,
    )
}

/// Nelder-Mead over `(β̄, S̄(t_i), γ, H(t_i))`.
///
/// Without a guess the sequential fit seeds the solver, so the returned
/// objective never exceeds the sequential one.
pub fn fit_joint4d(
    series: &ObservedSeries,
    window: Window,
    options: &FitOptions,
    guess: Option<[f64; 4]>,
) -> Result<FitResult, EstimationError> {
    options.weights.validate()?;
    window.check(series)?;
    let seed = match guess {
        Some(g) => g,
        None => {
            let seq = fit_sequential(series, window, options, DEFAULT_GUESS)?;
            [
                seq.params.beta_bar,
                seq.initial.s_bar,
                seq.params.gamma,
                seq.initial.h,
            ]
        }
    };
    let weights = options.weights;
    let report = nelder_mead(
        |x: &[f64]| objective_phi(x[0], x[1], x[2], x[3], series, window, &weights),
        &seed,
        &options.simplex,
    )?;
    let x = [
        report.x_min[0],
        report.x_min[1],
        report.x_min[2],
        report.x_min[3],
    ];
    package(window, options, FitMethod::Joint4d, x, report)
}

fn package(
    window: Window,
    options: &FitOptions,
    method: FitMethod,
    [beta_bar, s_bar, gamma, h0]: [f64; 4],
    solver: SolveReport,
) -> Result<FitResult, EstimationError> {
    let params = SHParams::new(beta_bar, gamma).map_err(|_| EstimationError::Inadmissible)?;
    if !(s_bar >= 0.0 && h0 >= 0.0) {
        return Err(EstimationError::Inadmissible);
    }
    let initial = SHState::new(s_bar, h0);
    let fitted = simulate_from(window.t_i, initial, &params, window.t_c - window.t_i)?;
    Ok(FitResult {
        window,
        params,
        initial,
        phi_star: solver.f_min,
        method,
        gamma_estimator: options.gamma_estimator,
        weights: options.weights,
        solver,
        fitted,
    })
}

/// Finite-difference estimate of `β̄` on day `t` and the matching `S̄(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormEstimate {
    pub beta_bar: f64,
    pub s_bar: f64,
    /// Set when `β̄ <= 0`, which no admissible model can produce.
    pub non_positive_beta: bool,
}

/// `β̄ = (h(t+1) - h(t)) / h(t)² - (e(t+1) - e(t)) / (e(t) h(t))` and
/// `S̄(t) = e(t) / (β̄ h(t))`.
pub fn estimate_closed_form(
    series: &ObservedSeries,
    t: usize,
) -> Result<ClosedFormEstimate, EstimationError> {
    if t + 1 >= series.len() {
        return Err(EstimationError::DayOutOfRange {
            t,
            len: series.len(),
        });
    }
    let (h, e) = (series.h(), series.e());
    if h[t] == 0.0 {
        return Err(EstimationError::DivisionByZero("H", t));
    }
    if e[t] == 0.0 {
        return Err(EstimationError::DivisionByZero("E", t));
    }
    let beta_bar = (h[t + 1] - h[t]) / (h[t] * h[t]) - (e[t + 1] - e[t]) / (e[t] * h[t]);
    Ok(ClosedFormEstimate {
        beta_bar,
        s_bar: e[t] / (beta_bar * h[t]),
        non_positive_beta: beta_bar.is_nan() || beta_bar <= 0.0,
    })
}
