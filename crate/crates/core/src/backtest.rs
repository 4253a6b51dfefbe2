//! Train/test evaluation: forecasts past the train window, MAPE, sliding
//! window sweeps and contour grids of the two-parameter objective.

use alloc::vec::Vec;

use thiserror::Error;

use crate::estimation::{
    estimate_h0, fit_joint4d, fit_sequential, objective_phi, EstimationError, FitMethod,
    FitOptions, FitResult, GammaEstimator, LossWeights, Window, DEFAULT_GUESS,
};
use crate::math::ln;
use crate::model::{simulate_from, ModelError, Trajectory};
use crate::series::ObservedSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BacktestError {
    #[error("arrays differ in length ({predicted} predicted, {observed} observed)")]
    LengthMismatch { predicted: usize, observed: usize },
    #[error("no points to score")]
    NoPoints,
    #[error("MAPE undefined: every observation is zero")]
    UndefinedMetric,
    #[error("forecast end {until} must lie after the train window end {t_c}")]
    HorizonBeforeWindow { until: usize, t_c: usize },
    #[error("no window of {window_length} days fits a series of {len} days with a test day")]
    NoWindows { window_length: usize, len: usize },
    #[error("stride {stride} is not in 1..={len}")]
    InvalidStride { stride: usize, len: usize },
    #[error("grid axis needs min < max and at least 2 points")]
    InvalidAxis,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Mean absolute percentage error, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub percent: f64,
    /// Points that entered the mean.
    pub included: usize,
    /// Points skipped because the observation was not positive.
    pub excluded: usize,
}

/// `100 / n' * Σ |pred - obs| / obs` over points with `obs > 0`.
pub fn mape(predicted: &[f64], observed: &[f64]) -> Result<Mape, BacktestError> {
    if predicted.len() != observed.len() {
        return Err(BacktestError::LengthMismatch {
            predicted: predicted.len(),
            observed: observed.len(),
        });
    }
    if observed.is_empty() {
        return Err(BacktestError::NoPoints);
    }
    let mut total = 0.0;
    let mut included = 0;
    for (p, o) in predicted.iter().zip(observed) {
        if *o > 0.0 {
            total += (p - o).abs() / o;
            included += 1;
        }
    }
    if included == 0 {
        return Err(BacktestError::UndefinedMetric);
    }
    Ok(Mape {
        percent: 100.0 * total / included as f64,
        included,
        excluded: observed.len() - included,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub fit: FitResult,
    /// Days predicted after `t_c`.
    pub horizon: usize,
    /// Census over `t_c + 1 ..= t_c + horizon`.
    pub predicted_h: Vec<f64>,
    pub predicted_s_bar: Vec<f64>,
    pub train_mape: Mape,
    /// `None` when the forecast starts past the last observation.
    pub test_mape: Option<Mape>,
    /// Model run from `t_i` through the forecast end.
    pub model: Trajectory,
}

impl ForecastResult {
    /// Last day index of the forecast.
    pub fn until(&self) -> usize {
        self.fit.window.t_c + self.horizon
    }
}

/// Runs the fitted model from `t_i` through day `until` and scores it.
///
/// Train MAPE is taken on `[t_i, t_c]`, test MAPE on the observed part of
/// `(t_c, until]`.
pub fn forecast(
    series: &ObservedSeries,
    fit: &FitResult,
    until: usize,
) -> Result<ForecastResult, BacktestError> {
    let window = fit.window;
    if until <= window.t_c {
        return Err(BacktestError::HorizonBeforeWindow {
            until,
            t_c: window.t_c,
        });
    }
    let model = simulate_from(window.t_i, fit.initial, &fit.params, until - window.t_i)?;
    let h_model: Vec<f64> = model.h().collect();
    let s_model: Vec<f64> = model.s_bar().collect();
    let split = window.t_c - window.t_i + 1;

    let train_mape = mape(&h_model[..split], &series.h()[window.t_i..=window.t_c])?;
    let last_observed = series.len() - 1;
    let test_mape = if window.t_c < last_observed {
        let end = until.min(last_observed);
        let n = end - window.t_c;
        mape(
            &h_model[split..split + n],
            &series.h()[window.t_c + 1..=end],
        )
        .ok()
    } else {
        None
    };
    Ok(ForecastResult {
        fit: fit.clone(),
        horizon: until - window.t_c,
        predicted_h: h_model[split..].to_vec(),
        predicted_s_bar: s_model[split..].to_vec(),
        train_mape,
        test_mape,
        model,
    })
}

/// Fit with the chosen method and default guesses.
pub fn fit_window(
    series: &ObservedSeries,
    window: Window,
    method: FitMethod,
    options: &FitOptions,
) -> Result<FitResult, EstimationError> {
    match method {
        FitMethod::Joint4d => fit_joint4d(series, window, options, None),
        _ => fit_sequential(series, window, options, DEFAULT_GUESS),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub window_length: usize,
    pub stride: usize,
    pub method: FitMethod,
    pub options: FitOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            window_length: 14,
            stride: 1,
            method: FitMethod::Sequential,
            options: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutcome {
    Fitted(alloc::boxed::Box<ForecastResult>),
    Failed(BacktestError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub window: Window,
    pub outcome: WindowOutcome,
}

impl WindowRecord {
    pub fn forecast(&self) -> Option<&ForecastResult> {
        match &self.outcome {
            WindowOutcome::Fitted(f) => Some(f),
            WindowOutcome::Failed(_) => None,
        }
    }

    pub fn converged(&self) -> bool {
        self.forecast().is_some_and(|f| f.fit.converged())
    }

    pub fn test_mape(&self) -> Option<f64> {
        self.forecast()?.test_mape.map(|m| m.percent)
    }

    pub fn gamma(&self) -> Option<f64> {
        Some(self.forecast()?.fit.params.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub window_length: usize,
    pub stride: usize,
    /// Ordered by window start.
    pub records: Vec<WindowRecord>,
}

/// Number of windows a sweep produces: `floor((len - w - 1) / stride) + 1`
/// when at least one window leaves a test day, else 0.
pub fn sweep_window_count(len: usize, window_length: usize, stride: usize) -> usize {
    if stride == 0 || len < window_length + 1 {
        return 0;
    }
    (len - window_length - 1) / stride + 1
}

/// Fits every `window_length`-day window starting at `0, stride, 2 stride,
/// ...` that leaves at least one test day, and forecasts each to the series
/// end. Failed windows are kept as [`WindowOutcome::Failed`].
pub fn backtest_sweep(
    series: &ObservedSeries,
    config: &SweepConfig,
) -> Result<BacktestReport, BacktestError> {
    let len = series.len();
    if config.stride == 0 || config.stride > len {
        return Err(BacktestError::InvalidStride {
            stride: config.stride,
            len,
        });
    }
    let count = sweep_window_count(len, config.window_length, config.stride);
    if count == 0 || config.window_length < 3 {
        return Err(BacktestError::NoWindows {
            window_length: config.window_length,
            len,
        });
    }
    let records = (0..count)
        .map(|k| {
            let t_i = k * config.stride;
            let window = Window {
                t_i,
                t_c: t_i + config.window_length - 1,
            };
            let outcome = fit_window(series, window, config.method, &config.options)
                .map_err(BacktestError::from)
                .and_then(|fit| forecast(series, &fit, len - 1));
            WindowRecord {
                window,
                outcome: match outcome {
                    Ok(f) => WindowOutcome::Fitted(alloc::boxed::Box::new(f)),
                    Err(e) => WindowOutcome::Failed(e),
                },
            }
        })
        .collect();
    Ok(BacktestReport {
        window_length: config.window_length,
        stride: config.stride,
        records,
    })
}

/// Equispaced axis `min..=max` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self, BacktestError> {
        let a = Self { min, max, n };
        a.points()?;
        Ok(a)
    }

    pub fn points(&self) -> Result<Vec<f64>, BacktestError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max && self.n >= 2) {
            return Err(BacktestError::InvalidAxis);
        }
        let step = (self.max - self.min) / (self.n - 1) as f64;
        let mut pts: Vec<f64> = (0..self.n).map(|i| self.min + step * i as f64).collect();
        pts[self.n - 1] = self.max;
        if pts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BacktestError::InvalidAxis);
        }
        Ok(pts)
    }
}

/// `log(φ - shift·φ*)` on a `(β̄, S̄(t_i))` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub beta_axis: Vec<f64>,
    pub s_axis: Vec<f64>,
    /// Raw objective, row-major with one row per `β̄` value.
    pub phi: Vec<f64>,
    /// Transformed values; `None` marks masked cells.
    pub values: Vec<Option<f64>>,
    pub phi_star: f64,
    pub shift: f64,
    pub gamma: f64,
    pub h0: f64,
}

impl ContourGrid {
    pub fn value(&self, beta: usize, s: usize) -> Option<f64> {
        self.values[beta * self.s_axis.len() + s]
    }

    pub fn phi_at(&self, beta: usize, s: usize) -> f64 {
        self.phi[beta * self.s_axis.len() + s]
    }

    pub fn all_masked(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }

    /// Cell with the smallest unmasked value.
    pub fn argmin(&self) -> Option<(usize, usize)> {
        let cols = self.s_axis.len();
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in self.values.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((k, v));
                }
            }
        }
        best.map(|(k, _)| (k / cols, k % cols))
    }
}

/// Evaluates the sequential-path objective on a grid of `(β̄, S̄(t_i))`, with
/// `γ` and `H(t_i)` estimated from the window.
///
/// `φ*` is the smallest finite value among the grid and `fitted_phi`.
/// Cells where `φ <= shift·φ*` or `φ` is not finite are masked.
#[allow(clippy::too_many_arguments)]
pub fn contour_grid(
    series: &ObservedSeries,
    window: Window,
    weights: &LossWeights,
    gamma_estimator: GammaEstimator,
    beta_axis: AxisSpec,
    s_axis: AxisSpec,
    fitted_phi: Option<f64>,
    shift: f64,
) -> Result<ContourGrid, BacktestError> {
    weights.validate()?;
    let h0 = estimate_h0(series, window)?;
    let gamma = gamma_estimator.estimate(series, window)?;
    let betas = beta_axis.points()?;
    let ss = s_axis.points()?;

    let mut phi = Vec::with_capacity(betas.len() * ss.len());
    for &b in &betas {
        for &s in &ss {
            phi.push(objective_phi(b, s, gamma, h0, series, window, weights));
        }
    }
    let phi_star = phi
        .iter()
        .copied()
        .chain(fitted_phi)
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let floor = shift * phi_star;
    let values = phi
        .iter()
        .map(|&p| {
            if p.is_finite() && phi_star.is_finite() && p > floor {
                Some(ln(p - floor))
            } else {
                None
            }
        })
        .collect();
    Ok(ContourGrid {
        beta_axis: betas,
        s_axis: ss,
        phi,
        values,
        phi_star,
        shift,
        gamma,
        h0,
    })
}
