//! JSON documents emitted next to the CSV files.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use shcast_core::{BacktestReport, FitResult, ForecastResult, Mape, ObservedSeries, WindowOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowJson {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub t_i: usize,
    pub t_c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub beta_bar: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialJson {
    pub s_bar: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverJson {
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub termination_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsJson {
    pub c_h: f64,
    pub c_e: f64,
    pub c_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapeJson {
    pub percent: f64,
    pub included: usize,
    pub excluded: usize,
}

impl From<Mape> for MapeJson {
    fn from(m: Mape) -> Self {
        Self {
            percent: m.percent,
            included: m.included,
            excluded: m.excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub method: String,
    pub window: WindowJson,
    pub params: ParamsJson,
    pub initial: InitialJson,
    pub phi_star: f64,
    pub solver: SolverJson,
    pub gamma_estimator: String,
    pub weights: WeightsJson,
    /// MAPE of the fitted census over the train window.
    pub fit_mape: Option<MapeJson>,
}

impl FitJson {
    pub fn new(series: &ObservedSeries, fit: &FitResult, fit_mape: Option<Mape>) -> Self {
        let w = fit.window;
        Self {
            method: fit.method.as_str().to_owned(),
            window: WindowJson {
                start_date: series.date(w.t_i),
                end_date: series.date(w.t_c),
                t_i: w.t_i,
                t_c: w.t_c,
            },
            params: ParamsJson {
                beta_bar: fit.params.beta_bar,
                gamma: fit.params.gamma,
            },
            initial: InitialJson {
                s_bar: fit.initial.s_bar,
                h: fit.initial.h,
            },
            phi_star: fit.phi_star,
            solver: SolverJson {
                iterations: fit.solver.iterations,
                evaluations: fit.solver.evaluations,
                converged: fit.solver.converged,
                termination_reason: fit.solver.termination_reason.as_str().to_owned(),
            },
            gamma_estimator: fit.gamma_estimator.as_str().to_owned(),
            weights: WeightsJson {
                c_h: fit.weights.c_h,
                c_e: fit.weights.c_e,
                c_l: fit.weights.c_l,
            },
            fit_mape: fit_mape.map(MapeJson::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastJson {
    pub fit: FitJson,
    pub horizon_end: NaiveDate,
    pub horizon_days: usize,
    pub train_mape: MapeJson,
    pub test_mape: Option<MapeJson>,
    pub predicted_h: Vec<f64>,
    pub predicted_s_bar: Vec<f64>,
}

impl ForecastJson {
    pub fn new(series: &ObservedSeries, fc: &ForecastResult) -> Self {
        let until = fc.until();
        Self {
            fit: FitJson::new(series, &fc.fit, Some(fc.train_mape)),
            horizon_end: series.start_date() + chrono::Days::new(until as u64),
            horizon_days: fc.horizon,
            train_mape: fc.train_mape.into(),
            test_mape: fc.test_mape.map(MapeJson::from),
            predicted_h: fc.predicted_h.clone(),
            predicted_s_bar: fc.predicted_s_bar.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecordJson {
    pub window: WindowJson,
    pub status: String,
    pub error: Option<String>,
    pub fit: Option<FitJson>,
    pub train_mape: Option<f64>,
    pub test_mape: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestJson {
    pub window_length: usize,
    pub stride: usize,
    pub windows: usize,
    pub converged_windows: usize,
    pub records: Vec<WindowRecordJson>,
}

impl BacktestJson {
    pub fn new(series: &ObservedSeries, report: &BacktestReport) -> Self {
        let records: Vec<WindowRecordJson> = report
            .records
            .iter()
            .map(|r| {
                let window = WindowJson {
                    start_date: series.date(r.window.t_i),
                    end_date: series.date(r.window.t_c),
                    t_i: r.window.t_i,
                    t_c: r.window.t_c,
                };
                match &r.outcome {
                    WindowOutcome::Fitted(fc) => WindowRecordJson {
                        window,
                        status: "fitted".to_owned(),
                        error: None,
                        fit: Some(FitJson::new(series, &fc.fit, Some(fc.train_mape))),
                        train_mape: Some(fc.train_mape.percent),
                        test_mape: fc.test_mape.map(|m| m.percent),
                        converged: fc.fit.converged(),
                    },
                    WindowOutcome::Failed(e) => WindowRecordJson {
                        window,
                        status: "failed".to_owned(),
                        error: Some(e.to_string()),
                        fit: None,
                        train_mape: None,
                        test_mape: None,
                        converged: false,
                    },
                }
            })
            .collect();
        Self {
            window_length: report.window_length,
            stride: report.stride,
            windows: records.len(),
            converged_windows: records.iter().filter(|r| r.converged).count(),
            records,
        }
    }
}
