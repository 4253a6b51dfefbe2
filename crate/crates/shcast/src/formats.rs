//! CSV layouts written and read by the command line tool.
//!
//! Floats are printed as the shortest string that parses back to the same
//! `f64`, in exponent form when very small or very large.

use std::fmt::Write as _;
use std::io::Read;

use chrono::{Days, NaiveDate};
use shcast_core::{BacktestReport, ContourGrid, ObservedSeries, Trajectory, Window, WindowOutcome};

use crate::ingest::ParseError;

/// Calendar date given to day 0 of a trajectory file, which carries no dates.
pub const TRAJECTORY_EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(2020, 1, 1) {
    Some(d) => d,
    None => panic!("bad epoch"),
};

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> String {
    let bytes = wtr.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// Shortest round-trip text for `x`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `date,H,E,L`
pub fn write_series_csv(series: &ObservedSeries) -> String {
    let mut wtr = csv_writer();
    wtr.write_record(["date", "H", "E", "L"]).unwrap();
    for i in 0..series.len() {
        wtr.write_record([
            series.date(i).to_string(),
            fmt_f64(series.h()[i]),
            fmt_f64(series.e()[i]),
            fmt_f64(series.l()[i]),
        ])
        .unwrap();
    }
    finish(wtr)
}

type Rows<const N: usize> = Vec<(csv::StringRecord, [f64; N])>;

fn numeric_columns<const N: usize>(
    raw: impl Read,
    names: [&'static str; N],
) -> Result<(csv::StringRecord, Rows<N>), ParseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(raw);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; N];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(ParseError::MissingColumn(name))?;
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut values = [0.0; N];
        for ((v, &i), name) in values.iter_mut().zip(&idx).zip(names) {
            *v = record[i]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ParseError::Row {
                    line,
                    message: format!("unparseable {name} value `{}`", &record[i]),
                })?;
        }
        out.push((record, values));
    }
    Ok((headers, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesColumns {
    pub start_date: NaiveDate,
    pub h: Vec<f64>,
    pub e: Vec<f64>,
    pub l: Vec<f64>,
}

/// Reads `date,H,E,L`. Dates must be consecutive days.
pub fn read_series_csv(raw: impl Read) -> Result<SeriesColumns, ParseError> {
    let (headers, rows) = numeric_columns(raw, ["H", "E", "L"])?;
    let date_col = headers
        .iter()
        .position(|h| h == "date")
        .ok_or(ParseError::MissingColumn("date"))?;
    let mut cols = SeriesColumns {
        start_date: NaiveDate::MIN,
        h: Vec::with_capacity(rows.len()),
        e: Vec::with_capacity(rows.len()),
        l: Vec::with_capacity(rows.len()),
    };
    for (k, (record, [h, e, l])) in rows.into_iter().enumerate() {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw_date = &record[date_col];
        let date =
            NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| ParseError::Row {
                line,
                message: format!("unparseable date `{raw_date}`"),
            })?;
        if k == 0 {
            cols.start_date = date;
        } else if Some(date) != cols.start_date.checked_add_days(Days::new(k as u64)) {
            return Err(ParseError::Row {
                line,
                message: format!("date {date} does not follow the previous row"),
            });
        }
        cols.h.push(h);
        cols.e.push(e);
        cols.l.push(l);
    }
    Ok(cols)
}

/// `day,S_bar,H,E,L`, one row per state.
pub fn write_trajectory_csv(traj: &Trajectory) -> String {
    let mut wtr = csv_writer();
    wtr.write_record(["day", "S_bar", "H", "E", "L"]).unwrap();
    for (k, state) in traj.states.iter().enumerate() {
        wtr.write_record([
            (traj.start_index + k).to_string(),
            fmt_f64(state.s_bar),
            fmt_f64(state.h),
            fmt_f64(traj.admissions[k]),
            fmt_f64(traj.discharges[k]),
        ])
        .unwrap();
    }
    finish(wtr)
}

/// Reads `day,S_bar,H,E,L` into `(H, E, L)` columns. Days must run 0, 1, 2, ...
pub fn read_trajectory_csv(raw: impl Read) -> Result<SeriesColumns, ParseError> {
    let (_, rows) = numeric_columns(raw, ["day", "H", "E", "L"])?;
    let mut cols = SeriesColumns {
        start_date: TRAJECTORY_EPOCH,
        h: Vec::with_capacity(rows.len()),
        e: Vec::with_capacity(rows.len()),
        l: Vec::with_capacity(rows.len()),
    };
    for (k, (record, [day, h, e, l])) in rows.into_iter().enumerate() {
        if day != k as f64 {
            return Err(ParseError::Row {
                line: record.position().map(|p| p.line()).unwrap_or(0),
                message: format!("expected day {k}, found {day}"),
            });
        }
        cols.h.push(h);
        cols.e.push(e);
        cols.l.push(l);
    }
    Ok(cols)
}

/// `date,H_observed,H_model,phase` for every day of `model`, which starts at
/// `t_i`. Days after the series end have an empty `H_observed`.
pub fn write_forecast_csv(series: &ObservedSeries, window: Window, model: &Trajectory) -> String {
    let mut wtr = csv_writer();
    wtr.write_record(["date", "H_observed", "H_model", "phase"])
        .unwrap();
    for (k, h_model) in model.h().enumerate() {
        let t = window.t_i + k;
        let phase = if t <= window.t_c {
            "train"
        } else if t < series.len() {
            "test"
        } else {
            "beyond"
        };
        let date = series.start_date() + Days::new(t as u64);
        wtr.write_record([
            date.to_string(),
            cell(series.h().get(t).copied()),
            fmt_f64(h_model),
            phase.to_owned(),
        ])
        .unwrap();
    }
    finish(wtr)
}

/// One row per window; failed windows keep their dates and leave the rest empty.
pub fn write_backtest_csv(series: &ObservedSeries, report: &BacktestReport) -> String {
    let mut wtr = csv_writer();
    wtr.write_record([
        "window_start",
        "window_end",
        "beta_bar",
        "gamma",
        "s_bar_0",
        "h_0",
        "phi_star",
        "train_mape",
        "test_mape",
        "converged",
    ])
    .unwrap();
    for record in &report.records {
        let mut row = vec![
            series.date(record.window.t_i).to_string(),
            series.date(record.window.t_c).to_string(),
        ];
        match &record.outcome {
            WindowOutcome::Fitted(fc) => {
                let fit = &fc.fit;
                row.extend([
                    fmt_f64(fit.params.beta_bar),
                    fmt_f64(fit.params.gamma),
                    fmt_f64(fit.initial.s_bar),
                    fmt_f64(fit.initial.h),
                    fmt_f64(fit.phi_star),
                    fmt_f64(fc.train_mape.percent),
                    cell(fc.test_mape.map(|m| m.percent)),
                    fit.converged().to_string(),
                ]);
            }
            WindowOutcome::Failed(_) => {
                row.extend(core::iter::repeat_n(String::new(), 7));
                row.push("false".to_owned());
            }
        }
        wtr.write_record(&row).unwrap();
    }
    finish(wtr)
}

/// First row is the `S̄` axis after an empty corner cell, first column the
/// `β̄` axis. Masked cells are empty.
pub fn write_contour_csv(grid: &ContourGrid) -> String {
    let mut out = String::new();
    for s in &grid.s_axis {
        let _ = write!(out, ",{}", fmt_f64(*s));
    }
    out.push('\n');
    for (i, b) in grid.beta_axis.iter().enumerate() {
        out.push_str(&fmt_f64(*b));
        for j in 0..grid.s_axis.len() {
            out.push(',');
            if let Some(v) = grid.value(i, j) {
                out.push_str(&fmt_f64(v));
            }
        }
        out.push('\n');
    }
    out
}
