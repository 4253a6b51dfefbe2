//! From a file on disk to a reconciled national series.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::NaiveDate;
use shcast_core::{aggregate_national, reconcile_flows, DataError, ObservedSeries, Schema};
use thiserror::Error;

use crate::formats::{read_series_csv, read_trajectory_csv, SeriesColumns};
use crate::ingest::{parse_belgium_csv, parse_france_csv, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputSchema {
    /// Belgian province file (DATE, TOTAL_IN, NEW_IN, NEW_OUT)
    Belgium,
    /// French department file (dep, sexe, jour, hosp, rad, dc)
    France,
    /// Canonical `date,H,E,L` file, used as is
    Series,
    /// Simulator output `day,S_bar,H,E,L`, used as is
    Trajectory,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Inclusive calendar range applied before aggregation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DateRange {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl DateRange {
    fn bounds(&self) -> (NaiveDate, NaiveDate) {
        (
            self.from.unwrap_or(NaiveDate::MIN),
            self.to.unwrap_or(NaiveDate::MAX),
        )
    }

    fn is_open(&self) -> bool {
        self.from.is_none() && self.to.is_none()
    }
}

/// Loads `path` and returns the series the estimators work on.
///
/// Raw national files are aggregated over regions and reconciled. Series and
/// trajectory files are taken verbatim.
pub fn load_series(
    path: &Path,
    schema: InputSchema,
    range: DateRange,
) -> Result<ObservedSeries, LoadError> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|source| LoadError::Open {
        path: shown.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let parse_err = |source| LoadError::Parse {
        path: shown.clone(),
        source,
    };
    let label = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (from, to) = range.bounds();

    let (raw, schema) = match schema {
        InputSchema::Belgium => (
            parse_belgium_csv(reader).map_err(parse_err)?,
            Schema::Belgium,
        ),
        InputSchema::France => (parse_france_csv(reader).map_err(parse_err)?, Schema::France),
        InputSchema::Series | InputSchema::Trajectory => {
            let cols = if schema == InputSchema::Series {
                read_series_csv(reader)
            } else {
                read_trajectory_csv(reader)
            }
            .map_err(parse_err)?;
            let series = from_columns(cols, label)?;
            return Ok(if range.is_open() {
                series
            } else {
                series.slice_dates(from.max(series.start_date()), to.min(series.end_date()))?
            });
        }
    };
    let mut raw = raw;
    raw.retain_dates(from, to);
    let mut national = aggregate_national(&raw)?;
    national.label = label;
    Ok(reconcile_flows(&national, schema)?)
}

fn from_columns(cols: SeriesColumns, label: String) -> Result<ObservedSeries, DataError> {
    ObservedSeries::new(cols.start_date, cols.h, cols.e, cols.l, label)
}
