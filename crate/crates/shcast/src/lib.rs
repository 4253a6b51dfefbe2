//! File formats and command line front end for `shcast-core`.

pub mod cli;
pub mod formats;
pub mod ingest;
pub mod load;
pub mod report;

pub use formats::{
    read_series_csv, read_trajectory_csv, write_backtest_csv, write_contour_csv,
    write_forecast_csv, write_series_csv, write_trajectory_csv, SeriesColumns, TRAJECTORY_EPOCH,
};
pub use ingest::{parse_belgium_csv, parse_france_csv, ParseError};
pub use load::{load_series, DateRange, InputSchema, LoadError};
