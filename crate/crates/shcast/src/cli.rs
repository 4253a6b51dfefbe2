//! Command line front end.
//!
//! Exit status: 0 on success, 1 on bad input (nothing is written), 2 when the
//! numerics fail to converge or diverge (artifacts are still written when
//! there is something to write).

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use shcast_core::{
    backtest_sweep, contour_grid, fit_joint4d, fit_sequential, forecast, mape, simulate, AxisSpec,
    BacktestError, EstimationError, FitMethod, FitOptions, FitResult, GammaEstimator, LossWeights,
    ModelError, ObservedSeries, OptimizeError, SHParams, SHState, SweepConfig, Window,
    DEFAULT_GUESS,
};

use crate::formats::{
    write_backtest_csv, write_contour_csv, write_forecast_csv, write_trajectory_csv,
};
use crate::load::{load_series, DateRange, InputSchema, LoadError};
use crate::report::{BacktestJson, FitJson, ForecastJson};

#[derive(Debug, Parser)]
#[command(
    name = "shcast",
    version,
    about = "Fit and forecast hospital census with the SH model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the four estimands on one train window
    Fit(FitArgs),
    /// Fit one window and run the model forward
    Forecast(ForecastArgs),
    /// Fit and forecast every window of a sliding sweep
    Backtest(BacktestArgs),
    /// Tabulate the objective over a (beta_bar, S_bar) grid
    Contour(ContourArgs),
    /// Run the model from explicit estimands
    Simulate(SimulateArgs),
}

/// A day given either as an ISO date or as an index from the series start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DayRef {
    Index(usize),
    Date(NaiveDate),
}

impl FromStr for DayRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(i) = s.parse::<usize>() {
            return Ok(DayRef::Index(i));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(DayRef::Date)
            .map_err(|_| format!("`{s}` is neither a day index nor a YYYY-MM-DD date"))
    }
}

impl DayRef {
    /// Offset from the series start; dates before the start are rejected.
    fn offset(self, series: &ObservedSeries) -> Result<usize, CliError> {
        match self {
            DayRef::Index(i) => Ok(i),
            DayRef::Date(d) => {
                usize::try_from((d - series.start_date()).num_days()).map_err(|_| {
                    CliError::input(format!(
                        "{d} is before the series start {}",
                        series.start_date()
                    ))
                })
            }
        }
    }

    /// Like `offset` but the day must exist in the series.
    fn within(self, series: &ObservedSeries) -> Result<usize, CliError> {
        let i = self.offset(series)?;
        if i >= series.len() {
            return Err(CliError::input(format!(
                "day {self} is outside the series ({} to {})",
                series.start_date(),
                series.end_date()
            )));
        }
        Ok(i)
    }
}

impl std::fmt::Display for DayRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DayRef::Index(i) => write!(f, "{i}"),
            DayRef::Date(d) => write!(f, "{d}"),
        }
    }
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{p}` is not a finite number"))?;
    }
    Ok(out)
}

fn parse_weights(s: &str) -> Result<LossWeights, String> {
    let [c_h, c_e, c_l] = parse_floats::<3>(s)?;
    LossWeights::new(c_h, c_e, c_l).map_err(|e| e.to_string())
}

fn parse_guess(s: &str) -> Result<(f64, f64), String> {
    let [b, s0] = parse_floats::<2>(s)?;
    Ok((b, s0))
}

fn parse_axis(s: &str) -> Result<AxisSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [min, max, n] = parts[..] else {
        return Err(format!("expected min,max,n, got `{s}`"));
    };
    let min: f64 = min
        .parse()
        .map_err(|_| format!("bad axis minimum `{min}`"))?;
    let max: f64 = max
        .parse()
        .map_err(|_| format!("bad axis maximum `{max}`"))?;
    let n: usize = n.parse().map_err(|_| format!("bad axis size `{n}`"))?;
    AxisSpec::new(min, max, n).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sequential,
    Joint4d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GammaArg {
    RatioOfMeans,
    LeastSquares,
}

impl From<GammaArg> for GammaEstimator {
    fn from(g: GammaArg) -> Self {
        match g {
            GammaArg::RatioOfMeans => GammaEstimator::RatioOfMeans,
            GammaArg::LeastSquares => GammaEstimator::LeastSquares,
        }
    }
}

impl From<MethodArg> for FitMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sequential => FitMethod::Sequential,
            MethodArg::Joint4d => FitMethod::Joint4d,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Data file
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "belgium")]
    pub schema: InputSchema,
    /// Drop data before this date (applied before aggregation)
    #[arg(long)]
    pub data_start: Option<NaiveDate>,
    /// Drop data after this date
    #[arg(long)]
    pub data_end: Option<NaiveDate>,
}

impl InputArgs {
    fn load(&self) -> Result<ObservedSeries, CliError> {
        let range = DateRange {
            from: self.data_start,
            to: self.data_end,
        };
        load_series(&self.input, self.schema, range).map_err(CliError::from)
    }
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Loss weights on H, E and L
    #[arg(long, value_parser = parse_weights, default_value = "1,1,1")]
    pub weights: LossWeights,
    #[arg(long, value_enum, default_value = "sequential")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "ratio-of-means")]
    pub gamma_estimator: GammaArg,
}

impl EstimatorArgs {
    fn options(&self) -> FitOptions {
        FitOptions {
            weights: self.weights,
            gamma_estimator: self.gamma_estimator.into(),
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// First train day (date or index); defaults to the series start
    #[arg(long)]
    pub train_start: Option<DayRef>,
    /// Last train day (date or index)
    #[arg(long)]
    pub train_end: Option<DayRef>,
    /// Starting point (beta_bar,S_bar) for the solver
    #[arg(long, value_parser = parse_guess)]
    pub guess: Option<(f64, f64)>,
}

impl WindowArgs {
    /// `default_len` of `None` means "to the series end".
    fn window(
        &self,
        series: &ObservedSeries,
        default_len: Option<usize>,
    ) -> Result<Window, CliError> {
        let t_i = match self.train_start {
            Some(d) => d.within(series)?,
            None => 0,
        };
        let t_c = match (self.train_end, default_len) {
            (Some(d), _) => d.within(series)?,
            (None, Some(n)) => t_i + n - 1,
            (None, None) => series.len() - 1,
        };
        let window = Window::new(t_i, t_c).map_err(|e| CliError::input(e.to_string()))?;
        window
            .check(series)
            .map_err(|e| CliError::input(e.to_string()))?;
        Ok(window)
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Directory for the output files (created if missing)
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Last forecast day (date or index, may lie past the data); defaults to the series end
    #[arg(long)]
    pub horizon_end: Option<DayRef>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, default_value_t = 14)]
    pub window_length: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// beta_bar axis as min,max,n
    #[arg(long, value_parser = parse_axis, default_value = "2e-6,2e-5,50")]
    pub grid_beta: AxisSpec,
    /// S_bar axis as min,max,n
    #[arg(long, value_parser = parse_axis, default_value = "2e3,5e4,50")]
    pub grid_s: AxisSpec,
    /// Cells with phi <= shift * phi_star are masked
    #[arg(long, default_value_t = 0.99)]
    pub shift: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub beta_bar: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: f64,
    /// S_bar on day 0
    #[arg(long, allow_negative_numbers = true)]
    pub s_bar: f64,
    /// H on day 0
    #[arg(long, allow_negative_numbers = true)]
    pub h0: f64,
    /// Number of steps; the file has days + 1 rows
    #[arg(long)]
    pub days: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        CliError::input(e.to_string())
    }
}

fn model_is_numerical(e: &ModelError) -> bool {
    matches!(e, ModelError::Divergence { .. } | ModelError::Domain { .. })
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        let numerical = match &e {
            EstimationError::Model(m) => model_is_numerical(m),
            EstimationError::Optimize(OptimizeError::NonFiniteStart { .. }) => true,
            EstimationError::Inadmissible => true,
            _ => false,
        };
        if numerical {
            CliError::numerical(e.to_string())
        } else {
            CliError::input(e.to_string())
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Estimation(inner) => inner.into(),
            BacktestError::Model(ref m) if model_is_numerical(m) => {
                CliError::numerical(e.to_string())
            }
            other => CliError::input(other.to_string()),
        }
    }
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn run_fit(
    series: &ObservedSeries,
    window: Window,
    estimator: &EstimatorArgs,
    guess: Option<(f64, f64)>,
) -> Result<FitResult, CliError> {
    let options = estimator.options();
    let fit = match (estimator.method, guess) {
        (MethodArg::Sequential, g) => {
            fit_sequential(series, window, &options, g.unwrap_or(DEFAULT_GUESS))?
        }
        (MethodArg::Joint4d, None) => fit_joint4d(series, window, &options, None)?,
        (MethodArg::Joint4d, Some(g)) => {
            let seq = fit_sequential(series, window, &options, g)?;
            let seed = [
                seq.params.beta_bar,
                seq.initial.s_bar,
                seq.params.gamma,
                seq.initial.h,
            ];
            fit_joint4d(series, window, &options, Some(seed))?
        }
    };
    Ok(fit)
}

fn status(converged: bool) -> u8 {
    if converged {
        0
    } else {
        2
    }
}

fn cmd_fit(args: &FitArgs) -> Result<u8, CliError> {
    let series = args.input.load()?;
    let window = args.window.window(&series, None)?;
    let fit = run_fit(&series, window, &args.estimator, args.window.guess)?;
    let observed = &series.h()[window.t_i..=window.t_c];
    let fitted: Vec<f64> = fit.fitted.h().collect();
    let fit_mape = mape(&fitted, observed).ok();

    write_outputs(
        &args.out.out_dir,
        &[
            ("fit.json", to_json(&FitJson::new(&series, &fit, fit_mape))),
            (
                "fit_series.csv",
                write_forecast_csv(&series, window, &fit.fitted),
            ),
        ],
    )?;
    print_fit(&series, &fit);
    match fit_mape {
        Some(m) => println!("fit MAPE: {:.4}%", m.percent),
        None => println!("fit MAPE: undefined (no positive observations)"),
    }
    if !fit.converged() {
        eprintln!(
            "warning: solver stopped on {} before converging",
            fit.solver.termination_reason.as_str()
        );
    }
    Ok(status(fit.converged()))
}

fn print_fit(series: &ObservedSeries, fit: &FitResult) {
    println!(
        "window {} to {} ({} days), method {}",
        series.date(fit.window.t_i),
        series.date(fit.window.t_c),
        fit.window.len(),
        fit.method.as_str()
    );
    println!(
        "beta_bar {:e}  gamma {}  S_bar(t_i) {}  H(t_i) {}  phi* {:e}",
        fit.params.beta_bar, fit.params.gamma, fit.initial.s_bar, fit.initial.h, fit.phi_star
    );
}

fn cmd_forecast(args: &ForecastArgs) -> Result<u8, CliError> {
    let series = args.input.load()?;
    let window = args.window.window(&series, Some(14))?;
    let until = match args.horizon_end {
        Some(d) => d.offset(&series)?,
        None => series.len() - 1,
    };
    if until <= window.t_c {
        return Err(CliError::input(format!(
            "horizon end {} must lie after the train end {}",
            series.start_date() + chrono::Days::new(until as u64),
            series.date(window.t_c)
        )));
    }
    let fit = run_fit(&series, window, &args.estimator, args.window.guess)?;
    let fc = forecast(&series, &fit, until)?;

    write_outputs(
        &args.out.out_dir,
        &[
            ("forecast.json", to_json(&ForecastJson::new(&series, &fc))),
            (
                "forecast_series.csv",
                write_forecast_csv(&series, window, &fc.model),
            ),
        ],
    )?;
    print_fit(&series, &fit);
    println!("train MAPE: {:.4}%", fc.train_mape.percent);
    match fc.test_mape {
        Some(m) => println!("test MAPE: {:.4}% over {} days", m.percent, m.included),
        None => println!("test MAPE: none (no observed days after the window)"),
    }
    Ok(status(fit.converged()))
}

fn cmd_backtest(args: &BacktestArgs) -> Result<u8, CliError> {
    let series = args.input.load()?;
    let config = SweepConfig {
        window_length: args.window_length,
        stride: args.stride,
        method: args.estimator.method.into(),
        options: args.estimator.options(),
    };
    let report = backtest_sweep(&series, &config)?;
    let json = BacktestJson::new(&series, &report);
    write_outputs(
        &args.out.out_dir,
        &[
            ("backtest.json", to_json(&json)),
            ("backtest.csv", write_backtest_csv(&series, &report)),
        ],
    )?;
    println!(
        "{} windows of {} days, stride {}: {} converged",
        json.windows, args.window_length, args.stride, json.converged_windows
    );
    Ok(status(json.converged_windows > 0))
}

fn cmd_contour(args: &ContourArgs) -> Result<u8, CliError> {
    let series = args.input.load()?;
    let window = args.window.window(&series, None)?;
    let options = args.estimator.options();
    let fit = fit_sequential(
        &series,
        window,
        &options,
        args.window.guess.unwrap_or(DEFAULT_GUESS),
    );
    let fitted_phi = fit.as_ref().ok().map(|f| f.phi_star);
    let grid = contour_grid(
        &series,
        window,
        &options.weights,
        options.gamma_estimator,
        args.grid_beta,
        args.grid_s,
        fitted_phi,
        args.shift,
    )?;
    write_outputs(
        &args.out.out_dir,
        &[("contour.csv", write_contour_csv(&grid))],
    )?;

    println!(
        "{}x{} grid, gamma {}, H(t_i) {}, phi* {:e}",
        grid.beta_axis.len(),
        grid.s_axis.len(),
        grid.gamma,
        grid.h0,
        grid.phi_star
    );
    if let Ok(f) = &fit {
        println!(
            "fitted beta_bar {:e}  S_bar(t_i) {}",
            f.params.beta_bar, f.initial.s_bar
        );
    }
    if let Some((i, j)) = grid.argmin() {
        println!(
            "grid minimum at beta_bar {:e}  S_bar(t_i) {}",
            grid.beta_axis[i], grid.s_axis[j]
        );
    }
    if grid.all_masked() {
        eprintln!("warning: every grid cell is masked (overflow or no finite objective)");
    }
    Ok(0)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, CliError> {
    let params =
        SHParams::new(args.beta_bar, args.gamma).map_err(|e| CliError::input(e.to_string()))?;
    if !(args.s_bar.is_finite() && args.s_bar >= 0.0 && args.h0.is_finite() && args.h0 >= 0.0) {
        return Err(CliError::input(
            "initial S_bar and H must be finite and non-negative",
        ));
    }
    let traj = simulate(SHState::new(args.s_bar, args.h0), &params, args.days).map_err(|e| {
        if model_is_numerical(&e) {
            CliError::numerical(e.to_string())
        } else {
            CliError::input(e.to_string())
        }
    })?;
    write_outputs(
        &args.out.out_dir,
        &[("trajectory.csv", write_trajectory_csv(&traj))],
    )?;
    println!("{} days simulated, peak on day {}", args.days, traj.peak());
    Ok(0)
}

/// Runs a parsed command and returns its exit status.
pub fn run(cli: &Cli) -> u8 {
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Backtest(a) => cmd_backtest(a),
        Command::Contour(a) => cmd_contour(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
