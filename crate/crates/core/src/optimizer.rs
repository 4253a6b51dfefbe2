//! Derivative-free Nelder-Mead simplex minimizer.
//!
//! Follows the classical `fmin` defaults: reflection 1, expansion 2,
//! contraction 0.5, shrink 0.5, a start simplex that scales each coordinate
//! by 5% (0.00025 absolute at zero), absolute tolerances of `1e-4` on both
//! the simplex spread and the function spread, and `200 * n` caps on
//! iterations and evaluations.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

const RELATIVE_STEP: f64 = 0.05;
const ZERO_STEP: f64 = 0.00025;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("initial guess is empty")]
    EmptyGuess,
    #[error("objective is not finite at the initial guess ({value})")]
    NonFiniteStart { value: f64 },
    #[error("invalid simplex configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexConfig {
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    /// `None` means `200 * dimension`.
    pub max_iterations: Option<usize>,
    /// `None` means `200 * dimension`.
    pub max_evaluations: Option<usize>,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            x_tolerance: 1e-4,
            f_tolerance: 1e-4,
            max_iterations: None,
            max_evaluations: None,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if !(self.x_tolerance > 0.0 && self.f_tolerance > 0.0) {
            return Err(OptimizeError::InvalidConfig("tolerances must be positive"));
        }
        if !(self.reflection > 0.0 && self.reflection.is_finite()) {
            return Err(OptimizeError::InvalidConfig("reflection must be > 0"));
        }
        if !(self.expansion > 1.0 && self.expansion.is_finite()) {
            return Err(OptimizeError::InvalidConfig("expansion must be > 1"));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(OptimizeError::InvalidConfig(
                "contraction must be in (0, 1)",
            ));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(OptimizeError::InvalidConfig("shrink must be in (0, 1)"));
        }
        if self.max_iterations == Some(0) || self.max_evaluations == Some(0) {
            return Err(OptimizeError::InvalidConfig("caps must be positive"));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, dimension: usize) -> usize {
        self.max_iterations.unwrap_or(200 * dimension)
    }

    pub fn evaluation_cap(&self, dimension: usize) -> usize {
        self.max_evaluations.unwrap_or(200 * dimension)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Tolerance,
    MaxIterations,
    MaxEvaluations,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Tolerance => "tolerance",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::MaxEvaluations => "max_evaluations",
        }
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_min: Vec<f64>,
    pub f_min: f64,
    /// Counts the construction of the start simplex as the first iteration.
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub termination_reason: TerminationReason,
}

/// Minimizes `objective` starting from `x0`.
///
/// Non-finite objective values are treated as `+inf`, so the simplex backs
/// away from regions where the objective is undefined.
pub fn nelder_mead<F>(
    objective: F,
    x0: &[f64],
    config: &SimplexConfig,
) -> Result<SolveReport, OptimizeError>
where
    F: FnMut(&[f64]) -> f64,
{
    nelder_mead_observed(objective, x0, config, |_, _| {})
}

/// As [`nelder_mead`], calling `observer(best_x, best_f)` after every
/// iteration.
pub fn nelder_mead_observed<F, O>(
    objective: F,
    x0: &[f64],
    config: &SimplexConfig,
    mut observer: O,
) -> Result<SolveReport, OptimizeError>
where
    F: FnMut(&[f64]) -> f64,
    O: FnMut(&[f64], f64),
{
    config.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(OptimizeError::EmptyGuess);
    }
    let max_iter = config.iteration_cap(n);
    let mut eval = Budget {
        objective,
        used: 0,
        cap: config.evaluation_cap(n),
    };

    let f0 = eval.call(x0).unwrap_or(f64::INFINITY);
    if !f0.is_finite() {
        return Err(OptimizeError::NonFiniteStart { value: f0 });
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for k in 0..n {
        let mut y = x0.to_vec();
        y[k] = if y[k] != 0.0 {
            (1.0 + RELATIVE_STEP) * y[k]
        } else {
            ZERO_STEP
        };
        let fy = eval.call(&y).unwrap_or(f64::INFINITY);
        simplex.push(y);
        values.push(fy);
    }
    sort_simplex(&mut simplex, &mut values);

    let rho = config.reflection;
    let chi = config.expansion;
    let psi = config.contraction;
    let sigma = config.shrink;

    let mut iterations = 1;
    let mut stopped_on_tolerance = false;
    while eval.used < eval.cap && iterations < max_iter {
        if simplex_spread(&simplex) <= config.x_tolerance
            && value_spread(&values) <= config.f_tolerance
        {
            stopped_on_tolerance = true;
            break;
        }
        let step = iterate(&mut eval, &mut simplex, &mut values, [rho, chi, psi, sigma]);
        sort_simplex(&mut simplex, &mut values);
        observer(&simplex[0], values[0]);
        if step.is_none() {
            break;
        }
        iterations += 1;
    }

    let termination_reason = if eval.used >= eval.cap && !stopped_on_tolerance {
        TerminationReason::MaxEvaluations
    } else if iterations >= max_iter && !stopped_on_tolerance {
        TerminationReason::MaxIterations
    } else {
        TerminationReason::Tolerance
    };
    Ok(SolveReport {
        x_min: simplex.swap_remove(0),
        f_min: values[0],
        iterations,
        evaluations: eval.used,
        converged: termination_reason == TerminationReason::Tolerance,
        termination_reason,
    })
}

struct Budget<F> {
    objective: F,
    used: usize,
    cap: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<F> {
    /// `None` once the evaluation cap is exhausted.
    fn call(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.cap {
            return None;
        }
        self.used += 1;
        let v = (self.objective)(x);
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// One reflect/expand/contract/shrink pass over a sorted simplex. Returns
/// `None` if the evaluation budget ran out part way.
fn iterate<F: FnMut(&[f64]) -> f64>(
    eval: &mut Budget<F>,
    simplex: &mut [Vec<f64>],
    values: &mut [f64],
    [rho, chi, psi, sigma]: [f64; 4],
) -> Option<()> {
    let n = simplex.len() - 1;
    let worst = simplex[n].clone();
    let mut centroid = vec![0.0; n];
    for vertex in &simplex[..n] {
        for (c, v) in centroid.iter_mut().zip(vertex) {
            *c += v;
        }
    }
    for c in &mut centroid {
        *c /= n as f64;
    }
    let combine = |a: f64, b: f64| -> Vec<f64> {
        centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| a * c - b * w)
            .collect()
    };

    let xr = combine(1.0 + rho, rho);
    let fxr = eval.call(&xr)?;

    if fxr < values[0] {
        let xe = combine(1.0 + rho * chi, rho * chi);
        let fxe = eval.call(&xe)?;
        if fxe < fxr {
            simplex[n] = xe;
            values[n] = fxe;
        } else {
            simplex[n] = xr;
            values[n] = fxr;
        }
        return Some(());
    }
    if fxr < values[n - 1] {
        simplex[n] = xr;
        values[n] = fxr;
        return Some(());
    }

    let shrink = if fxr < values[n] {
        // outside contraction
        let xc = combine(1.0 + psi * rho, psi * rho);
        let fxc = eval.call(&xc)?;
        if fxc <= fxr {
            simplex[n] = xc;
            values[n] = fxc;
            false
        } else {
            true
        }
    } else {
        // inside contraction
        let xcc: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| (1.0 - psi) * c + psi * w)
            .collect();
        let fxcc = eval.call(&xcc)?;
        if fxcc < values[n] {
            simplex[n] = xcc;
            values[n] = fxcc;
            false
        } else {
            true
        }
    };

    if shrink {
        let best = simplex[0].clone();
        for j in 1..=n {
            for (x, b) in simplex[j].iter_mut().zip(&best) {
                *x = b + sigma * (*x - b);
            }
            values[j] = eval.call(&simplex[j])?;
        }
    }
    Some(())
}

/// Stable sort by value, so ties keep their previous order.
fn sort_simplex(simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *simplex = order.iter().map(|&i| simplex[i].clone()).collect();
    *values = order.iter().map(|&i| values[i]).collect();
}

fn simplex_spread(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn value_spread(values: &[f64]) -> f64 {
    values[1..]
        .iter()
        .map(|v| (values[0] - v).abs())
        .fold(0.0, |acc, d| if d.is_nan() || d > acc { d } else { acc })
}
