//! The SH model and its one-day explicit Euler recursion.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: beta_bar={beta_bar}, gamma={gamma} (need finite beta_bar >= 0 and gamma in [0, 1])")]
    InvalidParams { beta_bar: f64, gamma: f64 },
    #[error("non-finite state (s_bar={s_bar}, h={h})")]
    Domain { s_bar: f64, h: f64 },
    #[error("simulation diverged at day {day}")]
    Divergence { day: usize },
    #[error("number of days must be at least 1")]
    NoDays,
}

/// Transmission-per-census rate `β̄` and daily discharge rate `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SHParams {
    pub beta_bar: f64,
    pub gamma: f64,
}

impl SHParams {
    pub fn new(beta_bar: f64, gamma: f64) -> Result<Self, ModelError> {
        let p = Self { beta_bar, gamma };
        if p.is_admissible() {
            Ok(p)
        } else {
            Err(ModelError::InvalidParams { beta_bar, gamma })
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.beta_bar.is_finite()
            && self.beta_bar >= 0.0
            && self.gamma.is_finite()
            && (0.0..=1.0).contains(&self.gamma)
    }
}

/// Scaled susceptibles `S̄` and hospital census `H` on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SHState {
    pub s_bar: f64,
    pub h: f64,
}

impl SHState {
    pub fn new(s_bar: f64, h: f64) -> Self {
        Self { s_bar, h }
    }

    pub fn is_finite(&self) -> bool {
        self.s_bar.is_finite() && self.h.is_finite()
    }

    /// Admissions `E = β̄ S̄ H`.
    pub fn admissions(&self, params: &SHParams) -> f64 {
        params.beta_bar * self.s_bar * self.h
    }

    /// Discharges `L = γ H`.
    pub fn discharges(&self, params: &SHParams) -> f64 {
        params.gamma * self.h
    }
}

/// Simulated states together with the flows leaving each state.
///
/// `admissions[k]` and `discharges[k]` are evaluated at `states[k]`, so entry
/// `k < len - 1` drives the step to `states[k + 1]` and the last entry is the
/// flow out of the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Day offset of `states[0]` relative to the series start.
    pub start_index: usize,
    pub params: SHParams,
    pub states: Vec<SHState>,
    pub admissions: Vec<f64>,
    pub discharges: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn h(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.h)
    }

    pub fn s_bar(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.s_bar)
    }

    /// Index (relative to `states`) of the largest census, first on ties.
    pub fn peak(&self) -> usize {
        let mut best = 0;
        for (k, s) in self.states.iter().enumerate() {
            if s.h > self.states[best].h {
                best = k;
            }
        }
        best
    }
}

/// One explicit Euler step with a step of one day.
pub fn euler_step(state: SHState, params: &SHParams) -> Result<SHState, ModelError> {
    if !state.is_finite() {
        return Err(ModelError::Domain {
            s_bar: state.s_bar,
            h: state.h,
        });
    }
    let s = state.s_bar;
    let h = state.h;
    let next = SHState {
        s_bar: s - params.beta_bar * s * h,
        h: h + params.beta_bar * s * h - params.gamma * h,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(ModelError::Domain {
            s_bar: next.s_bar,
            h: next.h,
        })
    }
}

/// Runs `n_days` Euler steps from `initial`, yielding `n_days + 1` states.
///
/// States are not clamped; a run that leaves the finite range reports the
/// first day whose state is not finite.
pub fn simulate(
    initial: SHState,
    params: &SHParams,
    n_days: usize,
) -> Result<Trajectory, ModelError> {
    simulate_from(0, initial, params, n_days)
}

pub(crate) fn simulate_from(
    start_index: usize,
    initial: SHState,
    params: &SHParams,
    n_days: usize,
) -> Result<Trajectory, ModelError> {
    if n_days == 0 {
        return Err(ModelError::NoDays);
    }
    if !initial.is_finite() {
        return Err(ModelError::Divergence { day: 0 });
    }
    let mut states = Vec::with_capacity(n_days + 1);
    states.push(initial);
    let mut current = initial;
    for day in 1..=n_days {
        current = euler_step(current, params).map_err(|_| ModelError::Divergence { day })?;
        states.push(current);
    }
    let admissions: Vec<f64> = states.iter().map(|s| s.admissions(params)).collect();
    let discharges: Vec<f64> = states.iter().map(|s| s.discharges(params)).collect();
    if let Some(day) = admissions.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::Divergence { day });
    }
    Ok(Trajectory {
        start_index,
        params: *params,
        states,
        admissions,
        discharges,
    })
}

/// Sign of `β̄ S̄(t) - γ` on one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Decreasing = -1,
    Balanced = 0,
    Increasing = 1,
}

/// Per-state growth indicator: `Increasing` exactly when the census grows on
/// the step leaving that state.
pub fn threshold_diagnostic(traj: &Trajectory, params: &SHParams) -> Vec<Growth> {
    traj.states
        .iter()
        .map(|s| {
            let drive = params.beta_bar * s.s_bar;
            if drive > params.gamma {
                Growth::Increasing
            } else if drive < params.gamma {
                Growth::Decreasing
            } else {
                Growth::Balanced
            }
        })
        .collect()
}
