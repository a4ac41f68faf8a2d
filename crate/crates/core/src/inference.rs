//! Posterior predictive reliability at a use condition.

use thiserror::Error;

use crate::diagnostics::quantile_sorted;
use crate::model::{cumulative_hazard, eyring_log_alpha, GewParams, ModelError, StressLevel};
use crate::parallel::{map_indexed, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("no posterior draws")]
    NoDraws,
    #[error("empty time grid")]
    EmptyGrid,
    #[error("quantile level must be in [0, 1], got {0}")]
    InvalidLevel(f64),
    #[error("times must be non-negative and finite, got {0}")]
    InvalidTime(f64),
    #[error("time {time}: {source}")]
    Model {
        time: f64,
        #[source]
        source: ModelError,
    },
}

/// Monte-Carlo mean of `R(t)` over the posterior draws at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityCurve {
    pub times: Vec<f64>,
    pub reliability: Vec<f64>,
    pub use_stress: StressLevel,
    /// Number of posterior draws averaged.
    pub draws: usize,
}

/// Pointwise posterior quantiles of `R(t)`; `values[k][i]` is quantile
/// `levels[k]` at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBand {
    pub times: Vec<f64>,
    pub levels: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_GRID_START: f64 = 1.0;
pub const DEFAULT_GRID_END: f64 = 5000.0;

/// `n` geometrically spaced times from `start` to `end` inclusive.
pub fn geometric_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let ratio = (end / start).ln() / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { end } else { start * (ratio * i as f64).exp() })
                .collect()
        }
    }
}

pub fn default_time_grid() -> Vec<f64> {
    geometric_grid(DEFAULT_GRID_START, DEFAULT_GRID_END, DEFAULT_GRID_POINTS)
}

/// Per-draw reliabilities, composed from `ln(alpha)` so that a draw whose
/// scale overflows at use stress contributes `exp(-inf) = 0` rather than an
/// error.
fn reliabilities(draws: &[GewParams], stress: &StressLevel, t: f64) -> Result<Vec<f64>, InferenceError> {
    draws
        .iter()
        .map(|p| {
            let log_alpha = eyring_log_alpha(p, stress);
            let r = (-cumulative_hazard(log_alpha, p.beta, t)).exp();
            if r.is_nan() {
                Err(InferenceError::Model {
                    time: t,
                    source: ModelError::Overflow(log_alpha),
                })
            } else {
                Ok(r)
            }
        })
        .collect()
}

fn check(draws: &[GewParams], times: &[f64]) -> Result<(), InferenceError> {
    if draws.is_empty() {
        return Err(InferenceError::NoDraws);
    }
    if times.is_empty() {
        return Err(InferenceError::EmptyGrid);
    }
    if let Some(&t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(InferenceError::InvalidTime(t));
    }
    Ok(())
}

pub fn predictive_reliability(
    draws: &[GewParams],
    stress: &StressLevel,
    times: &[f64],
    exec: Execution,
) -> Result<ReliabilityCurve, InferenceError> {
    check(draws, times)?;
    let reliability = map_indexed(times.len(), exec, |i| {
        reliabilities(draws, stress, times[i]).map(|r| r.iter().sum::<f64>() / r.len() as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(ReliabilityCurve {
        times: times.to_vec(),
        reliability,
        use_stress: *stress,
        draws: draws.len(),
    })
}

/// Empirical quantiles of the per-draw reliabilities at each time.
pub fn reliability_quantile_band(
    draws: &[GewParams],
    stress: &StressLevel,
    times: &[f64],
    levels: &[f64],
    exec: Execution,
) -> Result<QuantileBand, InferenceError> {
    check(draws, times)?;
    if let Some(&l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(InferenceError::InvalidLevel(l));
    }
    let rows = map_indexed(times.len(), exec, |i| {
        reliabilities(draws, stress, times[i]).map(|mut r| {
            r.sort_by(f64::total_cmp);
            levels.iter().map(|&l| quantile_sorted(&r, l)).collect::<Vec<f64>>()
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(QuantileBand {
        times: times.to_vec(),
        levels: levels.to_vec(),
        values: (0..levels.len())
            .map(|k| rows.iter().map(|r| r[k]).collect())
            .collect(),
    })
}
