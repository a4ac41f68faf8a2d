//! Univariate samplers for log-concave targets and the Gibbs driver.

mod ars;
mod gibbs;
mod slice;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::Param;

pub use ars::{ars_sample, ArsEnvelope, ArsSampler};
pub use gibbs::{chain_rng, gibbs_run, run_chains, ChainPlan, GibbsSampler, GibbsState};
pub use slice::slice_sample;

/// A univariate log density known up to a constant.
///
/// `log_density` must return `-inf` outside [`support`](Self::support).
/// `grad` and `hess` are only evaluated at interior points.
pub trait LogDensity1D {
    fn log_density(&self, x: f64) -> f64;
    fn grad(&self, x: f64) -> f64;
    fn hess(&self, x: f64) -> f64;
    /// Support endpoints, possibly infinite.
    fn support(&self) -> (f64, f64);

    fn label(&self) -> String {
        "target".to_string()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("{target}: log density is not concave (gradient rises from {left} to {right} near {at})")]
    ConcavityViolation {
        target: String,
        at: f64,
        left: f64,
        right: f64,
    },
    #[error("{target}: no draw accepted after filling the {points}-point envelope")]
    EnvelopeBudget { target: String, points: usize },
    #[error("{target}: could not bracket the density ({reason})")]
    Bracketing { target: String, reason: String },
    #[error("{target}: log density at the current point {at} is not finite")]
    NonFiniteStart { target: String, at: f64 },
    #[error("{target}: slice step-out exceeded {limit} doublings")]
    StepOutLimit { target: String, limit: u32 },
    #[error("iteration {iteration}, {param}: {source}")]
    AtIteration {
        iteration: u64,
        param: Param,
        #[source]
        source: Box<SamplerError>,
    },
    #[error("the dataset has no failures; the posterior needs sum r_i >= 1")]
    NoFailures,
    #[error("initial state {0} lies outside the prior support")]
    InitOutsideSupport(String),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Adaptive rejection sampling where the conditional is provably
    /// log-concave, slice sampling elsewhere.
    #[default]
    Ars,
    Slice,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ars => "ars",
            Method::Slice => "slice",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ars" => Ok(Method::Ars),
            "slice" => Ok(Method::Slice),
            other => Err(format!("unknown sampler `{other}` (expected ars or slice)")),
        }
    }
}

/// Hard ceiling on slice interval doublings.
pub const MAX_DOUBLINGS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub method: Method,
    /// Initial slice interval width.
    pub slice_width: f64,
    pub max_doublings: u32,
    /// Envelope size beyond which ARS stops refining.
    pub ars_max_points: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: Method::Ars,
            slice_width: 1.0,
            max_doublings: MAX_DOUBLINGS,
            ars_max_points: 50,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.slice_width > 0.0 && self.slice_width.is_finite()) {
            return Err(SamplerError::Config(format!(
                "slice width must be positive, got {}",
                self.slice_width
            )));
        }
        if self.max_doublings == 0 || self.max_doublings > MAX_DOUBLINGS {
            return Err(SamplerError::Config(format!(
                "max doublings must be in 1..={MAX_DOUBLINGS}, got {}",
                self.max_doublings
            )));
        }
        if self.ars_max_points < 3 {
            return Err(SamplerError::Config(format!(
                "ARS needs at least 3 envelope points, got {}",
                self.ars_max_points
            )));
        }
        Ok(())
    }
}
