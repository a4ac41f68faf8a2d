//! Independent priors on the five unknowns and the named model presets.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::SufficientStats;
use crate::model::{GewParams, Param};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriorError {
    #[error("uniform prior needs hi > lo, got ({lo}, {hi})")]
    InvalidUniform { lo: f64, hi: f64 },
    #[error("gamma prior needs shape > 0 and rate > 0, got ({shape}, {rate})")]
    InvalidGamma { shape: f64, rate: f64 },
    #[error("uniform prior on beta ({lo}, {hi}) has no positive part")]
    EmptyBetaSupport { lo: f64, hi: f64 },
    #[error("cannot parse prior `{0}`; expected uniform(lo, hi) or gamma(shape, rate)")]
    Parse(String),
    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Uniform { lo: f64, hi: f64 },
    /// Shape-rate parameterisation: density proportional to `x^(shape-1) e^(-rate x)`.
    Gamma { shape: f64, rate: f64 },
}

impl Prior {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, PriorError> {
        if hi > lo && lo.is_finite() && hi.is_finite() {
            Ok(Prior::Uniform { lo, hi })
        } else {
            Err(PriorError::InvalidUniform { lo, hi })
        }
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self, PriorError> {
        if shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite() {
            Ok(Prior::Gamma { shape, rate })
        } else {
            Err(PriorError::InvalidGamma { shape, rate })
        }
    }

    /// Closed support `[lo, hi]` before any positivity constraint.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Prior::Uniform { lo, hi } => (lo, hi),
            Prior::Gamma { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn is_gamma(&self) -> bool {
        matches!(self, Prior::Gamma { .. })
    }

    /// Log density up to an additive constant (zero for uniform priors);
    /// `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Gamma { shape, rate } => {
                if x > 0.0 && x.is_finite() {
                    // keep the shape-1 case exact at tiny x
                    let log_term = if shape == 1.0 { 0.0 } else { (shape - 1.0) * x.ln() };
                    log_term - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match *self {
            Prior::Uniform { .. } => 0.0,
            Prior::Gamma { shape, rate } => (shape - 1.0) / x - rate,
        }
    }

    pub fn hess(&self, x: f64) -> f64 {
        match *self {
            Prior::Uniform { .. } => 0.0,
            Prior::Gamma { shape, .. } => (1.0 - shape) / (x * x),
        }
    }

    /// Prior mean for gamma, interval midpoint for uniform.
    pub fn center(&self) -> f64 {
        match *self {
            Prior::Uniform { lo, hi } => 0.5 * (lo + hi),
            Prior::Gamma { shape, rate } => shape / rate,
        }
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            Prior::Gamma { shape, rate } => write!(f, "gamma({shape}, {rate})"),
        }
    }
}

impl FromStr for Prior {
    type Err = PriorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PriorError::Parse(s.to_string());
        let t = s.trim().to_ascii_lowercase();
        let open = t.find('(').ok_or_else(bad)?;
        let body = t[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<f64> = body
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [a, b] = args[..] else { return Err(bad()) };
        match t[..open].trim() {
            "u" | "uniform" | "unif" => Prior::uniform(a, b),
            "g" | "gamma" => Prior::gamma(a, b),
            _ => Err(bad()),
        }
    }
}

/// Model family implied by which parameters carry gamma priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    /// Uniform on all five.
    Gew1,
    /// Gamma on all five.
    Gew2,
    /// Uniform thetas, gamma beta.
    Gew3,
    /// Gamma thetas, uniform beta.
    Gew4,
    /// Any other combination.
    Mixed,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Gew1 => "GEW1",
            ModelFamily::Gew2 => "GEW2",
            ModelFamily::Gew3 => "GEW3",
            ModelFamily::Gew4 => "GEW4",
            ModelFamily::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    /// Preset name (`GEW2_3`, ...) or `custom`.
    pub label: String,
    pub priors: [Prior; 5],
}

/// Names of the shipped presets, in table order.
pub const PRESETS: [&str; 8] = [
    "GEW1", "GEW2_1", "GEW2_2", "GEW2_3", "GEW2_4", "GEW2_5", "GEW3", "GEW4",
];

impl PriorConfig {
    pub fn new(label: impl Into<String>, priors: [Prior; 5]) -> Result<Self, PriorError> {
        if let Prior::Uniform { lo, hi } = priors[Param::Beta.index()] {
            if hi <= 0.0 {
                return Err(PriorError::EmptyBetaSupport { lo, hi });
            }
        }
        Ok(Self {
            label: label.into(),
            priors,
        })
    }

    pub fn preset(name: &str) -> Result<Self, PriorError> {
        let key = name.trim().to_ascii_uppercase().replace(['.', ','], "_");
        let u = Prior::Uniform { lo: 0.0, hi: 100.0 };
        let g = |shape, rate| Prior::Gamma { shape, rate };
        let priors = match key.as_str() {
            "GEW1" => [u; 5],
            "GEW2" | "GEW2_1" => [g(1.0, 0.00001); 5],
            "GEW2_2" => [g(1.0, 0.001); 5],
            "GEW2_3" => [g(2.5, 0.5); 5],
            "GEW2_4" => [g(5.0, 1.0); 5],
            "GEW2_5" => [g(25.0, 5.0); 5],
            "GEW3" => [u, u, u, u, g(1.0, 0.001)],
            "GEW4" => {
                let t = g(1.0, 0.001);
                [t, t, t, t, u]
            }
            _ => return Err(PriorError::UnknownPreset(name.to_string())),
        };
        let label = if key == "GEW2" { "GEW2_1".to_string() } else { key };
        Self::new(label, priors)
    }

    pub fn prior(&self, p: Param) -> &Prior {
        &self.priors[p.index()]
    }

    pub fn family(&self) -> ModelFamily {
        let theta_gamma: Vec<bool> = self.priors[..4].iter().map(Prior::is_gamma).collect();
        let beta_gamma = self.priors[4].is_gamma();
        let all_t = theta_gamma.iter().all(|g| *g);
        let no_t = theta_gamma.iter().all(|g| !*g);
        match (all_t, no_t, beta_gamma) {
            (false, true, false) => ModelFamily::Gew1,
            (true, false, true) => ModelFamily::Gew2,
            (false, true, true) => ModelFamily::Gew3,
            (true, false, false) => ModelFamily::Gew4,
            _ => ModelFamily::Mixed,
        }
    }

    /// Support of a parameter's full conditional: the prior support, with beta
    /// further restricted to the positive half-line.
    pub fn support(&self, p: Param) -> (f64, f64) {
        let (lo, hi) = self.prior(p).support();
        if p == Param::Beta {
            (lo.max(0.0), hi)
        } else {
            (lo, hi)
        }
    }

    pub fn in_support(&self, params: &GewParams) -> bool {
        Param::ALL.iter().all(|&p| {
            let x = params.get(p);
            let (lo, hi) = self.support(p);
            let open_lo = p == Param::Beta || self.prior(p).is_gamma();
            let above = if open_lo { x > lo } else { x >= lo };
            above && x <= hi && x.is_finite()
        })
    }

    /// Default chain start: prior means (gamma) or midpoints (uniform).
    pub fn default_init(&self) -> GewParams {
        GewParams::from_array(self.priors.map(|p| p.center()))
    }

    /// Whether one full conditional is provably log-concave: at least one
    /// failure, and a gamma prior shape of at least one on a theta. For beta the
    /// `(1 - shape)/beta^2` term is absorbed by `-sum r_i / beta^2`.
    pub fn param_eligible(&self, p: Param, stats: &SufficientStats) -> bool {
        if stats.sum_r < 1.0 {
            return false;
        }
        match *self.prior(p) {
            Prior::Gamma { shape, .. } if p == Param::Beta => shape + stats.sum_r >= 1.0,
            Prior::Gamma { shape, .. } => shape >= 1.0,
            Prior::Uniform { .. } => true,
        }
    }

    /// Which full conditionals are provably log-concave for this prior and data.
    pub fn ars_eligibility(&self, stats: &SufficientStats) -> Eligibility {
        let per_param = Param::ALL.map(|p| self.param_eligible(p, stats));
        let mut reasons = Vec::new();
        if stats.sum_r < 1.0 {
            reasons.push("no failures observed: log-concavity requires sum r_i >= 1".to_string());
        }
        for p in Param::ALL {
            if let Prior::Gamma { shape, .. } = *self.prior(p) {
                if p != Param::Beta && shape < 1.0 {
                    reasons.push(format!(
                        "gamma shape {shape} < 1 on {p}: log-concavity requires shape >= 1"
                    ));
                }
            }
        }
        Eligibility { per_param, reasons }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eligibility {
    pub per_param: [bool; 5],
    pub reasons: Vec<String>,
}

impl Eligibility {
    pub fn all(&self) -> bool {
        self.per_param.iter().all(|e| *e)
    }

    pub fn for_param(&self, p: Param) -> bool {
        self.per_param[p.index()]
    }
}
