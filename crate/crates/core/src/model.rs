//! Weibull life distribution and its generalized Eyring reparameterisation.
//!
//! Everything here works in log space. The scale parameter is carried as
//! `ln(alpha)` internally so that terms like `alpha * x^beta` are formed as
//! `exp(ln(alpha) + beta * ln(x))` and never overflow in an intermediate.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid Weibull parameters: alpha = {alpha}, beta = {beta}")]
    InvalidWeibull { alpha: f64, beta: f64 },
    #[error("time must be non-negative and finite, got {0}")]
    NegativeTime(f64),
    #[error("density is infinite at x = 0 when beta = {0} < 1")]
    InfiniteDensity(f64),
    #[error("temperature must be a positive kelvin value, got {0}")]
    InvalidTemperature(f64),
    #[error("non-thermal stress {value} is outside the domain of the {transform} transform")]
    InvalidStress { value: f64, transform: VTransform },
    #[error("Eyring scale overflowed: exponent {0} is not representable")]
    Overflow(f64),
}

/// Index of one of the five model unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Theta1,
    Theta2,
    Theta3,
    Theta4,
    Beta,
}

impl Param {
    /// Gibbs update order.
    pub const ALL: [Param; 5] = [
        Param::Theta1,
        Param::Theta2,
        Param::Theta3,
        Param::Theta4,
        Param::Beta,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Param> {
        Param::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Theta1 => "theta1",
            Param::Theta2 => "theta2",
            Param::Theta3 => "theta3",
            Param::Theta4 => "theta4",
            Param::Beta => "beta",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub alpha: f64,
    pub beta: f64,
}

impl WeibullParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        let ok = alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite();
        if ok {
            Ok(Self { alpha, beta })
        } else {
            Err(ModelError::InvalidWeibull { alpha, beta })
        }
    }
}

/// Map from the raw non-thermal stress `S` to the covariate `V` that enters
/// the Eyring exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VTransform {
    Identity,
    /// `V = ln S`, the usual choice for relative humidity.
    #[default]
    Log,
    Reciprocal,
}

impl VTransform {
    pub fn apply(self, s: f64) -> Result<f64, ModelError> {
        let v = match self {
            VTransform::Identity => s,
            VTransform::Log if s > 0.0 => s.ln(),
            VTransform::Reciprocal if s != 0.0 => 1.0 / s,
            _ => f64::NAN,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::InvalidStress {
                value: s,
                transform: self,
            })
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VTransform::Identity => "identity",
            VTransform::Log => "log",
            VTransform::Reciprocal => "reciprocal",
        }
    }
}

impl fmt::Display for VTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VTransform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "id" | "none" => Ok(VTransform::Identity),
            "log" | "ln" => Ok(VTransform::Log),
            "reciprocal" | "inverse" | "inv" => Ok(VTransform::Reciprocal),
            other => Err(format!("unknown V transform `{other}`")),
        }
    }
}

/// One combination of thermal and non-thermal stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressLevel {
    /// Kelvin.
    pub temperature: f64,
    /// Raw non-thermal stress `S` as recorded in the data.
    pub nonthermal: f64,
    /// Transformed covariate `V`.
    pub v: f64,
}

impl StressLevel {
    pub fn new(temperature: f64, nonthermal: f64, transform: VTransform) -> Result<Self, ModelError> {
        let v = transform.apply(nonthermal)?;
        Self::with_v(temperature, nonthermal, v)
    }

    /// Builds a level from an already-transformed covariate.
    pub fn with_v(temperature: f64, nonthermal: f64, v: f64) -> Result<Self, ModelError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(ModelError::InvalidTemperature(temperature));
        }
        Ok(Self {
            temperature,
            nonthermal,
            v,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GewParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
    pub beta: f64,
}

impl GewParams {
    pub fn new(theta1: f64, theta2: f64, theta3: f64, theta4: f64, beta: f64) -> Self {
        Self {
            theta1,
            theta2,
            theta3,
            theta4,
            beta,
        }
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.theta1, self.theta2, self.theta3, self.theta4, self.beta]
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Theta1 => self.theta1,
            Param::Theta2 => self.theta2,
            Param::Theta3 => self.theta3,
            Param::Theta4 => self.theta4,
            Param::Beta => self.beta,
        }
    }

    pub fn set(&mut self, p: Param, value: f64) {
        match p {
            Param::Theta1 => self.theta1 = value,
            Param::Theta2 => self.theta2 = value,
            Param::Theta3 => self.theta3 = value,
            Param::Theta4 => self.theta4 = value,
            Param::Beta => self.beta = value,
        }
    }

    pub fn with(mut self, p: Param, value: f64) -> Self {
        self.set(p, value);
        self
    }
}

/// Coefficient multiplying each theta in the Eyring exponent at a stress level:
/// `(1, 1/T, V, V/T)`.
pub fn theta_loadings(s: &StressLevel) -> [f64; 4] {
    let t = s.temperature;
    [1.0, 1.0 / t, s.v, s.v / t]
}

/// `ln(alpha) = ln T - theta1 - theta2/T - theta3 V - theta4 V/T`.
pub fn eyring_log_alpha(p: &GewParams, s: &StressLevel) -> f64 {
    let [a1, a2, a3, a4] = theta_loadings(s);
    s.temperature.ln() - p.theta1 * a1 - p.theta2 * a2 - p.theta3 * a3 - p.theta4 * a4
}

pub fn eyring_alpha(p: &GewParams, s: &StressLevel) -> Result<f64, ModelError> {
    if !(s.temperature > 0.0) {
        return Err(ModelError::InvalidTemperature(s.temperature));
    }
    let log_alpha = eyring_log_alpha(p, s);
    let [a1, a2, a3, a4] = theta_loadings(s);
    let alpha = s.temperature * (-(p.theta1 * a1 + p.theta2 * a2 + p.theta3 * a3 + p.theta4 * a4)).exp();
    if alpha.is_finite() && !log_alpha.is_nan() {
        Ok(alpha)
    } else {
        Err(ModelError::Overflow(log_alpha))
    }
}

fn check_time(x: f64) -> Result<(), ModelError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NegativeTime(x))
    }
}

/// `alpha * x^beta` evaluated from `ln(alpha)`; zero at `x = 0`.
pub(crate) fn cumulative_hazard(log_alpha: f64, beta: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (log_alpha + beta * x.ln()).exp()
    }
}

fn log_pdf_from_log_alpha(log_alpha: f64, beta: f64, x: f64) -> Result<f64, ModelError> {
    check_time(x)?;
    if x == 0.0 {
        return if beta > 1.0 {
            Ok(f64::NEG_INFINITY)
        } else if beta == 1.0 {
            Ok(log_alpha + beta.ln())
        } else {
            Err(ModelError::InfiniteDensity(beta))
        };
    }
    Ok(log_alpha + beta.ln() + (beta - 1.0) * x.ln() - cumulative_hazard(log_alpha, beta, x))
}

pub fn weibull_log_pdf(w: &WeibullParams, x: f64) -> Result<f64, ModelError> {
    log_pdf_from_log_alpha(w.alpha.ln(), w.beta, x)
}

pub fn weibull_log_reliability(w: &WeibullParams, x: f64) -> Result<f64, ModelError> {
    check_time(x)?;
    Ok(-cumulative_hazard(w.alpha.ln(), w.beta, x))
}

pub fn gew_log_pdf(p: &GewParams, s: &StressLevel, x: f64) -> Result<f64, ModelError> {
    eyring_alpha(p, s)?;
    log_pdf_from_log_alpha(eyring_log_alpha(p, s), p.beta, x)
}

pub fn gew_log_reliability(p: &GewParams, s: &StressLevel, tau: f64) -> Result<f64, ModelError> {
    eyring_alpha(p, s)?;
    check_time(tau)?;
    Ok(-cumulative_hazard(eyring_log_alpha(p, s), p.beta, tau))
}

/// Inverse of the Weibull CDF applied to a survival probability `u`:
/// `x = (-ln u / alpha)^(1/beta)`.
pub fn weibull_time_from_uniform(w: &WeibullParams, u: f64) -> f64 {
    ((-u.ln()) / w.alpha).powf(1.0 / w.beta)
}
