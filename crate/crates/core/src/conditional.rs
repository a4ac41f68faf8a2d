//! Full conditional log-densities of the five unknowns, their analytic first
//! and second derivatives, and a numerical log-concavity checker.
//!
//! For a theta parameter with Eyring loading `a_i` at group `i` the
//! conditional is
//!
//! ```text
//! l(v) = log_prior(v) - c v - sum_i exp(w_i - a_i v)
//! ```
//!
//! where `c` is the matching linear likelihood coefficient and `w_i` collects
//! `ln T_i`, the frozen thetas and `ln[(n_i - r_i) tau_i^beta + sum_j x_ij^beta]`.
//! Its derivatives are `log_prior' - c + sum_i a_i e_i` and
//! `log_prior'' - sum_i a_i^2 e_i`, so every data term in the second derivative
//! is non-positive. For beta the data terms are weighted by `ln x` and `ln^2 x`
//! and the `-sum r_i / beta^2` term appears.

use thiserror::Error;

use crate::data::SufficientStats;
use crate::model::{GewParams, Param};
use crate::posterior::theta_dot;
use crate::prior::{Prior, PriorConfig};
use crate::samplers::LogDensity1D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionalError {
    #[error("{param} = {value} is not in the open interior ({lo}, {hi}) of its support")]
    NotInterior {
        param: Param,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone)]
enum Terms {
    /// `(a_i, w_i)` per group, with `w_i = -inf` for groups with no exposure.
    Theta { coef: f64, groups: Vec<(f64, f64)> },
    /// `(ln alpha_i, n_i - r_i, ln tau_i, ln x_ij...)` per group.
    Beta {
        sum_r: f64,
        sum_ln_x: f64,
        groups: Vec<(f64, f64, f64, Vec<f64>)>,
    },
}

/// Snapshot of one full conditional: the other four parameters are frozen.
#[derive(Debug, Clone)]
pub struct ConditionalTarget {
    param: Param,
    state: GewParams,
    prior: Prior,
    lo: f64,
    hi: f64,
    closed_lo: bool,
    eligible: bool,
    terms: Terms,
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl ConditionalTarget {
    pub fn new(param: Param, state: GewParams, stats: &SufficientStats, prior: &PriorConfig) -> Self {
        let (lo, hi) = prior.support(param);
        let p = *prior.prior(param);
        let closed_lo = param != Param::Beta && !p.is_gamma();
        let beta = state.beta;
        let terms = match param {
            Param::Beta => Terms::Beta {
                sum_r: stats.sum_r,
                sum_ln_x: stats.sum_ln_x,
                groups: stats
                    .groups
                    .iter()
                    .map(|g| {
                        (
                            g.ln_temperature - theta_dot(&state, &g.loadings),
                            g.n_censored as f64,
                            g.ln_tau,
                            g.ln_failures.clone(),
                        )
                    })
                    .collect(),
            },
            _ => {
                let j = param.index();
                let frozen = state.with(param, 0.0);
                let groups = stats
                    .groups
                    .iter()
                    .map(|g| {
                        let censored = (g.n_censored > 0)
                            .then(|| (g.n_censored as f64).ln() + beta * g.ln_tau);
                        let exposure = log_sum_exp(
                            censored
                                .into_iter()
                                .chain(g.ln_failures.iter().map(|lx| beta * lx)),
                        );
                        let w = g.ln_temperature - theta_dot(&frozen, &g.loadings) + exposure;
                        (g.loadings[j], w)
                    })
                    .collect();
                Terms::Theta {
                    coef: stats.theta_coefficients()[j],
                    groups,
                }
            }
        };
        Self {
            param,
            state,
            prior: p,
            lo,
            hi,
            closed_lo,
            eligible: prior.param_eligible(param, stats),
            terms,
        }
    }

    pub fn param(&self) -> Param {
        self.param
    }

    /// Whether the log-concavity conditions hold for this conditional.
    pub fn ars_eligible(&self) -> bool {
        self.eligible
    }

    pub fn state(&self) -> &GewParams {
        &self.state
    }

    /// Support endpoints; the upper end is closed for uniform priors.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn in_support(&self, v: f64) -> bool {
        let above = if self.closed_lo { v >= self.lo } else { v > self.lo };
        above && v <= self.hi && v.is_finite()
    }

    pub fn is_interior(&self, v: f64) -> bool {
        v > self.lo && v < self.hi && v.is_finite()
    }

    /// Log conditional density up to a constant that does not depend on `v`;
    /// `-inf` outside the support.
    pub fn logpdf(&self, v: f64) -> f64 {
        if !self.in_support(v) {
            return f64::NEG_INFINITY;
        }
        let prior = self.prior.log_density(v);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        let data = match &self.terms {
            Terms::Theta { coef, groups } => {
                -coef * v - groups.iter().map(|(a, w)| (w - a * v).exp()).sum::<f64>()
            }
            Terms::Beta {
                sum_r,
                sum_ln_x,
                groups,
            } => {
                let hazard: f64 = groups
                    .iter()
                    .map(|(la, nc, lt, lx)| {
                        let c = if *nc > 0.0 { nc * (la + v * lt).exp() } else { 0.0 };
                        c + lx.iter().map(|l| (la + v * l).exp()).sum::<f64>()
                    })
                    .sum();
                let log_beta = if *sum_r == 0.0 { 0.0 } else { sum_r * v.ln() };
                log_beta + (v - 1.0) * sum_ln_x - hazard
            }
        };
        let out = prior + data;
        if out.is_nan() {
            f64::NEG_INFINITY
        } else {
            out
        }
    }

    fn check_interior(&self, v: f64) -> Result<(), ConditionalError> {
        if self.is_interior(v) {
            Ok(())
        } else {
            Err(ConditionalError::NotInterior {
                param: self.param,
                value: v,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// First and second derivative in one pass.
    pub fn derivatives(&self, v: f64) -> Result<(f64, f64), ConditionalError> {
        self.check_interior(v)?;
        let (mut g, mut h) = (self.prior.grad(v), self.prior.hess(v));
        match &self.terms {
            Terms::Theta { coef, groups } => {
                g -= coef;
                for (a, w) in groups {
                    let e = (w - a * v).exp();
                    g += a * e;
                    h -= a * a * e;
                }
            }
            Terms::Beta {
                sum_r,
                sum_ln_x,
                groups,
            } => {
                g += sum_r / v + sum_ln_x;
                h -= sum_r / (v * v);
                for (la, nc, lt, lx) in groups {
                    if *nc > 0.0 {
                        let e = nc * (la + v * lt).exp();
                        g -= e * lt;
                        h -= e * lt * lt;
                    }
                    for l in lx {
                        let e = (la + v * l).exp();
                        g -= e * l;
                        h -= e * l * l;
                    }
                }
            }
        }
        Ok((g, h))
    }

    pub fn grad(&self, v: f64) -> Result<f64, ConditionalError> {
        self.derivatives(v).map(|d| d.0)
    }

    pub fn hess(&self, v: f64) -> Result<f64, ConditionalError> {
        self.derivatives(v).map(|d| d.1)
    }
}

impl LogDensity1D for ConditionalTarget {
    fn log_density(&self, x: f64) -> f64 {
        self.logpdf(x)
    }

    fn grad(&self, x: f64) -> f64 {
        self.derivatives(x).map_or(f64::NAN, |d| d.0)
    }

    fn hess(&self, x: f64) -> f64 {
        self.derivatives(x).map_or(f64::NAN, |d| d.1)
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn label(&self) -> String {
        self.param.to_string()
    }
}

/// Allowed positive slack on the second derivative.
pub const CONCAVITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    pub param: Param,
    /// Whether the eligibility conditions guarantee log-concavity.
    pub eligible: bool,
    pub points_checked: usize,
    /// `(point, second derivative)` wherever it exceeded the tolerance.
    pub violations: Vec<(f64, f64)>,
    pub max_hess: f64,
}

impl ConcavityReport {
    /// Violations only count against conditionals that are claimed log-concave.
    pub fn passed(&self) -> bool {
        !self.eligible || self.violations.is_empty()
    }
}

/// Evaluates the analytic second derivative at every interior grid point.
/// Non-interior grid points are skipped.
pub fn verify_log_concavity(t: &ConditionalTarget, grid: &[f64]) -> ConcavityReport {
    let mut report = ConcavityReport {
        param: t.param,
        eligible: t.eligible,
        points_checked: 0,
        violations: Vec::new(),
        max_hess: f64::NEG_INFINITY,
    };
    for &x in grid {
        let Ok(h) = t.hess(x) else { continue };
        report.points_checked += 1;
        report.max_hess = report.max_hess.max(h);
        if h > CONCAVITY_TOLERANCE || h.is_nan() {
            report.violations.push((x, h));
        }
    }
    report
}

/// Residuals of the analytic derivatives against five-point central
/// differences of [`ConditionalTarget::logpdf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeResidual {
    pub point: f64,
    pub grad: f64,
    pub grad_fd: f64,
    pub hess: f64,
    pub hess_fd: f64,
}

impl DerivativeResidual {
    /// Largest error, relative where the magnitudes allow it.
    pub fn scaled_error(&self, abs_floor: f64) -> f64 {
        let err = |a: f64, b: f64| {
            let d = (a - b).abs();
            if d <= abs_floor {
                0.0
            } else {
                d / a.abs().max(b.abs())
            }
        };
        err(self.grad, self.grad_fd).max(err(self.hess, self.hess_fd))
    }
}

/// The step starts from the local curvature. Truncation error dominates when
/// the hessian underflows and rounding dominates when `|logpdf|` is huge, so
/// steps around it are also tried and the closest agreement is kept.
pub fn derivative_residual(t: &ConditionalTarget, x: f64) -> Result<DerivativeResidual, ConditionalError> {
    let (grad, hess) = t.derivatives(x)?;
    let (lo, hi) = t.bounds();
    let base = (1e-2 / hess.abs().max(1e-12).sqrt()).min(0.1 * x.abs().max(1.0));
    let fit = |mut h: f64| {
        while !(x - 2.0 * h > lo && x + 2.0 * h < hi) {
            h *= 0.25;
            if h < 1e-300 {
                break;
            }
        }
        h
    };
    let at_step = |h: f64| {
        let f = |k: f64| t.logpdf(x + k * h);
        let (fm2, fm1, f0, fp1, fp2) = (f(-2.0), f(-1.0), f(0.0), f(1.0), f(2.0));
        DerivativeResidual {
            point: x,
            grad,
            grad_fd: (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h),
            hess,
            hess_fd: (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h),
        }
    };
    let best = [base, base * 8.0, base / 8.0, base / 64.0]
        .into_iter()
        .map(|h| at_step(fit(h)))
        .min_by(|a, b| a.scaled_error(1e-8).total_cmp(&b.scaled_error(1e-8)))
        .expect("candidate steps");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sufficient_stats, AltDataset, CensoringScheme, TestGroup};
    use crate::model::{StressLevel, VTransform};
    use crate::posterior::log_posterior;

    fn unit_stats(failures: Vec<f64>, n: usize, scheme: CensoringScheme) -> SufficientStats {
        let s = StressLevel::with_v(1.0, 1.0, 0.0).unwrap();
        let g = TestGroup::new("a", s, n, failures, scheme).unwrap();
        sufficient_stats(&AltDataset::new(vec![g], s, VTransform::Identity).unwrap())
    }

    fn two_group_stats() -> SufficientStats {
        let a = StressLevel::new(350.0, 0.3, VTransform::Log).unwrap();
        let b = StressLevel::new(390.0, 0.8, VTransform::Log).unwrap();
        let ga = TestGroup::new("a", a, 5, vec![0.3, 0.8, 1.2], CensoringScheme::TypeI { tau: 2.0 }).unwrap();
        let gb = TestGroup::new("b", b, 3, vec![0.1, 0.25], CensoringScheme::TypeII { r: 2 }).unwrap();
        sufficient_stats(&AltDataset::new(vec![ga, gb], a, VTransform::Log).unwrap())
    }

    #[test]
    fn beta_conditional_at_unit_dataset() {
        let st = unit_stats(vec![1.5], 1, CensoringScheme::Complete);
        let c = PriorConfig::preset("GEW1").unwrap();
        let t = ConditionalTarget::new(Param::Beta, GewParams::new(0.0, 0.0, 0.0, 0.0, 1.0), &st, &c);
        assert!((t.logpdf(1.0) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn theta1_hessian_single_observation() {
        let st = unit_stats(vec![1.0], 1, CensoringScheme::Complete);
        let c = PriorConfig::new("wide", [Prior::Uniform { lo: -10.0, hi: 10.0 }; 5]).unwrap();
        let t = ConditionalTarget::new(Param::Theta1, GewParams::new(0.0, 0.0, 0.0, 0.0, 1.0), &st, &c);
        assert!((t.hess(0.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_beta_hessian_reduces_to_minus_inverse_square() {
        // shape 1, one failure at x = 1 (ln x = 0), no censoring
        let st = unit_stats(vec![1.0], 1, CensoringScheme::Complete);
        let c = PriorConfig::preset("GEW2_2").unwrap();
        let t = ConditionalTarget::new(Param::Beta, GewParams::new(1.0, 1.0, 1.0, 1.0, 2.0), &st, &c);
        assert!((t.hess(2.0).unwrap() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn boundary_is_a_domain_error() {
        let st = two_group_stats();
        let c = PriorConfig::preset("GEW1").unwrap();
        let t = ConditionalTarget::new(Param::Theta2, GewParams::new(1.0, 1.0, 1.0, 1.0, 2.0), &st, &c);
        assert!(matches!(t.grad(0.0), Err(ConditionalError::NotInterior { .. })));
        assert!(t.hess(100.0).is_err());
        assert!(t.grad(50.0).is_ok());
        assert_eq!(t.logpdf(-1e-9), f64::NEG_INFINITY);
        assert!(t.logpdf(0.0).is_finite());
    }

    #[test]
    fn conditional_differences_match_joint_posterior() {
        let st = two_group_stats();
        for name in ["GEW1", "GEW2_3", "GEW3", "GEW4"] {
            let c = PriorConfig::preset(name).unwrap();
            let state = GewParams::new(0.7, 3.0, 0.4, 1.1, 1.6);
            for p in Param::ALL {
                let t = ConditionalTarget::new(p, state, &st, &c);
                let (v1, v2) = (0.9, 2.3);
                let lhs = t.logpdf(v1) - t.logpdf(v2);
                let rhs = log_posterior(&state.with(p, v1), &st, &c)
                    - log_posterior(&state.with(p, v2), &st, &c);
                assert!((lhs - rhs).abs() < 1e-10, "{name} {p}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn shape_one_gamma_matches_uniform_up_to_linear_term() {
        let st = two_group_stats();
        let g = PriorConfig::new("g", [Prior::Gamma { shape: 1.0, rate: 0.25 }; 5]).unwrap();
        let u = PriorConfig::preset("GEW1").unwrap();
        let state = GewParams::new(0.7, 3.0, 0.4, 1.1, 1.6);
        let tg = ConditionalTarget::new(Param::Theta1, state, &st, &g);
        let tu = ConditionalTarget::new(Param::Theta1, state, &st, &u);
        for v in [0.5, 1.0, 4.0] {
            assert!((tg.logpdf(v) - (tu.logpdf(v) - 0.25 * v)).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_below_one_is_ineligible_and_convex_near_zero() {
        let st = two_group_stats();
        let mut c = PriorConfig::preset("GEW2_3").unwrap();
        c.priors[0] = Prior::Gamma { shape: 0.5, rate: 0.5 };
        let elig = c.ars_eligibility(&st);
        assert!(!elig.for_param(Param::Theta1));
        assert!(elig.for_param(Param::Theta2));
        let t = ConditionalTarget::new(Param::Theta1, GewParams::new(1.0, 1.0, 1.0, 1.0, 1.5), &st, &c);
        // (1 - c)/theta^2 = 0.5e6 dominates the bounded data terms at 1e-3
        let report = verify_log_concavity(&t, &[1e-3, 1e-2, 5.0]);
        assert!(!report.eligible);
        assert!(report.violations.iter().any(|(x, _)| *x == 1e-3));
        assert!(report.passed());
    }

    #[test]
    fn no_failures_means_ineligible() {
        let st = unit_stats(vec![], 3, CensoringScheme::TypeI { tau: 5.0 });
        let c = PriorConfig::preset("GEW1").unwrap();
        let e = c.ars_eligibility(&st);
        assert!(!e.all());
        assert!(e.reasons[0].contains("sum r_i >= 1"));
    }

    #[test]
    fn derivative_residuals_are_small() {
        let st = two_group_stats();
        let c = PriorConfig::preset("GEW2_4").unwrap();
        let state = GewParams::new(0.7, 3.0, 0.4, 1.1, 1.6);
        for p in Param::ALL {
            let t = ConditionalTarget::new(p, state, &st, &c);
            let r = derivative_residual(&t, state.get(p)).unwrap();
            assert!(r.scaled_error(1e-8) < 1e-5, "{p}: {r:?}");
        }
    }
}
