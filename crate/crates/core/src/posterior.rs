//! Censored log-likelihood, independent log-prior and joint log-posterior.

use crate::data::SufficientStats;
use crate::model::{GewParams, Param};
use crate::prior::PriorConfig;

/// Log-likelihood together with a flag raised when a cumulative-hazard term
/// overflowed (the likelihood is then reported as zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodEval {
    pub value: f64,
    pub overflow: bool,
}

pub(crate) fn theta_dot(p: &GewParams, loadings: &[f64; 4]) -> f64 {
    p.theta1 * loadings[0] + p.theta2 * loadings[1] + p.theta3 * loadings[2] + p.theta4 * loadings[3]
}

/// Total cumulative hazard `sum_i alpha_i [ (n_i - r_i) tau_i^beta + sum_j x_ij^beta ]`.
fn total_hazard(p: &GewParams, stats: &SufficientStats) -> f64 {
    let beta = p.beta;
    stats
        .groups
        .iter()
        .map(|g| {
            let log_alpha = g.ln_temperature - theta_dot(p, &g.loadings);
            let censored = if g.n_censored > 0 {
                g.n_censored as f64 * (log_alpha + beta * g.ln_tau).exp()
            } else {
                0.0
            };
            censored
                + g.ln_failures
                    .iter()
                    .map(|lx| (log_alpha + beta * lx).exp())
                    .sum::<f64>()
        })
        .sum()
}

pub fn log_likelihood_eval(p: &GewParams, stats: &SufficientStats) -> LikelihoodEval {
    if !(p.beta > 0.0) {
        return LikelihoodEval {
            value: f64::NEG_INFINITY,
            overflow: false,
        };
    }
    let [c1, c2, c3, c4] = stats.theta_coefficients();
    let linear = stats.sum_r * p.beta.ln()
        - p.theta1 * c1
        - p.theta2 * c2
        - p.theta3 * c3
        - p.theta4 * c4
        + (p.beta - 1.0) * stats.sum_ln_x
        + if stats.include_temperature_factor {
            stats.sum_r_ln_t
        } else {
            0.0
        };
    let hazard = total_hazard(p, stats);
    if !hazard.is_finite() {
        return LikelihoodEval {
            value: f64::NEG_INFINITY,
            overflow: true,
        };
    }
    LikelihoodEval {
        value: linear - hazard,
        overflow: false,
    }
}

pub fn log_likelihood(p: &GewParams, stats: &SufficientStats) -> f64 {
    log_likelihood_eval(p, stats).value
}

/// `-2 ln L`.
pub fn deviance(p: &GewParams, stats: &SufficientStats) -> f64 {
    -2.0 * log_likelihood(p, stats)
}

pub fn log_prior(p: &GewParams, c: &PriorConfig) -> f64 {
    if !(p.beta > 0.0) {
        return f64::NEG_INFINITY;
    }
    Param::ALL
        .iter()
        .map(|&q| c.prior(q).log_density(p.get(q)))
        .sum()
}

pub fn log_posterior(p: &GewParams, stats: &SufficientStats, c: &PriorConfig) -> f64 {
    let lp = log_prior(p, c);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + log_likelihood(p, stats)
}

/// Chain start used when none is given: prior means (gamma) or midpoints
/// (uniform). Vague gamma priors put beta at a mean like 1e5 where `x^beta`
/// overflows, so beta falls back to 1 whenever the posterior is not finite
/// at the centre.
pub fn default_start(prior: &PriorConfig, stats: &SufficientStats) -> GewParams {
    let mut p = prior.default_init();
    if !log_posterior(&p, stats, prior).is_finite() {
        let (lo, hi) = prior.support(Param::Beta);
        if 1.0 > lo && 1.0 <= hi {
            p.beta = 1.0;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sufficient_stats, AltDataset, CensoringScheme, TestGroup};
    use crate::model::{StressLevel, VTransform};
    use crate::prior::Prior;

    fn unit_stats(failures: Vec<f64>, n: usize, scheme: CensoringScheme) -> SufficientStats {
        let s = StressLevel::with_v(1.0, 1.0, 0.0).unwrap();
        let g = TestGroup::new("a", s, n, failures, scheme).unwrap();
        sufficient_stats(&AltDataset::new(vec![g], s, VTransform::Identity).unwrap())
    }

    #[test]
    fn single_exponential_observation() {
        let st = unit_stats(vec![1.5], 1, CensoringScheme::Complete);
        let p = GewParams::new(0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((log_likelihood(&p, &st) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn pure_survival_term() {
        let st = unit_stats(vec![], 1, CensoringScheme::TypeI { tau: 2.0 });
        let p = GewParams::new(0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((log_likelihood(&p, &st) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn overflow_is_flagged() {
        let st = unit_stats(vec![1e6], 1, CensoringScheme::Complete);
        let p = GewParams::new(0.0, 0.0, 0.0, 0.0, 80.0);
        let e = log_likelihood_eval(&p, &st);
        assert!(e.overflow);
        assert_eq!(e.value, f64::NEG_INFINITY);
    }

    #[test]
    fn prior_examples() {
        let gew1 = PriorConfig::preset("GEW1").unwrap();
        let p = GewParams::new(1.0, 2.0, 3.0, 4.0, 5.0);
        assert_eq!(log_prior(&p, &gew1), 0.0);
        assert_eq!(log_prior(&p.with(Param::Theta1, 150.0), &gew1), f64::NEG_INFINITY);
        let g = PriorConfig::new("g", [Prior::Gamma { shape: 2.5, rate: 0.5 }; 5]).unwrap();
        let ones = GewParams::new(1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((log_prior(&ones, &g) + 2.5).abs() < 1e-14);
    }

    #[test]
    fn posterior_is_prior_plus_likelihood() {
        let st = unit_stats(vec![0.4, 1.1, 2.5], 4, CensoringScheme::TypeI { tau: 3.0 });
        let gew1 = PriorConfig::preset("GEW1").unwrap();
        let gew3 = PriorConfig::preset("GEW3").unwrap();
        let p = GewParams::new(0.2, 1.0, 3.0, 0.5, 1.3);
        let lp = log_posterior(&p, &st, &gew1);
        assert!((lp - log_likelihood(&p, &st) - log_prior(&p, &gew1)).abs() < 1e-12);
        // the two presets differ only in the beta prior: gamma(1, 0.001) -> -0.001 beta
        let diff = log_posterior(&p, &st, &gew3) - lp;
        assert!((diff - (-0.001 * 1.3)).abs() < 1e-12);
        assert_eq!(log_posterior(&p.with(Param::Beta, -1.0), &st, &gew1), f64::NEG_INFINITY);
    }

    #[test]
    fn default_start_resets_overflowing_beta() {
        let st = unit_stats(vec![400.0, 900.0], 3, CensoringScheme::TypeI { tau: 1000.0 });
        let vague = PriorConfig::preset("GEW2_1").unwrap();
        let p = default_start(&vague, &st);
        assert_eq!(p.beta, 1.0);
        assert!((p.theta1 - 1e5).abs() < 1e-6);
        assert!(log_posterior(&p, &st, &vague).is_finite());
        let gew23 = PriorConfig::preset("GEW2_3").unwrap();
        assert_eq!(default_start(&gew23, &st), gew23.default_init());
    }
}
