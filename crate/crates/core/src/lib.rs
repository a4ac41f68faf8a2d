//! Bayesian accelerated life testing under a dual-stress generalized
//! Eyring–Weibull model.
//!
//! Failure times at temperature `T` and non-thermal stress `S` are Weibull
//! with reliability `R(x) = exp(-alpha x^beta)`, shape `beta` and
//! `alpha = T exp(-theta1 - theta2/T - theta3 V - theta4 V/T)`, `V = g(S)`.
//! The posterior under independent uniform or gamma priors is explored by a
//! Gibbs sampler whose full conditionals are drawn by adaptive rejection
//! sampling where they are provably log-concave, and by slice sampling
//! otherwise.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditional;
pub mod data;
pub mod diagnostics;
pub mod inference;
pub mod model;
pub mod parallel;
pub mod posterior;
pub mod prior;
pub mod samplers;

pub use conditional::{derivative_residual, verify_log_concavity, ConditionalTarget};
pub use data::{
    load_dataset, sufficient_stats, AltDataset, CensoringScheme, LoadOptions, SufficientStats, TestGroup,
};
pub use diagnostics::{dic, gelman_rubin, summarize, ChainOutput, DicReport};
pub use inference::{predictive_reliability, reliability_quantile_band, ReliabilityCurve};
pub use model::{GewParams, Param, StressLevel, VTransform};
pub use parallel::Execution;
pub use posterior::{default_start, deviance, log_likelihood, log_posterior, log_prior};
pub use prior::{Prior, PriorConfig};
pub use samplers::{gibbs_run, run_chains, SamplerConfig};
