//! Chain output, posterior summaries, DIC and the corrected potential scale
//! reduction factor.

use thiserror::Error;

use crate::data::SufficientStats;
use crate::model::{GewParams, Param};
use crate::posterior::deviance;
use crate::samplers::Method;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMeta {
    /// Prior preset label.
    pub model: String,
    pub family: String,
    pub seed: u64,
    pub chain_index: usize,
    pub method: Method,
    /// Parameters drawn by adaptive rejection sampling.
    pub ars_params: Vec<Param>,
    pub dataset_digest: String,
    pub n_burn: usize,
    pub n_keep: usize,
}

/// Retained draws of one chain with the deviance at each draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<GewParams>,
    pub deviance: Vec<f64>,
    pub meta: ChainMeta,
}

impl ChainOutput {
    pub fn column(&self, p: Param) -> Vec<f64> {
        self.draws.iter().map(|d| d.get(p)).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("no retained draws")]
    NoDraws,
    #[error("need at least 2 chains, got {0}")]
    TooFewChains(usize),
    #[error("need at least 2 draws per chain, got {0}")]
    TooFewDraws(usize),
    #[error("chains have different lengths ({0} vs {1})")]
    UnequalLengths(usize, usize),
    #[error("{0}: within-chain variance is zero")]
    ZeroWithinVariance(String),
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with an `n - 1` denominator.
fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Linear-interpolation quantile (R type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSummary {
    pub param: Param,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
    pub n: usize,
}

/// Posterior summaries from the pooled draws of all chains.
pub fn summarize(chains: &[ChainOutput]) -> Result<Vec<ParamSummary>, DiagnosticsError> {
    let n: usize = chains.iter().map(|c| c.draws.len()).sum();
    if n < 2 {
        return Err(DiagnosticsError::NoDraws);
    }
    Ok(Param::ALL
        .iter()
        .map(|&p| {
            let mut v: Vec<f64> = chains.iter().flat_map(|c| c.column(p)).collect();
            let m = mean(&v);
            let sd = var(&v).sqrt();
            v.sort_by(f64::total_cmp);
            ParamSummary {
                param: p,
                mean: m,
                sd,
                q025: quantile_sorted(&v, 0.025),
                median: quantile_sorted(&v, 0.5),
                q975: quantile_sorted(&v, 0.975),
                n,
            }
        })
        .collect())
}

pub fn posterior_mean(chains: &[ChainOutput]) -> Result<GewParams, DiagnosticsError> {
    let n: usize = chains.iter().map(|c| c.draws.len()).sum();
    if n == 0 {
        return Err(DiagnosticsError::NoDraws);
    }
    let mut acc = [0.0; 5];
    for d in chains.iter().flat_map(|c| &c.draws) {
        for (a, v) in acc.iter_mut().zip(d.to_array()) {
            *a += v;
        }
    }
    Ok(GewParams::from_array(acc.map(|a| a / n as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DicReport {
    /// Posterior mean deviance.
    pub d_bar: f64,
    /// Deviance at the posterior mean.
    pub d_hat: f64,
    pub p_d: f64,
    pub dic: f64,
}

/// Deviance information criterion from the pooled chains.
pub fn dic(chains: &[ChainOutput], stats: &SufficientStats) -> Result<DicReport, DiagnosticsError> {
    let devs: Vec<f64> = chains.iter().flat_map(|c| c.deviance.iter().copied()).collect();
    if devs.is_empty() {
        return Err(DiagnosticsError::NoDraws);
    }
    let d_bar = mean(&devs);
    let d_hat = deviance(&posterior_mean(chains)?, stats);
    let p_d = d_bar - d_hat;
    Ok(DicReport {
        d_bar,
        d_hat,
        p_d,
        dic: d_bar + p_d,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReduction {
    pub label: String,
    /// Degrees-of-freedom corrected factor.
    pub rhat: f64,
    pub rhat_uncorrected: f64,
    pub within: f64,
    pub between: f64,
    pub v_hat: f64,
    /// Estimated degrees of freedom of the pooled variance.
    pub df: f64,
    pub warning: Option<String>,
}

/// Corrected potential scale reduction factor for equal-length chains.
pub fn scale_reduction(label: &str, chains: &[Vec<f64>]) -> Result<ScaleReduction, DiagnosticsError> {
    let m = chains.len();
    if m < 2 {
        return Err(DiagnosticsError::TooFewChains(m));
    }
    let n = chains[0].len();
    if n < 2 {
        return Err(DiagnosticsError::TooFewDraws(n));
    }
    if let Some(c) = chains.iter().find(|c| c.len() != n) {
        return Err(DiagnosticsError::UnequalLengths(n, c.len()));
    }
    let (mf, nf) = (m as f64, n as f64);
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| var(c)).collect();
    let w = mean(&vars);
    if !(w > 0.0) {
        return Err(DiagnosticsError::ZeroWithinVariance(label.to_string()));
    }
    let b = nf * var(&means);
    let v_hat = (nf - 1.0) / nf * w + (1.0 + 1.0 / mf) * b / nf;

    let grand = mean(&means);
    let means_sq: Vec<f64> = means.iter().map(|x| x * x).collect();
    let var_v = ((nf - 1.0) / nf).powi(2) / mf * var(&vars)
        + ((mf + 1.0) / (mf * nf)).powi(2) * 2.0 / (mf - 1.0) * b * b
        + 2.0 * (mf + 1.0) * (nf - 1.0) / (mf * nf * nf) * (nf / mf)
            * (cov(&vars, &means_sq) - 2.0 * grand * cov(&vars, &means));
    let df = 2.0 * v_hat * v_hat / var_v;

    let ratio = v_hat / w;
    let mut warning = None;
    let factor = if df.is_infinite() && df > 0.0 {
        1.0
    } else if df.is_nan() || df <= 0.0 {
        warning = Some(format!(
            "{label}: degrees-of-freedom estimate {df} is unusable; reporting the uncorrected factor"
        ));
        1.0
    } else {
        (df + 3.0) / (df + 1.0)
    };
    if let Some(msg) = &warning {
        log::warn!("{msg}");
    }
    Ok(ScaleReduction {
        label: label.to_string(),
        rhat: (ratio * factor).sqrt(),
        rhat_uncorrected: ratio.sqrt(),
        within: w,
        between: b,
        v_hat,
        df,
        warning,
    })
}

/// Scale reduction of one parameter across the chains.
pub fn gelman_rubin_param(chains: &[ChainOutput], p: Param) -> Result<ScaleReduction, DiagnosticsError> {
    let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(p)).collect();
    scale_reduction(p.name(), &cols)
}

/// Scale reduction for each parameter across the chains.
pub fn gelman_rubin(chains: &[ChainOutput]) -> Result<Vec<ScaleReduction>, DiagnosticsError> {
    Param::ALL
        .iter()
        .map(|&p| gelman_rubin_param(chains, p))
        .collect()
}
