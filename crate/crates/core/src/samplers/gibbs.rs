//! Gibbs sampler over (theta1, theta2, theta3, theta4, beta).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ars::locate_mode;
use super::{ArsSampler, LogDensity1D, Method, SamplerConfig, SamplerError};
use crate::conditional::ConditionalTarget;
use crate::data::{sufficient_stats, AltDataset, SufficientStats};
use crate::diagnostics::{ChainMeta, ChainOutput};
use crate::model::{GewParams, Param};
use crate::parallel::{map_indexed, Execution};
use crate::posterior::deviance;
use crate::prior::PriorConfig;

use super::slice::slice_sample;

/// Position of a chain: current parameters and completed sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsState {
    pub params: GewParams,
    pub iteration: u64,
}

/// Systematic-scan Gibbs sampler.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    stats: &'a SufficientStats,
    prior: &'a PriorConfig,
    cfg: SamplerConfig,
    use_ars: [bool; 5],
    state: GibbsState,
    rng: ChaCha8Rng,
}

/// Chain `i` draws from stream `i` of the generator seeded with `seed`.
pub fn chain_rng(seed: u64, chain_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_index as u64);
    rng
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        stats: &'a SufficientStats,
        prior: &'a PriorConfig,
        cfg: &SamplerConfig,
        init: GewParams,
        chain_index: usize,
    ) -> Result<Self, SamplerError> {
        cfg.validate()?;
        if !prior.in_support(&init) {
            return Err(SamplerError::InitOutsideSupport(format!("{init:?}")));
        }
        let eligible = prior.ars_eligibility(stats);
        let use_ars = Param::ALL.map(|p| cfg.method == Method::Ars && eligible.for_param(p));
        Ok(Self {
            stats,
            prior,
            cfg: *cfg,
            use_ars,
            state: GibbsState {
                params: init,
                iteration: 0,
            },
            rng: chain_rng(cfg.seed, chain_index),
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    /// Parameters updated by adaptive rejection sampling; the rest use slice sampling.
    pub fn ars_params(&self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|p| self.use_ars[p.index()]).collect()
    }

    fn update(&mut self, p: Param) -> Result<(), SamplerError> {
        let target = ConditionalTarget::new(p, self.state.params, self.stats, self.prior);
        let current = self.state.params.get(p);
        let next = if self.use_ars[p.index()] {
            ArsSampler::new(&target, &self.cfg, Some(current))?.sample(&mut self.rng)?
        } else {
            slice_sample(&target, current, &self.cfg, &mut self.rng)?
        };
        self.state.params.set(p, next);
        Ok(())
    }

    /// One full sweep in the order theta1, theta2, theta3, theta4, beta.
    pub fn sweep(&mut self) -> Result<&GibbsState, SamplerError> {
        let iteration = self.state.iteration;
        for p in Param::ALL {
            self.update(p).map_err(|e| SamplerError::AtIteration {
                iteration,
                param: p,
                source: Box::new(e),
            })?;
        }
        self.state.iteration += 1;
        Ok(&self.state)
    }

    /// Moves each slice-updated parameter to the mode of its full conditional,
    /// in update order. Slice moves change the log density by O(1) per sweep,
    /// so a start far out in a linear tail (a large gamma prior mean for beta
    /// at hour-scale data, say) would otherwise take astronomically many
    /// sweeps to come back. ARS parameters need no help: each draw is exact.
    /// This only changes the starting point, not the transition kernel.
    pub fn settle_slice_params(&mut self) {
        for p in Param::ALL {
            if self.use_ars[p.index()] {
                continue;
            }
            let t = ConditionalTarget::new(p, self.state.params, self.stats, self.prior);
            let (lo, hi) = t.support();
            let current = self.state.params.get(p);
            if let Ok((mode, _)) = locate_mode(&t, lo, hi, Some(current)) {
                if t.in_support(mode) && t.log_density(mode) > t.log_density(current) {
                    self.state.params.set(p, mode);
                }
            }
        }
    }
}

/// Burn-in and retained draw counts for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainPlan {
    pub n_burn: usize,
    pub n_keep: usize,
}

fn run_one(
    stats: &SufficientStats,
    digest: &str,
    prior: &PriorConfig,
    cfg: &SamplerConfig,
    init: GewParams,
    plan: ChainPlan,
    chain_index: usize,
) -> Result<ChainOutput, SamplerError> {
    let mut g = GibbsSampler::new(stats, prior, cfg, init, chain_index)?;
    if plan.n_burn > 0 {
        g.settle_slice_params();
    }
    for _ in 0..plan.n_burn {
        g.sweep()?;
    }
    let mut draws = Vec::with_capacity(plan.n_keep);
    let mut dev = Vec::with_capacity(plan.n_keep);
    for _ in 0..plan.n_keep {
        let p = g.sweep()?.params;
        draws.push(p);
        dev.push(deviance(&p, stats));
    }
    Ok(ChainOutput {
        draws,
        deviance: dev,
        meta: ChainMeta {
            model: prior.label.clone(),
            family: prior.family().to_string(),
            seed: cfg.seed,
            chain_index,
            method: cfg.method,
            ars_params: g.ars_params(),
            dataset_digest: digest.to_string(),
            n_burn: plan.n_burn,
            n_keep: plan.n_keep,
        },
    })
}

/// Runs one chain per initial value. Chain `i` uses random stream `i`, so the
/// output does not depend on the execution mode.
pub fn run_chains(
    stats: &SufficientStats,
    dataset_digest: &str,
    prior: &PriorConfig,
    cfg: &SamplerConfig,
    inits: &[GewParams],
    plan: ChainPlan,
    exec: Execution,
) -> Result<Vec<ChainOutput>, SamplerError> {
    if stats.sum_r < 1.0 {
        return Err(SamplerError::NoFailures);
    }
    cfg.validate()?;
    if cfg.method == Method::Ars {
        let e = prior.ars_eligibility(stats);
        if !e.all() {
            let slice: Vec<String> = Param::ALL
                .iter()
                .filter(|p| !e.for_param(**p))
                .map(|p| p.to_string())
                .collect();
            log::warn!(
                "slice sampling {} ({})",
                slice.join(", "),
                e.reasons.join("; ")
            );
        }
    }
    map_indexed(inits.len(), exec, |i| {
        run_one(stats, dataset_digest, prior, cfg, inits[i], plan, i)
    })
    .into_iter()
    .collect()
}

/// Single chain from `init` on a dataset.
pub fn gibbs_run(
    d: &AltDataset,
    prior: &PriorConfig,
    cfg: &SamplerConfig,
    init: GewParams,
    n_burn: usize,
    n_keep: usize,
) -> Result<ChainOutput, SamplerError> {
    let stats = sufficient_stats(d);
    let plan = ChainPlan { n_burn, n_keep };
    let mut out = run_chains(&stats, &d.digest(), prior, cfg, &[init], plan, Execution::Sequential)?;
    Ok(out.remove(0))
}
