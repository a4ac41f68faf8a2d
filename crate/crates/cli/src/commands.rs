//! Subcommand implementations.

use std::path::{Path, PathBuf};

use gew_core::conditional::{derivative_residual, verify_log_concavity, ConditionalTarget};
use gew_core::data::{
    load_dataset, save_dataset, simulate_dataset, sufficient_stats, AltDataset, CensoringKind, PlannedGroup,
    SufficientStats,
};
use gew_core::diagnostics::{dic, gelman_rubin_param, summarize as summary_rows, ChainOutput, ScaleReduction};
use gew_core::inference::{predictive_reliability, reliability_quantile_band};
use gew_core::samplers::{run_chains, ChainPlan, GibbsSampler};
use gew_core::{default_start, CensoringScheme, Execution, GewParams, Param, PriorConfig, StressLevel};
use log::warn;

use crate::config::{RunConfig, MANIFEST_HEADER};
use crate::output::{self, Staging};
use crate::{CheckArgs, CliError, SimulateArgs, StoredArgs};

fn load(cfg: &RunConfig) -> Result<(AltDataset, SufficientStats), CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("no input dataset given (--input or `input =`)".into()))?;
    let d = load_dataset(input, &cfg.load_options())?;
    let mut stats = sufficient_stats(&d);
    if !cfg.temperature_factor {
        stats = stats.without_temperature_factor();
    }
    Ok((d, stats))
}

/// Scale reduction per parameter; degenerate parameters are reported as NaN.
fn scale_reductions(chains: &[ChainOutput]) -> Option<Vec<ScaleReduction>> {
    if chains.len() < 2 {
        return None;
    }
    Some(
        Param::ALL
            .iter()
            .map(|&p| {
                gelman_rubin_param(chains, p).unwrap_or_else(|e| {
                    warn!("scale reduction unavailable for {p}: {e}");
                    ScaleReduction {
                        label: p.to_string(),
                        rhat: f64::NAN,
                        rhat_uncorrected: f64::NAN,
                        within: f64::NAN,
                        between: f64::NAN,
                        v_hat: f64::NAN,
                        df: f64::NAN,
                        warning: Some(e.to_string()),
                    }
                })
            })
            .collect(),
    )
}

fn pooled(chains: &[ChainOutput]) -> Vec<GewParams> {
    chains.iter().flat_map(|c| c.draws.iter().copied()).collect()
}

fn reliability_report(cfg: &RunConfig, model: &str, draws: &[GewParams], use_level: &StressLevel) -> Result<String, CliError> {
    let times = cfg.grid.times();
    let curve = predictive_reliability(draws, use_level, &times, Execution::Parallel)?;
    let band = reliability_quantile_band(draws, use_level, &times, &cfg.band_levels, Execution::Parallel)?;
    Ok(output::reliability_csv(cfg, model, &curve, &band))
}

/// Runs the sampler and writes every artifact to `cfg.out_dir`.
pub fn fit(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let (d, stats) = load(cfg)?;
    let prior = cfg.prior_config()?;
    let init = cfg.init.unwrap_or_else(|| {
        let start = default_start(&prior, &stats);
        if start != prior.default_init() {
            warn!(
                "the prior centres give a non-finite posterior; starting beta at 1. \
                 Vague priors mix slowly from their centres, so consider setting `init`"
            );
        }
        start
    });
    let inits = vec![init; cfg.n_chains];
    let exec = Execution::Workers(cfg.workers.unwrap_or(cfg.n_chains));
    let digest = d.digest();
    let plan = ChainPlan {
        n_burn: cfg.n_burn,
        n_keep: cfg.n_keep,
    };
    let chains = run_chains(&stats, &digest, &prior, &cfg.sampler, &inits, plan, exec)?;

    let model = prior.label.as_str();
    let mut st = Staging::new(&cfg.out_dir)?;
    for c in &chains {
        st.write(&format!("chain_{}.csv", c.meta.chain_index), &output::chain_csv(cfg, c))?;
    }
    let rows = summary_rows(&chains)?;
    let rhat = scale_reductions(&chains);
    let dic = dic(&chains, &stats)?;
    st.write("summary.csv", &output::summary_csv(cfg, model, &rows, rhat.as_deref()))?;
    st.write(
        "summary.txt",
        &output::summary_text(cfg, model, &rows, rhat.as_deref(), Some(&dic)),
    )?;
    st.write("dic.csv", &output::dic_csv(cfg, model, &dic))?;
    if let Some(r) = &rhat {
        st.write("gelman_rubin.csv", &output::gelman_rubin_csv(cfg, model, r))?;
    }
    st.write(
        "reliability.csv",
        &reliability_report(cfg, model, &pooled(&chains), &d.use_stress)?,
    )?;

    let mut manifest = format!("{MANIFEST_HEADER}\n");
    manifest.push_str(&output::header(cfg, model));
    manifest.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    manifest.push_str(&cfg.render());
    manifest.push_str(&format!("dataset_digest = {digest}\n"));
    for (name, sha) in st.digests() {
        manifest.push_str(&format!("sha256.{name} = {sha}\n"));
    }
    st.write("manifest.txt", &manifest)?;
    let dir = st.commit()?;
    log::info!("wrote {}", dir.display());
    Ok(dir)
}

fn numbers(what: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{what}: `{x}` is not a number")))
        })
        .collect()
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = a.run.resolve(RunConfig::default())?;
    let t = numbers("--truth", &a.truth)?;
    let truth: [f64; 5] = t
        .try_into()
        .map_err(|_| CliError::Usage("--truth needs theta1,theta2,theta3,theta4,beta".into()))?;
    let scheme = match cfg.censoring {
        CensoringKind::Complete => CensoringScheme::Complete,
        CensoringKind::TypeI => CensoringScheme::TypeI {
            tau: a
                .tau
                .ok_or_else(|| CliError::Usage("type-I censoring needs --tau".into()))?,
        },
        CensoringKind::TypeII => CensoringScheme::TypeII {
            r: a
                .failures
                .ok_or_else(|| CliError::Usage("type-II censoring needs --failures".into()))?,
        },
    };
    let plan = a
        .groups
        .iter()
        .map(|g| {
            let v = numbers("--group", g)?;
            if v.len() != 3 || v[2] < 1.0 || v[2].fract() != 0.0 {
                return Err(CliError::Usage(format!("--group expects T,S,n, got `{g}`")));
            }
            Ok(PlannedGroup {
                stress: StressLevel::new(v[0], v[1], cfg.v_transform).map_err(gew_core::data::DataError::from)?,
                n: v[2] as usize,
                scheme,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let d = simulate_dataset(
        &GewParams::from_array(truth),
        &plan,
        cfg.use_level()?,
        cfg.v_transform,
        cfg.sampler.seed,
    )?;
    save_dataset(&d, &a.output)?;
    println!(
        "wrote {} ({} groups, {} items, {} failures)",
        a.output.display(),
        d.groups.len(),
        d.total_items(),
        d.total_failures()
    );
    Ok(())
}

/// States at which to inspect the conditionals: draws from a short pilot
/// chain, so that they sit where the posterior puts its mass. Without failures
/// every conditional is slice-sampled.
fn check_states(cfg: &RunConfig, stats: &SufficientStats, prior: &PriorConfig, n: usize) -> Result<Vec<GewParams>, CliError> {
    let start = cfg.init.unwrap_or_else(|| default_start(prior, stats));
    let mut g = GibbsSampler::new(stats, prior, &cfg.sampler, start, 0)?;
    g.settle_slice_params();
    for _ in 0..cfg.n_burn.min(200) {
        g.sweep()?;
    }
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        states.push(g.sweep()?.params);
    }
    Ok(states)
}

pub fn check(a: &CheckArgs) -> Result<(), CliError> {
    let cfg = a.run.resolve(RunConfig::default())?;
    cfg.validate()?;
    let (d, stats) = load(&cfg)?;
    let prior = cfg.prior_config()?;
    let eligibility = prior.ars_eligibility(&stats);
    let states = check_states(&cfg, &stats, &prior, a.states.max(1))?;

    print!("{}", output::header(&cfg, &prior.label));
    println!(
        "dataset: {} groups, {} items, {} failures",
        d.groups.len(),
        d.total_items(),
        d.total_failures()
    );
    println!(
        "{:<8} {:>4} {:>9} {:>10} {:>13} {:>13}",
        "param", "ars", "points", "violations", "max hess", "worst deriv"
    );
    let mut failures = Vec::new();
    for p in Param::ALL {
        let (mut points, mut violations, mut max_hess, mut worst) = (0, 0, f64::NEG_INFINITY, 0.0f64);
        for s in &states {
            let t = ConditionalTarget::new(p, *s, &stats, &prior);
            let v = s.get(p);
            let grid: Vec<f64> = (0..a.points)
                .map(|k| 2.0 * v * (k as f64 + 0.5) / a.points as f64)
                .collect();
            let rep = verify_log_concavity(&t, &grid);
            points += rep.points_checked;
            max_hess = max_hess.max(rep.max_hess);
            if !rep.passed() {
                violations += rep.violations.len();
            }
            if let Ok(r) = derivative_residual(&t, v) {
                let e = r.scaled_error(1e-8);
                if e > worst {
                    log::debug!("{p}: worst derivative residual {r:?} at {s:?}");
                }
                worst = worst.max(e);
            }
        }
        let eligible = eligibility.for_param(p);
        println!(
            "{:<8} {:>4} {:>9} {:>10} {:>13.4e} {:>13.4e}",
            p.to_string(),
            if eligible { "yes" } else { "no" },
            points,
            violations,
            max_hess,
            worst
        );
        if violations > 0 {
            failures.push(format!("{p}: {violations} concavity violations"));
        }
        if worst.is_nan() || worst >= 1e-5 {
            failures.push(format!("{p}: derivative error {worst:e}"));
        }
    }
    for r in &eligibility.reasons {
        println!("ineligible for ARS: {r}");
    }
    if failures.is_empty() {
        println!("result: PASS");
        Ok(())
    } else {
        println!("result: FAIL");
        Err(CliError::CheckFailed(failures.join("; ")))
    }
}

/// Config of a stored run: its manifest, then the usual layering.
fn stored_config(a: &StoredArgs) -> Result<RunConfig, CliError> {
    let mut base = RunConfig::default();
    let manifest = a.chains_dir.join("manifest.txt");
    if manifest.exists() {
        let text = std::fs::read_to_string(&manifest).map_err(|e| CliError::io(&manifest, e))?;
        base.apply_text(&text, &manifest.display().to_string(), true)?;
    }
    a.run.resolve(base)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn predict(a: &StoredArgs) -> Result<(), CliError> {
    let cfg = stored_config(a)?;
    cfg.validate()?;
    let chains = output::read_chains(&a.chains_dir)?;
    let model = chains[0].meta.model.clone();
    let text = reliability_report(&cfg, &model, &pooled(&chains), &cfg.use_level()?)?;
    emit(a.output.as_deref(), &text)
}

pub fn summarize(a: &StoredArgs) -> Result<(), CliError> {
    let cfg = stored_config(a)?;
    let chains = output::read_chains(&a.chains_dir)?;
    let model = chains[0].meta.model.clone();
    let rows = summary_rows(&chains)?;
    let rhat = scale_reductions(&chains);
    let report = match load(&cfg) {
        Ok((d, stats)) => {
            if chains.iter().any(|c| c.meta.dataset_digest != d.digest()) {
                warn!("dataset digest differs from the one recorded in the chains");
            }
            Some(dic(&chains, &stats)?)
        }
        Err(e) => {
            warn!("DIC skipped: {e}");
            None
        }
    };
    let text = output::summary_text(&cfg, &model, &rows, rhat.as_deref(), report.as_ref());
    emit(a.output.as_deref(), &text)
}
