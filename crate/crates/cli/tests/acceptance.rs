//! Acceptance gate. Runs every criterion, prints one line each and exits
//! non-zero if any of them fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use gew_core::conditional::{derivative_residual, verify_log_concavity, ConditionalTarget};
use gew_core::data::{simulate_dataset, sufficient_stats, AltDataset, PlannedGroup, SufficientStats};
use gew_core::diagnostics::{dic, posterior_mean, scale_reduction, summarize};
use gew_core::inference::{default_time_grid, predictive_reliability};
use gew_core::model::{gew_log_pdf, gew_log_reliability};
use gew_core::posterior::log_likelihood;
use gew_core::prior::Prior;
use gew_core::samplers::{run_chains, slice_sample, ArsSampler, ChainPlan, GibbsSampler, LogDensity1D, SamplerConfig};
use gew_core::{
    default_start, deviance, CensoringScheme, ChainOutput, Execution, GewParams, Param, PriorConfig, VTransform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Normal as NormalDist};
use statrs::distribution::{ContinuousCDF, Gamma, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn derivative_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for prior in presets4() {
        for p in Param::ALL {
            for k in 0..100 {
                let stats = sufficient_stats(&random_dataset(&mut rng, 10_000 + k));
                let state = jitter(&mut rng, &TRUTH, 0.3);
                let x = interior_point(&mut rng, &prior, p, state.get(p));
                let t = ConditionalTarget::new(p, state, &stats, &prior);
                let r = derivative_residual(&t, x).map_err(|e| format!("{} {p}: {e}", prior.label))?;
                let e = r.scaled_error(1e-8);
                worst = worst.max(e);
                checked += 1;
                ensure(e < 1e-5, format!("{} {p} at {x}: {r:?}", prior.label))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1} s"))?;
    Ok(format!("{checked} states, worst scaled error {worst:.2e}, {secs:.1} s"))
}

/// Twenty datasets cycling through complete, type-I and type-II censoring.
fn concavity_datasets(rng: &mut ChaCha8Rng) -> Vec<AltDataset> {
    (0..20u64)
        .map(|k| {
            let n = rng.random_range(4..=20);
            let scheme = match k % 3 {
                0 => CensoringScheme::TypeI { tau: 0.2 },
                1 => CensoringScheme::TypeII { r: rng.random_range(1..=n) },
                _ => CensoringScheme::Complete,
            };
            let truth = jitter(rng, &TRUTH, 0.4);
            let plan: Vec<PlannedGroup> = four_group_plan(n, scheme);
            let d = simulate_dataset(&truth, &plan, stress(300.0, 0.2), VTransform::Log, 2000 + k).unwrap();
            assert!(d.total_failures() > 0);
            d
        })
        .collect()
}

fn concavity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let presets: Vec<PriorConfig> = ["GEW1", "GEW2_1", "GEW2_2", "GEW2_3", "GEW2_4", "GEW2_5", "GEW3", "GEW4"]
        .iter()
        .map(|n| PriorConfig::preset(n).unwrap())
        .collect();
    let datasets = concavity_datasets(&mut rng);
    let mut points = 0;
    let mut worst = f64::NEG_INFINITY;
    for d in &datasets {
        let stats = sufficient_stats(d);
        for prior in &presets {
            for p in Param::ALL {
                let state = jitter(&mut rng, &TRUTH, 0.5);
                let t = ConditionalTarget::new(p, state, &stats, prior);
                ensure(t.ars_eligible(), format!("{} {p} not eligible", prior.label))?;
                let (lo, hi) = t.bounds();
                let lo = lo.max(0.0);
                let (a, b) = (lo.max(1e-6).log10(), hi.min(1e4).log10());
                // Half the points log-uniform over many decades, half uniform near the bulk.
                let grid: Vec<f64> = (0..10_000)
                    .map(|i| {
                        let u: f64 = rng.random();
                        if i % 2 == 0 {
                            10f64.powf(a + u * (b - a))
                        } else {
                            lo + u * (hi.min(lo + 60.0) - lo)
                        }
                    })
                    .collect();
                let rep = verify_log_concavity(&t, &grid);
                ensure(rep.points_checked >= 9_000, format!("{} {p}: only {} interior", prior.label, rep.points_checked))?;
                if let Some(v) = rep.violations.first() {
                    return Err(format!("{} {p}: {} violations, e.g. {v:?}", prior.label, rep.violations.len()));
                }
                points += rep.points_checked;
                worst = worst.max(rep.max_hess);
            }
        }
    }
    Ok(format!("{points} points, 0 violations, max hessian {worst:.2e}"))
}

fn naive_log_likelihood(d: &AltDataset, p: &GewParams) -> f64 {
    d.groups
        .iter()
        .map(|g| {
            let f: f64 = g.failures.iter().map(|&x| gew_log_pdf(p, &g.stress, x).unwrap()).sum();
            let c = match g.censor_time() {
                Some(tau) if g.n_censored() > 0 => {
                    g.n_censored() as f64 * gew_log_reliability(p, &g.stress, tau).unwrap()
                }
                _ => 0.0,
            };
            f + c
        })
        .sum()
}

fn likelihood_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let d = random_dataset(&mut rng, 30_000 + k);
        let p = jitter(&mut rng, &TRUTH, 0.4);
        let fast = log_likelihood(&p, &sufficient_stats(&d));
        let slow = naive_log_likelihood(&d, &p);
        let err = (fast - slow).abs() / slow.abs().max(1.0);
        worst = worst.max(err);
        ensure(err <= 1e-10, format!("case {k}: {fast} vs {slow}"))?;
    }
    Ok(format!("1000 cases, worst relative error {worst:.2e}"))
}

struct GammaTarget {
    shape: f64,
    rate: f64,
}

impl LogDensity1D for GammaTarget {
    fn log_density(&self, x: f64) -> f64 {
        if x > 0.0 {
            (self.shape - 1.0) * x.ln() - self.rate * x
        } else {
            f64::NEG_INFINITY
        }
    }
    fn grad(&self, x: f64) -> f64 {
        (self.shape - 1.0) / x - self.rate
    }
    fn hess(&self, x: f64) -> f64 {
        -(self.shape - 1.0) / (x * x)
    }
    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

struct TruncNormal {
    lo: f64,
    hi: f64,
}

impl LogDensity1D for TruncNormal {
    fn log_density(&self, x: f64) -> f64 {
        if x >= self.lo && x <= self.hi {
            -0.5 * x * x
        } else {
            f64::NEG_INFINITY
        }
    }
    fn grad(&self, x: f64) -> f64 {
        -x
    }
    fn hess(&self, _: f64) -> f64 {
        -1.0
    }
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

const KS_DRAWS: usize = 100_000;
/// Slice transitions per kept draw.
const SLICE_THIN: usize = 5;

fn ars_draws<T: LogDensity1D>(t: &T, seed: u64) -> Result<Vec<f64>, String> {
    let cfg = SamplerConfig::default();
    let mut s = ArsSampler::new(t, &cfg, None).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..KS_DRAWS).map(|_| s.sample(&mut rng).map_err(|e| e.to_string())).collect()
}

fn slice_draws<T: LogDensity1D>(t: &T, start: f64, seed: u64) -> Result<Vec<f64>, String> {
    let cfg = SamplerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start;
    let mut out = Vec::with_capacity(KS_DRAWS);
    for _ in 0..KS_DRAWS {
        for _ in 0..SLICE_THIN {
            x = slice_sample(t, x, &cfg, &mut rng).map_err(|e| e.to_string())?;
        }
        out.push(x);
    }
    Ok(out)
}

fn prior_cdf(p: &Prior) -> Box<dyn Fn(f64) -> f64> {
    match *p {
        Prior::Uniform { lo, hi } => Box::new(move |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)),
        Prior::Gamma { shape, rate } => {
            let g = Gamma::new(shape, rate).unwrap();
            Box::new(move |x| g.cdf(x))
        }
    }
}

fn prior_draw(p: &Prior, rng: &mut ChaCha8Rng) -> f64 {
    match *p {
        Prior::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        Prior::Gamma { shape, rate } => GammaDist::new(shape, 1.0 / rate).unwrap().sample(rng),
    }
}

fn sampler_exactness() -> Outcome {
    let mut worst_ars = 0.0f64;
    let mut worst_slice = 0.0f64;
    for (i, shape) in [1.0, 2.5, 5.0].into_iter().enumerate() {
        let t = GammaTarget { shape, rate: 0.5 };
        let g = Gamma::new(shape, 0.5).unwrap();
        let d = ks_statistic(&ars_draws(&t, 40 + i as u64)?, |x| g.cdf(x));
        worst_ars = worst_ars.max(d);
        ensure(d < 0.01, format!("ars gamma({shape}): KS {d}"))?;
        let d = ks_statistic(&slice_draws(&t, shape / 0.5, 50 + i as u64)?, |x| g.cdf(x));
        worst_slice = worst_slice.max(d);
        ensure(d < 0.01, format!("slice gamma({shape}): KS {d}"))?;
    }
    let t = TruncNormal { lo: -0.5, hi: 2.0 };
    let n = Normal::new(0.0, 1.0).unwrap();
    let (a, b) = (n.cdf(-0.5), n.cdf(2.0));
    let cdf = |x: f64| (n.cdf(x) - a) / (b - a);
    let d = ks_statistic(&ars_draws(&t, 60)?, cdf);
    worst_ars = worst_ars.max(d);
    ensure(d < 0.01, format!("ars truncated normal: KS {d}"))?;
    let d = ks_statistic(&slice_draws(&t, 0.0, 61)?, cdf);
    worst_slice = worst_slice.max(d);
    ensure(d < 0.01, format!("slice truncated normal: KS {d}"))?;

    let empty = SufficientStats::empty();
    let mut worst_prior = 0.0f64;
    for name in ["GEW1", "GEW2_1", "GEW2_2", "GEW2_3", "GEW2_4", "GEW2_5", "GEW3", "GEW4"] {
        let prior = PriorConfig::preset(name).unwrap();
        let cfg = SamplerConfig { seed: 70, ..Default::default() };
        let mut init_rng = ChaCha8Rng::seed_from_u64(71);
        let n = 20_000;
        let mut out: Vec<[f64; 5]> = Vec::with_capacity(n);
        for i in 0..n {
            let init = GewParams::from_array(prior.priors.map(|p| prior_draw(&p, &mut init_rng)));
            let mut g = GibbsSampler::new(&empty, &prior, &cfg, init, i).map_err(|e| e.to_string())?;
            out.push(g.sweep().map_err(|e| e.to_string())?.params.to_array());
        }
        for p in Param::ALL {
            let col: Vec<f64> = out.iter().map(|a| a[p.index()]).collect();
            let d = ks_statistic(&col, prior_cdf(prior.prior(p)));
            worst_prior = worst_prior.max(d);
            ensure(d < 0.02, format!("prior-only {name} {p}: KS {d}"))?;
        }
    }
    Ok(format!(
        "KS ars {worst_ars:.4}, slice {worst_slice:.4} (< 0.01); prior-only sweep {worst_prior:.4} (< 0.02)"
    ))
}

fn fit(stats: &SufficientStats, prior: &PriorConfig, seed: u64, n_burn: usize, n_keep: usize) -> Result<ChainOutput, String> {
    let cfg = SamplerConfig { seed, ..Default::default() };
    let init = default_start(prior, stats);
    let plan = ChainPlan { n_burn, n_keep };
    let mut c = run_chains(stats, "", prior, &cfg, &[init], plan, Execution::Sequential).map_err(|e| e.to_string())?;
    Ok(c.remove(0))
}

fn recovery_dataset(seed: u64) -> SufficientStats {
    let d = simulate_dataset(&TRUTH, &four_group_plan(100, CensoringScheme::Complete), stress(300.0, 0.2), VTransform::Log, seed)
        .unwrap();
    sufficient_stats(&d)
}

fn recovery() -> Outcome {
    let start = Instant::now();
    let prior = PriorConfig::preset("GEW1").unwrap();
    let mut covered = 0;
    let mut rel_err = 0.0;
    for k in 0..10 {
        let stats = recovery_dataset(5000 + k);
        let c = fit(&stats, &prior, 500 + k, 5000, 20_000)?;
        let b = summarize(&[c]).map_err(|e| e.to_string())?[Param::Beta.index()];
        if b.q025 <= TRUTH.beta && TRUTH.beta <= b.q975 {
            covered += 1;
        }
        rel_err += (b.mean - TRUTH.beta).abs() / TRUTH.beta / 10.0;
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("beta covered {covered}/10, mean relative error {:.1}%, {secs:.0} s", 100.0 * rel_err);
    ensure(covered >= 8 && rel_err <= 0.15 && secs < 600.0, detail.clone())?;
    Ok(detail)
}

fn dic_identities() -> Outcome {
    let stats = fixture_stats();
    let prior = PriorConfig::preset("GEW2_3").unwrap();
    let chains: Vec<ChainOutput> = (0..3)
        .map(|i| fit(&stats, &prior, 600 + i, 500, 2000))
        .collect::<Result<_, _>>()?;
    let r = dic(&chains, &stats).map_err(|e| e.to_string())?;
    ensure(r.dic == r.d_bar + r.p_d, format!("dic {} != dbar + pD", r.dic))?;
    ensure(r.p_d == r.d_bar - r.d_hat, format!("pD {} != dbar - dhat", r.p_d))?;
    let mut total = 0.0;
    let mut n = 0.0;
    for c in &chains {
        for p in &c.draws {
            total += deviance(p, &stats);
            n += 1.0;
        }
    }
    let naive = total / n;
    ensure((r.d_bar - naive).abs() <= 1e-12 * r.d_bar.abs().max(1.0), format!("dbar {} vs naive {naive}", r.d_bar))?;
    let mean = posterior_mean(&chains).map_err(|e| e.to_string())?;
    ensure(r.d_hat == deviance(&mean, &stats), "dhat is not the deviance at the pooled mean")?;
    let single = dic(&[chain_from(vec![chains[0].draws[0]], &stats)], &stats).map_err(|e| e.to_string())?;
    ensure(single.p_d == 0.0, format!("single-draw pD {}", single.p_d))?;
    Ok(format!("DIC {:.3} = {:.3} + {:.3}; single-draw pD = 0", r.dic, r.d_bar, r.p_d))
}

fn gelman_rubin() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7007);
    let mut chain = |mean: f64| -> Vec<f64> {
        let d = NormalDist::new(mean, 1.0).unwrap();
        (0..5000).map(|_| d.sample(&mut rng)).collect()
    };
    let same: Vec<Vec<f64>> = (0..4).map(|_| chain(0.0)).collect();
    let apart = vec![chain(0.0), chain(0.0), chain(10.0), chain(10.0)];
    let a = scale_reduction("x", &same).map_err(|e| e.to_string())?.rhat;
    let b = scale_reduction("x", &apart).map_err(|e| e.to_string())?.rhat;
    let detail = format!("iid {a:.4} (< 1.05), offset {b:.2} (> 1.5)");
    ensure(a < 1.05 && b > 1.5, detail.clone())?;
    Ok(detail)
}

/// Closed-form `exp(-alpha t^beta)` at the use stress, computed independently.
fn closed_form_reliability(p: &GewParams, t: f64) -> f64 {
    let (temp, v) = (300.0f64, 0.2f64.ln());
    let alpha = temp * (-p.theta1 - p.theta2 / temp - p.theta3 * v - p.theta4 * v / temp).exp();
    (-alpha * t.powf(p.beta)).exp()
}

fn reliability() -> Outcome {
    let stats = fixture_stats();
    let prior = PriorConfig::preset("GEW2_3").unwrap();
    let a = fit(&stats, &prior, 800, 500, 3000)?.draws;
    let b = fit(&stats, &prior, 801, 500, 1000)?.draws;
    let u = stress(300.0, 0.2);
    let mut grid = vec![0.0];
    grid.extend(default_time_grid());
    let curve = predictive_reliability(&a, &u, &grid, Execution::Parallel).map_err(|e| e.to_string())?;
    ensure(curve.reliability[0] == 1.0, format!("R(0) = {}", curve.reliability[0]))?;
    ensure(curve.reliability.windows(2).all(|w| w[1] <= w[0]), "curve increases somewhere")?;

    let one = predictive_reliability(&a[..1], &u, &grid, Execution::Sequential).map_err(|e| e.to_string())?;
    let mut worst_single = 0.0f64;
    for (t, r) in grid.iter().zip(&one.reliability) {
        worst_single = worst_single.max((r - closed_form_reliability(&a[0], *t)).abs());
    }
    ensure(worst_single <= 1e-12, format!("M = 1 differs from closed form by {worst_single:e}"))?;

    let cb = predictive_reliability(&b, &u, &grid, Execution::Parallel).map_err(|e| e.to_string())?;
    let pooled: Vec<GewParams> = a.iter().chain(&b).copied().collect();
    let cp = predictive_reliability(&pooled, &u, &grid, Execution::Parallel).map_err(|e| e.to_string())?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut worst_pool = 0.0f64;
    for i in 0..grid.len() {
        let want = (na * curve.reliability[i] + nb * cb.reliability[i]) / (na + nb);
        worst_pool = worst_pool.max((cp.reliability[i] - want).abs());
    }
    ensure(worst_pool <= 1e-12, format!("pooled curve off by {worst_pool:e}"))?;
    Ok(format!(
        "R(0) = 1, monotone over {} points, M = 1 error {worst_single:.1e}, pooling error {worst_pool:.1e}",
        grid.len()
    ))
}

fn prior_dominance() -> Outcome {
    let d = simulate_dataset(
        &TRUTH,
        &four_group_plan(8, CensoringScheme::TypeI { tau: 0.3 }),
        stress(300.0, 0.2),
        VTransform::Log,
        9009,
    )
    .unwrap();
    let stats = sufficient_stats(&d);
    let mut means = Vec::new();
    for name in ["GEW2_3", "GEW2_4", "GEW2_5"] {
        let prior = PriorConfig::preset(name).unwrap();
        let c = fit(&stats, &prior, 900, 5000, 20_000)?;
        means.push(summarize(&[c]).map_err(|e| e.to_string())?[Param::Theta3.index()].mean);
    }
    let detail = format!(
        "theta3 posterior mean {:.3} -> {:.3} -> {:.3} (prior mean 5, variance 10 -> 5 -> 1)",
        means[0], means[1], means[2]
    );
    let toward = means.windows(2).all(|w| (w[1] - 5.0).abs() < (w[0] - 5.0).abs());
    ensure(toward, detail.clone())?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/four_group.csv");
    let run = |dir: &Path| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_gew"))
            .args(["fit", "--censoring", "type1", "--n-burn", "1000", "--n-keep", "5000", "--n-chains", "3", "-i"])
            .arg(&fixture)
            .arg("-o")
            .arg(dir)
            .env_remove("GEW_SEED")
            .env_remove("GEW_OUT_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&a)?;
    run(&b)?;
    let mut names: Vec<_> = fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut bytes = 0;
    for n in &names {
        let x = fs::read(a.join(n)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(n)).map_err(|e| format!("{n:?}: {e}"))?;
        ensure(x == y, format!("{n:?} differs"))?;
        bytes += x.len();
    }
    ensure(fs::read_dir(&b).map_err(|e| e.to_string())?.count() == names.len(), "different file sets")?;
    Ok(format!("{} files, {bytes} bytes identical", names.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("derivative suite", derivative_suite),
        ("log-concavity", concavity),
        ("likelihood oracle", likelihood_oracle),
        ("sampler exactness", sampler_exactness),
        ("parameter recovery", recovery),
        ("DIC identities", dic_identities),
        ("Gelman-Rubin", gelman_rubin),
        ("predictive reliability", reliability),
        ("prior dominance", prior_dominance),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
