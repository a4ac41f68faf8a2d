#![allow(dead_code)]

use gew_core::data::{simulate_dataset, PlannedGroup};
use gew_core::{AltDataset, CensoringScheme, GewParams, Param, PriorConfig, StressLevel, VTransform};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TRUTH: GewParams = GewParams {
    theta1: 3.0,
    theta2: 7.0,
    theta3: 0.6,
    theta4: 0.6,
    beta: 1.95,
};

pub fn stress(t: f64, s: f64) -> StressLevel {
    StressLevel::new(t, s, VTransform::Log).unwrap()
}

pub fn four_group_plan(n: usize, scheme: CensoringScheme) -> Vec<PlannedGroup> {
    [(350.0, 0.5), (350.0, 0.85), (400.0, 0.5), (400.0, 0.85)]
        .iter()
        .map(|&(t, s)| PlannedGroup {
            stress: stress(t, s),
            n,
            scheme,
        })
        .collect()
}

/// A random small dataset with a random censoring scheme and at least one failure.
pub fn random_dataset(rng: &mut ChaCha8Rng, seed: u64) -> AltDataset {
    let truth = jitter(rng, &TRUTH, 0.3);
    let n = rng.random_range(3..=15);
    let k = rng.random_range(1..=4);
    let plan: Vec<PlannedGroup> = (0..k)
        .map(|i| {
            let scheme = match rng.random_range(0..3) {
                0 => CensoringScheme::Complete,
                1 => CensoringScheme::TypeI { tau: 0.15 },
                _ => CensoringScheme::TypeII {
                    r: rng.random_range(1..=n),
                },
            };
            PlannedGroup {
                stress: stress(330.0 + 20.0 * i as f64, 0.3 + 0.15 * i as f64),
                n,
                scheme,
            }
        })
        .collect();
    let d = simulate_dataset(&truth, &plan, stress(300.0, 0.2), VTransform::Log, seed).unwrap();
    if d.total_failures() == 0 {
        random_dataset(rng, seed + 1_000_000)
    } else {
        d
    }
}

/// Each coordinate scaled by a factor in `[1 - spread, 1 + spread]`.
pub fn jitter(rng: &mut ChaCha8Rng, p: &GewParams, spread: f64) -> GewParams {
    GewParams::from_array(p.to_array().map(|v| v * (1.0 + spread * (2.0 * rng.random::<f64>() - 1.0))))
}

pub fn presets4() -> Vec<PriorConfig> {
    ["GEW1", "GEW2_3", "GEW3", "GEW4"]
        .iter()
        .map(|n| PriorConfig::preset(n).unwrap())
        .collect()
}

/// A point of the conditional's support near the current value.
pub fn interior_point(rng: &mut ChaCha8Rng, prior: &PriorConfig, p: Param, around: f64) -> f64 {
    let (lo, hi) = prior.support(p);
    loop {
        let x = around * (0.5 + rng.random::<f64>());
        if x > lo && x < hi {
            return x;
        }
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn chain_from(draws: Vec<GewParams>, stats: &gew_core::SufficientStats) -> gew_core::ChainOutput {
    let deviance = draws.iter().map(|p| gew_core::deviance(p, stats)).collect();
    gew_core::ChainOutput {
        draws,
        deviance,
        meta: gew_core::diagnostics::ChainMeta {
            model: "test".into(),
            family: "GEW1".into(),
            seed: 0,
            chain_index: 0,
            method: gew_core::samplers::Method::Ars,
            ars_params: Vec::new(),
            dataset_digest: String::new(),
            n_burn: 0,
            n_keep: 0,
        },
    }
}

pub fn fixture_stats() -> gew_core::SufficientStats {
    let d = simulate_dataset(
        &TRUTH,
        &four_group_plan(10, CensoringScheme::TypeI { tau: 0.3 }),
        stress(300.0, 0.2),
        VTransform::Log,
        42,
    )
    .unwrap();
    gew_core::sufficient_stats(&d)
}
