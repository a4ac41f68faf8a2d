mod common;

use common::*;
use gew_core::inference::{default_time_grid, predictive_reliability, reliability_quantile_band};
use gew_core::model::{eyring_alpha, weibull_log_reliability, WeibullParams};
use gew_core::{Execution, GewParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn closed_form(p: &GewParams, t: f64) -> f64 {
    let u = stress(300.0, 0.2);
    let w = WeibullParams::new(eyring_alpha(p, &u).unwrap(), p.beta).unwrap();
    weibull_log_reliability(&w, t).unwrap().exp()
}

#[test]
fn degenerate_and_two_draw_curves() {
    let u = stress(300.0, 0.2);
    let mut grid = vec![0.0];
    grid.extend(default_time_grid());
    let one = predictive_reliability(&[TRUTH], &u, &grid, Execution::Parallel).unwrap();
    assert_eq!(one.reliability[0], 1.0);
    for (t, r) in grid.iter().zip(&one.reliability) {
        assert!((r - closed_form(&TRUTH, *t)).abs() <= 1e-12);
    }
    let other = jitter(&mut ChaCha8Rng::seed_from_u64(2), &TRUTH, 0.1);
    let two = predictive_reliability(&[TRUTH, other], &u, &grid, Execution::Sequential).unwrap();
    for (i, t) in grid.iter().enumerate() {
        let want = 0.5 * (closed_form(&TRUTH, *t) + closed_form(&other, *t));
        assert!((two.reliability[i] - want).abs() <= 1e-12);
    }
    assert_eq!(two.draws, 2);
}

#[test]
fn pooled_curve_is_count_weighted_average() {
    let u = stress(300.0, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<GewParams> = (0..30).map(|_| jitter(&mut rng, &TRUTH, 0.1)).collect();
    let b: Vec<GewParams> = (0..70).map(|_| jitter(&mut rng, &TRUTH, 0.1)).collect();
    let grid = default_time_grid();
    let ca = predictive_reliability(&a, &u, &grid, Execution::Parallel).unwrap();
    let cb = predictive_reliability(&b, &u, &grid, Execution::Parallel).unwrap();
    let pooled: Vec<GewParams> = a.iter().chain(&b).copied().collect();
    let cp = predictive_reliability(&pooled, &u, &grid, Execution::Parallel).unwrap();
    for i in 0..grid.len() {
        let want = (30.0 * ca.reliability[i] + 70.0 * cb.reliability[i]) / 100.0;
        assert!((cp.reliability[i] - want).abs() <= 1e-12);
    }
}

#[test]
fn band_examples() {
    let u = stress(300.0, 0.2);
    let grid = default_time_grid();
    let flat = reliability_quantile_band(&[TRUTH; 5], &u, &grid, &[0.025, 0.975], Execution::Parallel).unwrap();
    assert_eq!(flat.values[0], flat.values[1]);

    let other = TRUTH.with(gew_core::Param::Beta, 2.5);
    let b = reliability_quantile_band(&[TRUTH, other], &u, &grid, &[0.0, 1.0], Execution::Parallel).unwrap();
    for (i, t) in grid.iter().enumerate() {
        let (x, y) = (closed_form(&TRUTH, *t), closed_form(&other, *t));
        assert_eq!(b.values[0][i], x.min(y));
        assert_eq!(b.values[1][i], x.max(y));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<GewParams> = (0..10_000).map(|_| jitter(&mut rng, &TRUTH, 0.05)).collect();
    let times = [10.0, 500.0, 2000.0];
    let m = reliability_quantile_band(&draws, &u, &times, &[0.5], Execution::Parallel).unwrap();
    for (i, t) in times.iter().enumerate() {
        let mut r: Vec<f64> = draws.iter().map(|p| closed_form(p, *t)).collect();
        r.sort_by(f64::total_cmp);
        let naive = 0.5 * (r[4999] + r[5000]);
        assert!((m.values[0][i] - naive).abs() <= 1e-15);
    }
}
