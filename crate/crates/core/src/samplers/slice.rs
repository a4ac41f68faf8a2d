//! Univariate slice sampling with the doubling procedure.

use rand::distr::Open01;
use rand::Rng;

use super::{LogDensity1D, SamplerConfig, SamplerError};

const SHRINK_LIMIT: usize = 10_000;

/// Whether `x1` could have produced the same doubled interval as `x0`.
fn acceptable<T: LogDensity1D + ?Sized>(t: &T, x0: f64, x1: f64, y: f64, w: f64, l: f64, r: f64) -> bool {
    let (mut l, mut r) = (l, r);
    let mut differ = false;
    while r - l > 1.1 * w {
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            // Far from the origin the interval can no longer be split.
            break;
        }
        if (x0 < m) != (x1 < m) {
            differ = true;
        }
        if x1 < m {
            r = m;
        } else {
            l = m;
        }
        if differ && y >= t.log_density(l) && y >= t.log_density(r) {
            return false;
        }
    }
    true
}

/// One slice-sampling transition from `current`. Leaves the target invariant.
pub fn slice_sample<T, R>(target: &T, current: f64, cfg: &SamplerConfig, rng: &mut R) -> Result<f64, SamplerError>
where
    T: LogDensity1D + ?Sized,
    R: Rng + ?Sized,
{
    let f0 = target.log_density(current);
    if !f0.is_finite() {
        return Err(SamplerError::NonFiniteStart {
            target: target.label(),
            at: current,
        });
    }
    let w = cfg.slice_width;
    let y = f0 + rng.sample::<f64, _>(Open01).ln();

    let mut l = current - w * rng.random::<f64>();
    let mut r = l + w;
    let (mut fl, mut fr) = (target.log_density(l), target.log_density(r));
    let mut doublings = 0;
    while y < fl || y < fr {
        if doublings == cfg.max_doublings {
            return Err(SamplerError::StepOutLimit {
                target: target.label(),
                limit: cfg.max_doublings,
            });
        }
        doublings += 1;
        if rng.random::<bool>() {
            l -= r - l;
            fl = target.log_density(l);
        } else {
            r += r - l;
            fr = target.log_density(r);
        }
    }

    let (mut lb, mut rb) = (l, r);
    for _ in 0..SHRINK_LIMIT {
        let x1 = lb + rng.random::<f64>() * (rb - lb);
        if y < target.log_density(x1) && acceptable(target, current, x1, y, w, l, r) {
            return Ok(x1);
        }
        if x1 < current {
            lb = x1;
        } else {
            rb = x1;
        }
        if rb - lb <= f64::EPSILON * current.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // The bracket collapsed onto the current point under rounding.
    Ok(current)
}
