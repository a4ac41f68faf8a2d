//! Tangent-based adaptive rejection sampling for log-concave densities.

use rand::distr::Open01;
use rand::Rng;

use super::{LogDensity1D, SamplerConfig, SamplerError};

const MODE_ITERATIONS: usize = 200;
const EXPANSIONS: usize = 200;

/// Piecewise-exponential upper hull built from tangents at the abscissae,
/// plus the chord-based squeeze.
#[derive(Debug, Clone)]
pub struct ArsEnvelope {
    xs: Vec<f64>,
    hs: Vec<f64>,
    gs: Vec<f64>,
    lo: f64,
    hi: f64,
    /// Tangent intersections; `z[0] = lo`, `z[k] = hi`.
    z: Vec<f64>,
    /// Normalised cumulative segment masses.
    cdf: Vec<f64>,
    label: String,
}

fn log_segment_mass(left: f64, right: f64, x: f64, h: f64, g: f64) -> f64 {
    let width = right - left;
    if width <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if g == 0.0 {
        h + width.ln()
    } else if g > 0.0 {
        h + g * (right - x) + (-(-g * width).exp_m1()).ln() - g.ln()
    } else {
        h + g * (left - x) + (-(g * width).exp_m1()).ln() - (-g).ln()
    }
}

impl ArsEnvelope {
    fn new(label: String, lo: f64, hi: f64) -> Self {
        Self {
            xs: Vec::new(),
            hs: Vec::new(),
            gs: Vec::new(),
            lo,
            hi,
            z: Vec::new(),
            cdf: Vec::new(),
            label,
        }
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.xs
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn insert(&mut self, x: f64, h: f64, g: f64) -> Result<bool, SamplerError> {
        let i = self.xs.partition_point(|&v| v < x);
        if self.xs.get(i) == Some(&x) {
            return Ok(false);
        }
        self.xs.insert(i, x);
        self.hs.insert(i, h);
        self.gs.insert(i, g);
        self.rebuild()?;
        Ok(true)
    }

    fn rebuild(&mut self) -> Result<(), SamplerError> {
        let k = self.xs.len();
        for i in 1..k {
            let (gl, gr) = (self.gs[i - 1], self.gs[i]);
            if gr > gl + 1e-7 * (gl.abs() + gr.abs()) + 1e-12 {
                return Err(SamplerError::ConcavityViolation {
                    target: self.label.clone(),
                    at: 0.5 * (self.xs[i - 1] + self.xs[i]),
                    left: gl,
                    right: gr,
                });
            }
        }
        self.z.clear();
        self.z.push(self.lo);
        for i in 0..k.saturating_sub(1) {
            let (x0, x1) = (self.xs[i], self.xs[i + 1]);
            let dg = self.gs[i] - self.gs[i + 1];
            let mut z = if dg > 0.0 {
                x0 + (self.hs[i + 1] - self.hs[i] - self.gs[i + 1] * (x1 - x0)) / dg
            } else {
                f64::NAN
            };
            if !z.is_finite() {
                z = 0.5 * (x0 + x1);
            }
            self.z.push(z.clamp(x0, x1));
        }
        self.z.push(self.hi);

        let masses: Vec<f64> = (0..k)
            .map(|j| log_segment_mass(self.z[j], self.z[j + 1], self.xs[j], self.hs[j], self.gs[j]))
            .collect();
        let top = masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(SamplerError::Bracketing {
                target: self.label.clone(),
                reason: format!("envelope mass is not finite (log mass {top})"),
            });
        }
        self.cdf.clear();
        let mut acc = 0.0;
        for m in &masses {
            acc += (m - top).exp();
            self.cdf.push(acc);
        }
        for c in &mut self.cdf {
            *c /= acc;
        }
        Ok(())
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.len();
        self.z[1..k].partition_point(|&z| z < x)
    }

    /// Upper hull at `x`.
    pub fn upper(&self, x: f64) -> f64 {
        let j = self.segment(x);
        self.hs[j] + self.gs[j] * (x - self.xs[j])
    }

    /// True when the hull slope at `x` exceeds one unit per float spacing.
    fn unresolved(&self, x: f64) -> bool {
        let g = self.gs[self.segment(x)];
        let spacing = (x.next_up() - x).max(x - x.next_down());
        (g * spacing).abs() > 1.0
    }

    /// Lower squeeze at `x`; `-inf` outside the abscissa range.
    pub fn squeeze(&self, x: f64) -> f64 {
        let k = self.xs.len();
        if k < 2 || x < self.xs[0] || x > self.xs[k - 1] {
            return f64::NEG_INFINITY;
        }
        let i = self.xs.partition_point(|&v| v <= x).clamp(1, k - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.hs[i - 1] + t * (self.hs[i] - self.hs[i - 1])
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c < u).min(self.xs.len() - 1);
        let (left, right) = (self.z[j], self.z[j + 1]);
        let g = self.gs[j];
        let v: f64 = rng.sample(Open01);
        let x = if g == 0.0 {
            left + v * (right - left)
        } else if g > 0.0 {
            right + ((1.0 - v) + v * (-g * (right - left)).exp()).ln() / g
        } else {
            left + ((1.0 - v) + v * (g * (right - left)).exp()).ln() / g
        };
        x.clamp(left, right)
    }
}

/// Adaptive rejection sampler holding an envelope that is refined across draws.
pub struct ArsSampler<'t, T: LogDensity1D + ?Sized> {
    target: &'t T,
    env: ArsEnvelope,
    max_points: usize,
}

fn interior(lo: f64, hi: f64, x: f64) -> bool {
    x > lo && x < hi && x.is_finite()
}

/// Walks outward from the end abscissa in direction `dir` until the tangent
/// points back toward the body of the density. Returns a cut point if the
/// density collapses to zero (non-finite log density) first; log-concave
/// support is convex, so nothing lies beyond it.
fn expand<T: LogDensity1D + ?Sized>(t: &T, env: &mut ArsEnvelope, scale: f64, dir: f64) -> Option<f64> {
    let outward = |env: &ArsEnvelope| {
        if dir < 0.0 {
            env.gs[0] <= 0.0
        } else {
            *env.gs.last().unwrap() >= 0.0
        }
    };
    let end = |env: &ArsEnvelope| if dir < 0.0 { env.xs[0] } else { *env.xs.last().unwrap() };
    let push = |env: &mut ArsEnvelope, x: f64, h: f64, g: f64| {
        if dir < 0.0 {
            env.xs.insert(0, x);
            env.hs.insert(0, h);
            env.gs.insert(0, g);
        } else {
            env.xs.push(x);
            env.hs.push(h);
            env.gs.push(g);
        }
    };
    let mut step = scale;
    while outward(env) {
        if step > f64::MAX / 4.0 {
            return None;
        }
        let x = end(env) + dir * step;
        step *= 2.0;
        let (h, g) = (t.log_density(x), t.grad(x));
        if h.is_finite() && g.is_finite() {
            push(env, x, h, g);
            continue;
        }
        // Collapsed between the end abscissa and x: bisect for finite points.
        let mut dead = x;
        for _ in 0..200 {
            let inner = end(env);
            let mid = 0.5 * (inner + dead);
            if mid == inner || mid == dead {
                break;
            }
            let (h, g) = (t.log_density(mid), t.grad(mid));
            if h.is_finite() && g.is_finite() {
                push(env, mid, h, g);
                if !outward(env) {
                    return None;
                }
            } else {
                dead = mid;
            }
        }
        return Some(dead);
    }
    None
}

fn start_point(lo: f64, hi: f64, hint: Option<f64>) -> f64 {
    match hint {
        Some(h) if interior(lo, hi, h) => h,
        _ => match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + lo.abs().max(1.0),
            (false, true) => hi - hi.abs().max(1.0),
            (false, false) => 0.0,
        },
    }
}

impl<'t, T: LogDensity1D + ?Sized> ArsSampler<'t, T> {
    /// Builds the initial envelope around the mode, searched from `hint`.
    pub fn new(target: &'t T, cfg: &SamplerConfig, hint: Option<f64>) -> Result<Self, SamplerError> {
        let label = target.label();
        let (lo, hi) = target.support();
        let fail = |reason: String| SamplerError::Bracketing {
            target: label.clone(),
            reason,
        };
        if !(lo < hi) {
            return Err(fail(format!("empty support ({lo}, {hi})")));
        }
        let (mode, scale) = locate_mode(target, lo, hi, hint).map_err(fail)?;

        let mut candidates = vec![mode];
        for dir in [-1.0, 1.0] {
            let mut x = mode + dir * scale;
            if !interior(lo, hi, x) {
                let bound = if dir < 0.0 { lo } else { hi };
                x = if bound.is_finite() { 0.5 * (mode + bound) } else { f64::NAN };
            }
            if interior(lo, hi, x) && x != mode {
                candidates.push(x);
            }
        }
        let mut env = ArsEnvelope::new(label.clone(), lo, hi);
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        for x in candidates {
            let (h, g) = (target.log_density(x), target.grad(x));
            if h.is_finite() && g.is_finite() {
                env.xs.push(x);
                env.hs.push(h);
                env.gs.push(g);
            }
        }
        if env.xs.is_empty() {
            return Err(fail(format!("density is not finite near the mode {mode}")));
        }
        // Unbounded ends need tangents that decay outward.
        if !lo.is_finite() {
            if let Some(cut) = expand(target, &mut env, scale, -1.0) {
                env.lo = cut;
            } else if env.gs[0] <= 0.0 {
                return Err(fail("no rising tangent found on the left".into()));
            }
        }
        if !hi.is_finite() {
            if let Some(cut) = expand(target, &mut env, scale, 1.0) {
                env.hi = cut;
            } else if *env.gs.last().unwrap() >= 0.0 {
                return Err(fail("no falling tangent found on the right".into()));
            }
        }
        env.rebuild()?;
        Ok(Self {
            target,
            env,
            max_points: cfg.ars_max_points.max(3),
        })
    }

    pub fn envelope(&self) -> &ArsEnvelope {
        &self.env
    }

    /// One exact draw. The envelope grows on each rejection until it holds
    /// `max_points` abscissae; after that, `max_points` further consecutive
    /// rejections raise [`SamplerError::EnvelopeBudget`].
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64, SamplerError> {
        let mut stalled = 0;
        loop {
            let x = self.env.sample(rng);
            let lw = rng.sample::<f64, _>(Open01).ln();
            let u = self.env.upper(x);
            if lw <= self.env.squeeze(x) - u {
                return Ok(x);
            }
            if self.env.unresolved(x) {
                // Adjacent floats differ by more than one unit of log density,
                // so the accept test would only compare rounding noise. The
                // draw rounded to float precision is `x` itself.
                return Ok(x);
            }
            let h = self.target.log_density(x);
            if h > u + 1e-8 * (1.0 + u.abs()) {
                return Err(SamplerError::ConcavityViolation {
                    target: self.env.label.clone(),
                    at: x,
                    left: u,
                    right: h,
                });
            }
            if lw <= h - u {
                return Ok(x);
            }
            if h == f64::NEG_INFINITY {
                let k = self.env.len();
                let beyond = x < self.env.xs[0] || x > self.env.xs[k - 1];
                if beyond {
                    // Zero density past the outer abscissa: cut the hull there.
                    if x < self.env.xs[0] {
                        self.env.lo = x;
                    } else {
                        self.env.hi = x;
                    }
                    self.env.rebuild()?;
                    continue;
                }
            }
            let refined = if self.env.len() < self.max_points && h.is_finite() {
                let g = self.target.grad(x);
                g.is_finite() && self.env.insert(x, h, g)?
            } else {
                false
            };
            if !refined {
                stalled += 1;
                if stalled > self.max_points {
                    return Err(SamplerError::EnvelopeBudget {
                        target: self.env.label.clone(),
                        points: self.env.len(),
                    });
                }
            }
        }
    }
}


/// Safeguarded Newton search for the mode. Returns the mode (or an interior
/// point next to the boundary when the density is monotone) and a length scale.
pub(crate) fn locate_mode<T: LogDensity1D + ?Sized>(
    t: &T,
    lo: f64,
    hi: f64,
    hint: Option<f64>,
) -> Result<(f64, f64), String> {
    let mut x = start_point(lo, hi, hint);
    let mut g = t.grad(x);
    if !g.is_finite() {
        return Err(format!("gradient is not finite at the start point {x}"));
    }
    // (a, b) brackets the mode: grad > 0 left of b's side, < 0 right of a's.
    let (mut a, mut b) = (lo, hi);
    if g > 0.0 {
        a = x;
        if !hi.is_finite() {
            let mut step = x.abs().max(1.0);
            let mut found = false;
            for _ in 0..EXPANSIONS {
                let y = x + step;
                let gy = t.grad(y);
                // A non-finite gradient means the density has collapsed
                // (overflow of the data terms), so the mode lies to the left.
                if !gy.is_finite() || gy <= 0.0 {
                    b = y;
                    found = true;
                    break;
                }
                a = y;
                step *= 2.0;
            }
            if !found {
                return Err("density keeps rising to the right".into());
            }
        }
    } else if g < 0.0 {
        b = x;
        if !lo.is_finite() {
            let mut step = x.abs().max(1.0);
            let mut found = false;
            for _ in 0..EXPANSIONS {
                let y = x - step;
                let gy = t.grad(y);
                if !gy.is_finite() || gy >= 0.0 {
                    a = y;
                    found = true;
                    break;
                }
                b = y;
                step *= 2.0;
            }
            if !found {
                return Err("density keeps rising to the left".into());
            }
        }
    }
    for _ in 0..MODE_ITERATIONS {
        if g == 0.0 {
            break;
        }
        let h = t.hess(x);
        let mut next = if h < 0.0 && h.is_finite() { x - g / h } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if !interior(lo, hi, next) || next == x {
            break;
        }
        let gn = t.grad(next);
        if !gn.is_finite() {
            // Too close to a singular boundary; pull back toward x.
            if next < x {
                a = next;
            } else {
                b = next;
            }
            continue;
        }
        let moved = (next - x).abs();
        x = next;
        g = gn;
        if g > 0.0 {
            a = x;
        } else if g < 0.0 {
            b = x;
        }
        if moved <= 1e-10 * x.abs().max(1.0) || (b - a) <= 1e-12 * x.abs().max(1.0) {
            break;
        }
    }
    let h = t.hess(x);
    let mut scale = if h < 0.0 && h.is_finite() {
        1.0 / (-h).sqrt()
    } else {
        f64::NAN
    };
    if !(scale.is_finite() && scale > 0.0) {
        scale = if g != 0.0 && g.is_finite() {
            1.0 / g.abs()
        } else if (hi - lo).is_finite() {
            0.25 * (hi - lo)
        } else {
            1.0
        };
    }
    let scale = scale.max(1e-12 * x.abs().max(1e-300));
    Ok((x, scale))
}

/// One exact draw from a log-concave target with a freshly built envelope.
pub fn ars_sample<T, R>(target: &T, cfg: &SamplerConfig, rng: &mut R) -> Result<f64, SamplerError>
where
    T: LogDensity1D + ?Sized,
    R: Rng + ?Sized,
{
    ArsSampler::new(target, cfg, None)?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Normal;
    impl LogDensity1D for Normal {
        fn log_density(&self, x: f64) -> f64 {
            -0.5 * x * x
        }
        fn grad(&self, x: f64) -> f64 {
            -x
        }
        fn hess(&self, _: f64) -> f64 {
            -1.0
        }
        fn support(&self) -> (f64, f64) {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    struct Exponential;
    impl LogDensity1D for Exponential {
        fn log_density(&self, x: f64) -> f64 {
            if x >= 0.0 {
                -2.0 * x
            } else {
                f64::NEG_INFINITY
            }
        }
        fn grad(&self, _: f64) -> f64 {
            -2.0
        }
        fn hess(&self, _: f64) -> f64 {
            0.0
        }
        fn support(&self) -> (f64, f64) {
            (0.0, f64::INFINITY)
        }
    }

    struct Bimodal;
    impl LogDensity1D for Bimodal {
        fn log_density(&self, x: f64) -> f64 {
            ((-0.5 * (x - 3.0).powi(2)).exp() + (-0.5 * (x + 3.0).powi(2)).exp()).ln()
        }
        fn grad(&self, x: f64) -> f64 {
            let (a, b) = ((-0.5 * (x - 3.0).powi(2)).exp(), (-0.5 * (x + 3.0).powi(2)).exp());
            (-(x - 3.0) * a - (x + 3.0) * b) / (a + b)
        }
        fn hess(&self, x: f64) -> f64 {
            let e = 1e-5;
            (self.grad(x + e) - self.grad(x - e)) / (2.0 * e)
        }
        fn support(&self) -> (f64, f64) {
            (-10.0, 10.0)
        }
    }

    #[test]
    fn hull_dominates_and_squeeze_is_below() {
        let cfg = SamplerConfig::default();
        let mut s = ArsSampler::new(&Normal, &cfg, Some(0.3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            s.sample(&mut rng).unwrap();
        }
        let env = s.envelope();
        assert!(env.len() > 3);
        for i in -400..=400 {
            let x = i as f64 / 50.0;
            let h = Normal.log_density(x);
            assert!(env.upper(x) >= h - 1e-12, "upper below at {x}");
            assert!(env.squeeze(x) <= h + 1e-12, "squeeze above at {x}");
        }
    }

    #[test]
    fn normal_moments() {
        let cfg = SamplerConfig::default();
        let mut s = ArsSampler::new(&Normal, &cfg, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40_000;
        let xs: Vec<f64> = (0..n).map(|_| s.sample(&mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn boundary_mode_exponential() {
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 40_000;
        let mean = (0..n)
            .map(|_| ars_sample(&Exponential, &cfg, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn non_concave_target_is_rejected() {
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut failed = false;
        for _ in 0..200 {
            let r = ArsSampler::new(&Bimodal, &cfg, Some(0.5)).and_then(|mut s| {
                for _ in 0..50 {
                    s.sample(&mut rng)?;
                }
                Ok(())
            });
            if matches!(r, Err(SamplerError::ConcavityViolation { .. })) {
                failed = true;
                break;
            }
        }
        assert!(failed);
    }

    #[test]
    fn segment_mass_matches_closed_form() {
        // int_0^1 e^{2x} dx = (e^2 - 1)/2
        let m = log_segment_mass(0.0, 1.0, 0.0, 0.0, 2.0);
        assert!((m - ((2f64.exp() - 1.0) / 2.0).ln()).abs() < 1e-14);
        let m = log_segment_mass(0.0, f64::INFINITY, 0.0, 0.0, -3.0);
        assert!((m - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        assert_eq!(log_segment_mass(0.0, 2.0, 1.0, 0.5, 0.0), 0.5 + 2f64.ln());
    }
}
