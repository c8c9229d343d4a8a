//! Bessel functions of the first kind of integer order.
//!
//! Small arguments (or orders large enough that the power series has no
//! cancellation) use the ascending series. Everything else goes through
//! Miller's backward recurrence normalized by `J0 + 2 * sum J2k = 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Highest order accepted by the public entry points.
pub const MAX_ORDER: usize = 128;

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEvalConfig {
    /// Below this argument the power series is always used.
    pub series_cutoff: f64,
    /// Extra orders above `n + ceil(x) + ceil(8 x^(1/3))` where the backward
    /// recurrence starts.
    pub miller_overshoot: usize,
    pub abs_tol: f64,
}

impl Default for BesselEvalConfig {
    fn default() -> Self {
        Self {
            series_cutoff: 2.0,
            miller_overshoot: 40,
            abs_tol: 1e-15,
        }
    }
}

impl BesselEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.series_cutoff > 0.0)
            || self.miller_overshoot < 10
            || !(self.abs_tol >= f64::EPSILON)
        {
            return Err(Error::InvalidParams(format!("bad bessel config {self:?}")));
        }
        Ok(())
    }
}

fn check_domain(n: usize, x: f64) -> Result<()> {
    if n > MAX_ORDER || !x.is_finite() || x < 0.0 {
        return Err(Error::BesselDomain { order: n, x });
    }
    Ok(())
}

/// `J_n(x)` with the default configuration.
pub fn bessel_j(n: usize, x: f64) -> Result<f64> {
    check_domain(n, x)?;
    Ok(jn_with(n, x, &BesselEvalConfig::default()))
}

pub fn bessel_j_with(n: usize, x: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    check_domain(n, x)?;
    cfg.validate()?;
    Ok(jn_with(n, x, cfg))
}

/// `J_n'(x)`, from `J_n' = (J_{n-1} - J_{n+1}) / 2` and `J_0' = -J_1`.
pub fn bessel_j_prime(n: usize, x: f64) -> Result<f64> {
    check_domain(n, x)?;
    let cfg = BesselEvalConfig::default();
    Ok(jn_prime_with(n, x, &cfg))
}

pub(crate) fn jn_prime_with(n: usize, x: f64, cfg: &BesselEvalConfig) -> f64 {
    if n == 0 {
        -jn_with(1, x, cfg)
    } else {
        0.5 * (jn_with(n - 1, x, cfg) - jn_with(n + 1, x, cfg))
    }
}

/// `J_0(x) .. J_max_order(x)` in one pass. Orders above [`MAX_ORDER`] are
/// allowed here since callers also need `J_{n+1}` for derivatives.
pub fn bessel_j_all(max_order: usize, x: f64) -> Result<Vec<f64>> {
    if max_order > MAX_ORDER + 1 || !x.is_finite() || x < 0.0 {
        return Err(Error::BesselDomain {
            order: max_order,
            x,
        });
    }
    Ok(jn_all_with(max_order, x, &BesselEvalConfig::default()))
}

pub(crate) fn jn_all_with(max_order: usize, x: f64, cfg: &BesselEvalConfig) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; max_order + 1];
        out[0] = 1.0;
        return out;
    }
    if x < cfg.series_cutoff {
        return (0..=max_order).map(|n| series(n, x)).collect();
    }
    miller_all(max_order, x, cfg.miller_overshoot)
}

pub(crate) fn jn_with(n: usize, x: f64, cfg: &BesselEvalConfig) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    // Terms decrease from the first one when (x/2)^2 < n + 1.
    if x < cfg.series_cutoff || 0.25 * x * x < (n + 1) as f64 {
        series(n, x)
    } else {
        miller_single(n, x, cfg.miller_overshoot)
    }
}

fn series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for i in 1..=n {
        term *= half / i as f64;
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = -half * half;
    let mut sum = term;
    for k in 1..500 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

// The x^(1/3) term tracks the width of the turning-point region; without it
// the start order is too low once x approaches 100.
fn miller_start(n: usize, x: f64, overshoot: usize) -> usize {
    let start = n + overshoot + x.ceil() as usize + (8.0 * x.cbrt()).ceil() as usize;
    start + (start & 1)
}

fn miller_single(n: usize, x: f64, overshoot: usize) -> f64 {
    let start = miller_start(n, x, overshoot);
    let two_over_x = 2.0 / x;
    let mut above = 0.0;
    let mut cur = 1.0;
    let mut norm = 0.0;
    let mut target = 0.0;
    for k in (1..=start).rev() {
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k == n {
            target = cur;
        }
        let below = k as f64 * two_over_x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            target *= RESCALE_BY;
        }
    }
    norm += cur;
    if n == 0 {
        target = cur;
    }
    target / norm
}

fn miller_all(max_order: usize, x: f64, overshoot: usize) -> Vec<f64> {
    let start = miller_start(max_order, x, overshoot);
    let two_over_x = 2.0 / x;
    let mut out = vec![0.0; max_order + 1];
    let mut above = 0.0;
    let mut cur = 1.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k <= max_order {
            out[k] = cur;
        }
        let below = k as f64 * two_over_x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            for v in out.iter_mut() {
                *v *= RESCALE_BY;
            }
        }
    }
    norm += cur;
    out[0] = cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// McMahon's large-zero estimate of `j_{n,k}`.
pub fn mcmahon_estimate(n: usize, k: usize) -> f64 {
    let beta = (k as f64 + 0.5 * n as f64 - 0.25) * PI;
    let mu = 4.0 * (n * n) as f64;
    beta - (mu - 1.0) / (8.0 * beta)
}

/// The k-th positive zero of `J_n`.
///
/// Zeros are bracketed by a sign-change scan starting at `x = n` (the
/// first zero exceeds `n`, and consecutive zeros are never closer than
/// 3), then polished by Newton from the McMahon estimate with bisection
/// whenever an iterate leaves the bracket.
pub fn bessel_j_zero(n: usize, k: usize) -> Result<f64> {
    if n > 64 || k == 0 || k > 64 {
        return Err(Error::BesselDomain {
            order: n,
            x: k as f64,
        });
    }
    let cfg = BesselEvalConfig::default();
    let f = |x: f64| jn_with(n, x, &cfg);

    const SCAN_STEP: f64 = 0.25;
    let mut lo = (n as f64).max(1e-3);
    let mut f_lo = f(lo);
    let mut found = 0;
    let (mut a, mut b, mut fa) = loop {
        let hi = lo + SCAN_STEP;
        let f_hi = f(hi);
        if f_hi == 0.0 || f_lo.signum() != f_hi.signum() {
            found += 1;
            if found == k {
                break (lo, hi, f_lo);
            }
        }
        lo = hi;
        f_lo = f_hi;
    };

    let mut x = mcmahon_estimate(n, k);
    if !(x > a && x < b) {
        x = 0.5 * (a + b);
    }
    for _ in 0..100 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = jn_prime_with(n, x, &cfg);
        let mut next = x - fx / d;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        let done = (next - x).abs() <= 4.0 * f64::EPSILON * x;
        x = next;
        if done {
            break;
        }
    }
    let residual = f(x).abs();
    if residual > 1e-11 {
        return Err(Error::ZeroNonConvergence {
            order: n,
            index: k,
            residual,
        });
    }
    Ok(x)
}
