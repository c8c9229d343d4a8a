//! The trial eigenfunction
//!
//! ```text
//! u(r, theta) = J_0(rho r) + sum_{k=1..N} P_k J_{ks}(rho r) cos(k s theta)
//! ```
//!
//! and its zero level set, written in polar form `r = r_u(theta)`. Every
//! term solves `-Lap u = rho^2 u`, so `rho^2` is an exact Dirichlet
//! eigenvalue of the region bounded by the zero set. Fitting that region to
//! a target shape happens in [`crate::fitter`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{self, BesselEvalConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetParams {
    pub rho: f64,
    /// `P_1 .. P_N`; the order-zero coefficient is pinned to 1.
    pub coeffs: Vec<f64>,
    pub sym_step: usize,
}

impl LevelSetParams {
    pub fn new(rho: f64, coeffs: Vec<f64>, sym_step: usize) -> Result<Self> {
        let p = Self {
            rho,
            coeffs,
            sym_step,
        };
        p.validate()?;
        Ok(p)
    }

    /// `J_0(j01 r)`: the unit-disk ground state.
    pub fn unit_circle(n_terms: usize, sym_step: usize) -> Result<Self> {
        let rho = specfun::bessel_j_zero(0, 1)?;
        Self::new(rho, vec![0.0; n_terms], sym_step)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidParams(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if self.sym_step == 0 {
            return Err(Error::InvalidParams("sym_step must be at least 1".into()));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
        if self.max_order() > specfun::MAX_ORDER {
            return Err(Error::InvalidParams(format!(
                "highest Bessel order {} exceeds {}",
                self.max_order(),
                specfun::MAX_ORDER
            )));
        }
        Ok(())
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn max_order(&self) -> usize {
        self.coeffs.len() * self.sym_step
    }

    pub fn eigenvalue(&self) -> f64 {
        self.rho * self.rho
    }

    /// Degrees of freedom as `[rho, P_1, .., P_N]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.coeffs.len());
        v.push(self.rho);
        v.extend_from_slice(&self.coeffs);
        v
    }

    pub fn with_vector(&self, v: &[f64]) -> Result<Self> {
        assert_eq!(v.len(), 1 + self.coeffs.len());
        Self::new(v[0], v[1..].to_vec(), self.sym_step)
    }

    fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.coeffs[k - 1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    /// Accepted `|u|` at a root.
    pub abs_tol: f64,
    pub max_newton: usize,
    /// Growth factor of the search bracket around the guess.
    pub bracket_expansion: f64,
    /// The bracket stops growing at `[guess / max_ratio, guess * max_ratio]`.
    pub max_ratio: f64,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            max_newton: 50,
            bracket_expansion: 1.1,
            max_ratio: 2.1,
        }
    }
}

impl RootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 1e-14)
            || self.max_newton < 8
            || !(self.bracket_expansion > 1.0)
            || !(self.max_ratio >= self.bracket_expansion)
        {
            return Err(Error::InvalidParams(format!("bad root config {self:?}")));
        }
        Ok(())
    }
}

/// Pointwise values needed by the fitter and the Hadamard correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEval {
    pub u: f64,
    pub u_r: f64,
    /// `du/dtheta` (not divided by r).
    pub u_theta: f64,
    pub du_drho: f64,
}

pub(crate) fn local_eval(params: &LevelSetParams, r: f64, theta: f64) -> LocalEval {
    let s = params.sym_step;
    let z = params.rho * r;
    let js = specfun::jn_all_with(params.max_order() + 1, z, &BesselEvalConfig::default());
    let mut out = LocalEval {
        u: 0.0,
        u_r: 0.0,
        u_theta: 0.0,
        du_drho: 0.0,
    };
    for k in 0..=params.n_terms() {
        let p = params.coeff(k);
        let m = k * s;
        let (sn, cs) = (m as f64 * theta).sin_cos();
        let j = js[m];
        let jp = if m == 0 {
            -js[1]
        } else {
            0.5 * (js[m - 1] - js[m + 1])
        };
        out.u += p * j * cs;
        out.u_r += p * params.rho * jp * cs;
        out.u_theta -= p * m as f64 * j * sn;
        out.du_drho += p * r * jp * cs;
    }
    out
}

pub fn eval_u(params: &LevelSetParams, r: f64, theta: f64) -> f64 {
    local_eval(params, r, theta).u
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGradient {
    pub u_r: f64,
    pub u_theta: f64,
    /// `u_r^2 + (u_theta / r)^2`.
    pub grad_norm_sq: f64,
}

pub fn grad_u_polar(params: &LevelSetParams, r: f64, theta: f64) -> Result<PolarGradient> {
    if !(r > 0.0) {
        return Err(Error::InvalidParams(format!(
            "gradient needs r > 0, got {r}"
        )));
    }
    let e = local_eval(params, r, theta);
    let t = e.u_theta / r;
    Ok(PolarGradient {
        u_r: e.u_r,
        u_theta: e.u_theta,
        grad_norm_sq: e.u_r * e.u_r + t * t,
    })
}

/// Root of `f` nearest to `guess`, where `f` returns `(value, derivative)`.
///
/// The bracket `[guess / g, guess * g]` grows by `cfg.bracket_expansion`
/// until one side shows a sign change or `g` reaches `cfg.max_ratio`.
pub(crate) fn find_root<F>(f: F, guess: f64, theta: f64, cfg: &RootConfig) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(guess > 0.0 && guess.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "root guess must be positive, got {guess}"
        )));
    }
    let f_guess = f(guess).0;
    if f_guess == 0.0 {
        return Ok(guess);
    }
    let (mut lo_prev, mut hi_prev) = ((guess, f_guess), (guess, f_guess));
    let mut ratio = 1.0;
    loop {
        ratio = (ratio * cfg.bracket_expansion).min(cfg.max_ratio);
        let lo = guess / ratio;
        let hi = guess * ratio;
        let f_lo = f(lo).0;
        let f_hi = f(hi).0;
        let below = crosses(lo_prev.1, f_lo).then_some((lo, f_lo, lo_prev.0, lo_prev.1));
        let above = crosses(hi_prev.1, f_hi).then_some((hi_prev.0, hi_prev.1, hi, f_hi));
        match (below, above) {
            (Some(a), Some(b)) => {
                let ra = polish(&f, a, theta, cfg);
                let rb = polish(&f, b, theta, cfg);
                return match (ra, rb) {
                    (Ok(x), Ok(y)) => Ok(if (x - guess).abs() <= (y - guess).abs() {
                        x
                    } else {
                        y
                    }),
                    (Ok(x), Err(_)) | (Err(_), Ok(x)) => Ok(x),
                    (Err(e), Err(_)) => Err(e),
                };
            }
            (Some(a), None) => return polish(&f, a, theta, cfg),
            (None, Some(b)) => return polish(&f, b, theta, cfg),
            (None, None) => {}
        }
        if ratio >= cfg.max_ratio {
            return Err(Error::NoRoot { theta, guess });
        }
        lo_prev = (lo, f_lo);
        hi_prev = (hi, f_hi);
    }
}

fn crosses(a: f64, b: f64) -> bool {
    a == 0.0 || b == 0.0 || a.signum() != b.signum()
}

/// Safeguarded Newton inside `(a, fa, b, fb)`; falls back to bisection
/// when an iterate leaves the bracket.
fn polish<F>(f: &F, bracket: (f64, f64, f64, f64), theta: f64, cfg: &RootConfig) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut fa, mut b, fb) = bracket;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut x = 0.5 * (a + b);
    let mut best = (f64::INFINITY, x);
    for _ in 0..cfg.max_newton {
        let (fx, dfx) = f(x);
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let mut next = x - fx / dfx;
        if !(next > a.min(b) && next < a.max(b)) {
            next = 0.5 * (a + b);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 2.0 * f64::EPSILON * x.abs() {
            break;
        }
    }
    let fx = f(x).0.abs();
    if fx < best.0 {
        best = (fx, x);
    }
    if best.0 <= cfg.abs_tol {
        return Ok(best.1);
    }
    // Newton stalled; finish by plain bisection down to rounding.
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m).0;
        if fm.abs() < best.0 {
            best = (fm.abs(), m);
        }
        if fm == 0.0 {
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    if best.0 <= cfg.abs_tol {
        Ok(best.1)
    } else {
        Err(Error::NonConvergence {
            theta,
            residual: best.0,
        })
    }
}

/// Zero-set radius along the ray at `theta`, nearest to `guess`.
pub fn levelset_radius(
    params: &LevelSetParams,
    theta: f64,
    guess: f64,
    cfg: &RootConfig,
) -> Result<f64> {
    find_root(
        |r| {
            let e = local_eval(params, r, theta);
            (e.u, e.u_r)
        },
        guess,
        theta,
        cfg,
    )
}

/// First zero crossing of `u` walking outward from the origin. For a
/// star-shaped zero set this is the boundary radius; no guess needed.
pub fn levelset_radius_from_origin(
    params: &LevelSetParams,
    theta: f64,
    cfg: &RootConfig,
) -> Result<f64> {
    let step = 0.1 / params.rho;
    let limit = 100.0 / params.rho;
    let f = |r: f64| {
        let e = local_eval(params, r, theta);
        (e.u, e.u_r)
    };
    let mut prev = (0.0, f(0.0).0);
    let mut r = step;
    while r <= limit {
        let fr = f(r).0;
        if crosses(prev.1, fr) {
            return polish(&f, (prev.0, prev.1, r, fr), theta, cfg);
        }
        prev = (r, fr);
        r += step;
    }
    Err(Error::NoRoot {
        theta,
        guess: limit,
    })
}

fn check_normal(theta: f64, e: &LocalEval) -> Result<()> {
    if e.u_r == 0.0 || e.u_r.abs() < 1e-12 * e.u_theta.abs() {
        return Err(Error::TangentialZero { theta, u_r: e.u_r });
    }
    Ok(())
}

/// `dr_u/dtheta = -u_theta / u_r` on the zero set.
pub fn levelset_radius_derivative(params: &LevelSetParams, theta: f64, r_u: f64) -> Result<f64> {
    let e = local_eval(params, r_u, theta);
    check_normal(theta, &e)?;
    Ok(-e.u_theta / e.u_r)
}

/// `d r_u / d p` for `p = [rho, P_1, .., P_N]`, by implicit differentiation
/// of `u(p, r_u(p)) = 0`.
pub fn radius_sensitivity(params: &LevelSetParams, theta: f64, r_u: f64) -> Result<Vec<f64>> {
    let e = local_eval(params, r_u, theta);
    check_normal(theta, &e)?;
    let mut out = Vec::with_capacity(1 + params.n_terms());
    out.push(-e.du_drho / e.u_r);
    out.extend(
        coefficient_partials(params, r_u, theta)
            .into_iter()
            .map(|d| -d / e.u_r),
    );
    Ok(out)
}

/// `du/dP_k = J_{ks}(rho r) cos(k s theta)` for `k = 1..N`.
pub(crate) fn coefficient_partials(params: &LevelSetParams, r: f64, theta: f64) -> Vec<f64> {
    let s = params.sym_step;
    let js = specfun::jn_all_with(
        params.max_order(),
        params.rho * r,
        &BesselEvalConfig::default(),
    );
    (1..=params.n_terms())
        .map(|k| js[k * s] * ((k * s) as f64 * theta).cos())
        .collect()
}
