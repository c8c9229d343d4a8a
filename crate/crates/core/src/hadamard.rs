//! First-order eigenvalue transport from the fitted region to the target.
//!
//! `rho^2` is the exact Dirichlet eigenvalue of the region bounded by the
//! zero set of `u`. Pushing that boundary out to the target with outward
//! normal displacement `C` changes the eigenvalue by
//! `-int C |grad psi|^2 dS`, where `psi = u / ||u||`.

use std::f64::consts::{PI, TAU};

use crate::domain::TargetShape;
use crate::error::{Error, Result};
use crate::fitter::{sample_boundary, QuadratureGrid};
use crate::levelset::{self, LevelSetParams, RootConfig};

/// Angular nodes used for the area integral in `||u||^2`.
pub const DEFAULT_AREA_ANGLES: usize = 128;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Arc-length density `sqrt(r_u^2 + (dr_u/dtheta)^2)` of the zero set.
pub fn boundary_arc_element(params: &LevelSetParams, theta: f64, r_u: f64) -> Result<f64> {
    let dr = levelset::levelset_radius_derivative(params, theta, r_u)?;
    Ok(r_u.hypot(dr))
}

/// `int_{Omega_u} u^2 dA` in polar coordinates: Gauss-Legendre in r on each
/// ray out to the zero set, trapezoid in theta.
pub fn l2_norm_sq(
    params: &LevelSetParams,
    n_radial: usize,
    n_angular: usize,
    cfg: &RootConfig,
) -> Result<f64> {
    scaled_l2_norm_sq(params, 1.0, n_radial, n_angular, cfg)
}

fn scaled_l2_norm_sq(
    params: &LevelSetParams,
    amplitude: f64,
    n_radial: usize,
    n_angular: usize,
    cfg: &RootConfig,
) -> Result<f64> {
    if n_radial == 0 || n_angular == 0 {
        return Err(Error::InvalidParams(
            "quadrature sizes must be positive".into(),
        ));
    }
    let (nodes, weights) = gauss_legendre(n_radial);
    let mut total = 0.0;
    for j in 0..n_angular {
        let theta = TAU * j as f64 / n_angular as f64;
        let r_u = levelset::levelset_radius_from_origin(params, theta, cfg)?;
        let half = 0.5 * r_u;
        let ray: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| {
                let r = half * (x + 1.0);
                let u = amplitude * levelset::eval_u(params, r, theta);
                w * u * u * r
            })
            .sum();
        total += half * ray;
    }
    Ok(total * TAU / n_angular as f64)
}

/// `u` scaled by `amplitude`, with its L2 norm over the zero-set region.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEigenfunction {
    pub params: LevelSetParams,
    pub amplitude: f64,
    pub l2_norm: f64,
}

impl NormalizedEigenfunction {
    pub fn new(
        params: LevelSetParams,
        amplitude: f64,
        n_radial: usize,
        n_angular: usize,
        cfg: &RootConfig,
    ) -> Result<Self> {
        if !(amplitude != 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParams(format!("bad amplitude {amplitude}")));
        }
        let l2_norm = scaled_l2_norm_sq(&params, amplitude, n_radial, n_angular, cfg)?.sqrt();
        Ok(Self {
            params,
            amplitude,
            l2_norm,
        })
    }

    /// `|grad psi|^2` at a point.
    pub fn grad_sq(&self, r: f64, theta: f64) -> Result<f64> {
        let g = levelset::grad_u_polar(&self.params, r, theta)?;
        let s = self.amplitude / self.l2_norm;
        Ok(s * s * g.grad_norm_sq)
    }

    /// `rho^2 - sum_j w_j C_j |grad psi|^2_j ds_j` over the grid, with
    /// `C_j = (R - r_u)(r_hat . N_hat)` the outward normal gap.
    pub fn corrected_eigenvalue(
        &self,
        shape: &TargetShape,
        grid: &QuadratureGrid,
        cfg: &RootConfig,
    ) -> Result<f64> {
        let samples = sample_boundary(&self.params, shape, grid, cfg)?;
        let mut integral = 0.0;
        for s in &samples {
            let c = s.gap() * s.radial_normal_cosine();
            let ds = boundary_arc_element(&self.params, s.theta, s.r_u)?;
            integral += c * self.grad_sq(s.r_u, s.theta)? * ds;
        }
        Ok(self.params.eigenvalue() - integral * grid.weight())
    }
}

pub fn hadamard_corrected_eigenvalue(
    params: &LevelSetParams,
    shape: &TargetShape,
    grid: &QuadratureGrid,
    n_radial: usize,
    cfg: &RootConfig,
) -> Result<f64> {
    let n_angular = DEFAULT_AREA_ANGLES.max(grid.m_angles);
    NormalizedEigenfunction::new(params.clone(), 1.0, n_radial, n_angular, cfg)?
        .corrected_eigenvalue(shape, grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_j;

    fn circle() -> LevelSetParams {
        LevelSetParams::unit_circle(0, 2).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 32] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            // exact through degree 2n - 1
            let deg = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn arc_element_on_circle() {
        let p = circle();
        let grid = QuadratureGrid::default();
        let mut length = 0.0;
        for t in grid.angles() {
            let ds = boundary_arc_element(&p, t, 1.0).unwrap();
            assert!((ds - 1.0).abs() < 1e-15);
            length += ds * grid.weight();
        }
        assert!((length - TAU).abs() < 1e-10);
    }

    #[test]
    fn perturbed_boundary_beats_equal_area_circle() {
        let p = LevelSetParams::new(2.6, vec![0.2, 0.01], 2).unwrap();
        let cfg = RootConfig::default();
        let grid = QuadratureGrid::new(256).unwrap();
        let (mut length, mut area) = (0.0, 0.0);
        for t in grid.angles() {
            let r = levelset::levelset_radius_from_origin(&p, t, &cfg).unwrap();
            length += boundary_arc_element(&p, t, r).unwrap() * grid.weight();
            area += 0.5 * r * r * grid.weight();
        }
        assert!(length > 2.0 * (PI * area).sqrt());
    }

    #[test]
    fn disk_norm() {
        let p = circle();
        let j1 = bessel_j(1, p.rho).unwrap();
        assert!((j1 - 0.5191474972894669).abs() < 1e-15);
        let got = l2_norm_sq(&p, 32, 64, &RootConfig::default()).unwrap();
        assert!((got - PI * j1 * j1).abs() < 1e-12, "{got}");
    }

    #[test]
    fn norm_refinement_and_scaling() {
        let p = LevelSetParams::new(2.9, vec![0.3, -0.02], 2).unwrap();
        let cfg = RootConfig::default();
        let a = l2_norm_sq(&p, 32, 64, &cfg).unwrap();
        let b = l2_norm_sq(&p, 32, 128, &cfg).unwrap();
        assert!((a - b).abs() < 1e-10);
        let c = scaled_l2_norm_sq(&p, 3.0, 32, 64, &cfg).unwrap();
        assert!((c - 9.0 * a).abs() < 1e-12 * c);
    }

    #[test]
    fn no_gap_no_correction() {
        let p = circle();
        let disk = TargetShape::circle(1.0).unwrap();
        let lam = hadamard_corrected_eigenvalue(
            &p,
            &disk,
            &QuadratureGrid::default(),
            32,
            &RootConfig::default(),
        )
        .unwrap();
        assert!((lam - p.eigenvalue()).abs() < 1e-12);
    }

    fn disk_error(eps: f64) -> (f64, f64) {
        let p = circle();
        let disk = TargetShape::circle(1.0 + eps).unwrap();
        let lam = hadamard_corrected_eigenvalue(
            &p,
            &disk,
            &QuadratureGrid::default(),
            32,
            &RootConfig::default(),
        )
        .unwrap();
        let exact = p.eigenvalue() / ((1.0 + eps) * (1.0 + eps));
        (lam, (lam - exact).abs())
    }

    #[test]
    fn disk_scaling_first_order() {
        let eps = 1e-3;
        let j01sq = circle().eigenvalue();
        let (lam, err) = disk_error(eps);
        // |grad psi|^2 = j01^2 / pi on the unit circle: correction 2 eps j01^2
        assert!((lam - j01sq * (1.0 - 2.0 * eps)).abs() < 1e-11);
        assert!(err < 4.0 * eps * eps * j01sq);
        let ratio = disk_error(1e-2).1 / disk_error(5e-3).1;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn growing_the_domain_lowers_the_estimate() {
        let p = LevelSetParams::new(2.5, vec![0.1], 2).unwrap();
        let big = TargetShape::circle(1.3).unwrap();
        let lam = hadamard_corrected_eigenvalue(
            &p,
            &big,
            &QuadratureGrid::default(),
            32,
            &RootConfig::default(),
        )
        .unwrap();
        assert!(lam < p.eigenvalue());
    }

    #[test]
    fn amplitude_cancels() {
        let p = LevelSetParams::new(2.7, vec![0.25, 0.01], 2).unwrap();
        let ell = TargetShape::ellipse(0.8, 1.0).unwrap();
        let cfg = RootConfig::default();
        let grid = QuadratureGrid::default();
        let base = NormalizedEigenfunction::new(p.clone(), 1.0, 32, 128, &cfg)
            .unwrap()
            .corrected_eigenvalue(&ell, &grid, &cfg)
            .unwrap();
        for amp in [-2.0, 0.01, 17.0] {
            let lam = NormalizedEigenfunction::new(p.clone(), amp, 32, 128, &cfg)
                .unwrap()
                .corrected_eigenvalue(&ell, &grid, &cfg)
                .unwrap();
            assert!((lam - base).abs() < 1e-11);
        }
    }
}
