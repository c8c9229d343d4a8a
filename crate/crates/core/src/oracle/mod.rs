//! Reference eigenvalues from a finite-difference discretization.
//!
//! The Dirichlet Laplacian is discretized with the Shortley-Weller 5-point
//! stencil on a uniform grid, the lowest eigenvalue is found by shifted
//! inverse iteration, and estimates on a halving ladder of spacings are
//! combined by Richardson extrapolation. Nothing here touches the
//! Fourier-Bessel machinery it is meant to check.

mod grid;
mod sparse;

use serde::{Deserialize, Serialize};

use crate::domain::TargetShape;
use crate::error::{Error, Result};

pub use grid::{Arm, FdGrid};
pub use sparse::{bicgstab, CsrMatrix, Ilu0, SolverConfig};

pub const MIN_INTERIOR_NODES: usize = 100;

/// Extrapolated lowest eigenvalue of the ellipse with semi-axes 0.5 and 1
/// from spacings 0.01 and 0.005.
pub const ELLIPSE_REFERENCE: f64 = 14.266902630361125;
/// Error bar reported with [`ELLIPSE_REFERENCE`].
pub const ELLIPSE_REFERENCE_ERROR: f64 = 3.2645968773792333e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    /// Relative change in the eigenvalue estimate that ends the iteration.
    pub tol: f64,
    pub max_iterations: usize,
    /// Unshifted iterations run before the shift is placed below the
    /// current estimate.
    pub warmup_iterations: usize,
    /// The shift is `shift_fraction * lambda` after warm-up.
    pub shift_fraction: f64,
    pub solver: SolverConfig,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 300,
            warmup_iterations: 4,
            shift_fraction: 0.9,
            solver: SolverConfig::default(),
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_iterations: 5000,
        }
    }
}

/// Estimates at each spacing, the extrapolated value and its error bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub eigenvalue_estimates: Vec<(f64, f64)>,
    pub extrapolated: f64,
    pub estimated_error: f64,
}

/// Lowest Dirichlet eigenvalue of the discrete Laplacian at spacing `h`.
pub fn fd_lowest_eigenvalue(shape: &TargetShape, h: f64, power_tol: f64) -> Result<f64> {
    let cfg = PowerConfig {
        tol: power_tol,
        ..PowerConfig::default()
    };
    fd_lowest_eigenvalue_with(shape, h, &cfg)
}

pub fn fd_lowest_eigenvalue_with(shape: &TargetShape, h: f64, cfg: &PowerConfig) -> Result<f64> {
    if !(cfg.tol > 0.0) || !(0.0..1.0).contains(&cfg.shift_fraction) {
        return Err(Error::Oracle(format!(
            "bad power iteration settings {cfg:?}"
        )));
    }
    let grid = FdGrid::new(shape, h)?;
    if grid.len() < MIN_INTERIOR_NODES {
        return Err(Error::Oracle(format!(
            "spacing {h} leaves {} interior nodes, need at least {MIN_INTERIOR_NODES}",
            grid.len()
        )));
    }
    let a = grid.negative_laplacian()?;
    lowest_eigenvalue(&a, cfg)
}

/// Smallest eigenvalue of an M-matrix by inverse iteration.
///
/// Below the lowest eigenvalue `A - shift I` stays an M-matrix, so ILU(0)
/// and BiCGSTAB remain well behaved.
pub fn lowest_eigenvalue(a: &CsrMatrix, cfg: &PowerConfig) -> Result<f64> {
    let n = a.dim();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut shift = 0.0;
    let mut op = a.clone();
    let mut ilu = Ilu0::new(&op)?;
    let mut y = vec![0.0; n];
    let mut lambda = f64::NAN;
    for it in 0..cfg.max_iterations {
        if it == cfg.warmup_iterations && lambda.is_finite() {
            shift = cfg.shift_fraction * lambda;
            op = a.shifted(shift)?;
            ilu = Ilu0::new(&op)?;
        }
        // (A - s) y = x, warm-started at x / (lambda - s)
        let guess = if lambda.is_finite() {
            1.0 / (lambda - shift)
        } else {
            0.0
        };
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = guess * xi;
        }
        bicgstab(&op, &ilu, &x, &mut y, &cfg.solver)?;
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        if !(yy > 0.0 && xy > 0.0) {
            return Err(Error::Oracle("inverse iteration lost positivity".into()));
        }
        let next = shift + xy / yy;
        let norm = yy.sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if lambda.is_finite()
            && it > cfg.warmup_iterations
            && ((next - lambda) / next).abs() < cfg.tol
        {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Oracle(format!(
        "inverse iteration did not reach relative change {:e} in {} iterations (last estimate {lambda})",
        cfg.tol, cfg.max_iterations
    )))
}

/// Combines the last two estimates of a halving ladder, assuming error
/// `~ h^order`. Earlier entries must also halve.
pub fn richardson_extrapolate(estimates: &[(f64, f64)], order: u32) -> Result<OracleResult> {
    if estimates.len() < 2 {
        return Err(Error::Oracle("need at least two spacings".into()));
    }
    if order == 0 {
        return Err(Error::Oracle("extrapolation order must be positive".into()));
    }
    for w in estimates.windows(2) {
        let ratio = w[0].0 / w[1].0;
        if !((ratio - 2.0).abs() < 1e-9) {
            return Err(Error::Oracle(format!(
                "spacings {} and {} do not halve (ratio {ratio})",
                w[0].0, w[1].0
            )));
        }
    }
    let (_, coarse) = estimates[estimates.len() - 2];
    let (_, fine) = estimates[estimates.len() - 1];
    let denom = 2f64.powi(order as i32) - 1.0;
    let correction = (fine - coarse) / denom;
    // an exact hit would report zero error; keep it at rounding level
    let floor = f64::EPSILON * fine.abs();
    Ok(OracleResult {
        eigenvalue_estimates: estimates.to_vec(),
        extrapolated: fine + correction,
        estimated_error: correction.abs().max(floor),
    })
}

/// Runs the ladder `h0, h0/2, ...` with `levels` entries and extrapolates.
pub fn oracle_eigenvalue(
    shape: &TargetShape,
    h0: f64,
    levels: usize,
    cfg: &PowerConfig,
) -> Result<OracleResult> {
    if levels < 2 {
        return Err(Error::Oracle("need at least two levels".into()));
    }
    let mut estimates = Vec::with_capacity(levels);
    let mut h = h0;
    for _ in 0..levels {
        estimates.push((h, fd_lowest_eigenvalue_with(shape, h, cfg)?));
        h *= 0.5;
    }
    richardson_extrapolate(&estimates, 2)
}
