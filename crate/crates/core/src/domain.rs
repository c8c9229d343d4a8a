//! Target boundaries given as polar graphs `R(theta)` about the origin.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const POSITIVITY_GRID: usize = 4096;
const SYMMETRY_GRID: usize = 720;
const SYMMETRY_TOL: f64 = 1e-12;

/// Default cap on the detected symmetry step; a circle is invariant under
/// every rotation, so something has to stop the search.
pub const DEFAULT_MAX_SYMMETRY: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetShape {
    /// Semiaxis `a` along x, `b` along y.
    Ellipse { a: f64, b: f64 },
    /// `R(theta) = r0 + sum_k cos_coeffs[k-1] cos(k theta) + sin_coeffs[k-1] sin(k theta)`.
    FourierBoundary {
        r0: f64,
        cos_coeffs: Vec<f64>,
        sin_coeffs: Vec<f64>,
    },
}

impl TargetShape {
    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        let shape = TargetShape::Ellipse { a, b };
        shape.validate()?;
        Ok(shape)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::ellipse(radius, radius)
    }

    pub fn fourier(r0: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Result<Self> {
        let shape = TargetShape::FourierBoundary {
            r0,
            cos_coeffs,
            sin_coeffs,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// Re-checks invariants; needed after deserializing.
    pub fn validate(&self) -> Result<()> {
        match self {
            TargetShape::Ellipse { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                    return Err(Error::InvalidShape(format!(
                        "ellipse semiaxes must be positive, got a={a}, b={b}"
                    )));
                }
            }
            TargetShape::FourierBoundary {
                r0,
                cos_coeffs,
                sin_coeffs,
            } => {
                let finite =
                    r0.is_finite() && cos_coeffs.iter().chain(sin_coeffs).all(|c| c.is_finite());
                if !finite {
                    return Err(Error::InvalidShape("non-finite Fourier coefficient".into()));
                }
                for i in 0..POSITIVITY_GRID {
                    let theta = TAU * i as f64 / POSITIVITY_GRID as f64;
                    let r = self.radius(theta);
                    if !(r > 0.0) {
                        return Err(Error::InvalidShape(format!(
                            "Fourier boundary radius {r} is not positive at theta={theta}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `R(theta)`.
    pub fn radius(&self, theta: f64) -> f64 {
        match self {
            TargetShape::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                1.0 / (c * c / (a * a) + s * s / (b * b)).sqrt()
            }
            TargetShape::FourierBoundary {
                r0,
                cos_coeffs,
                sin_coeffs,
            } => {
                let mut r = *r0;
                for (k, c) in cos_coeffs.iter().enumerate() {
                    r += c * ((k + 1) as f64 * theta).cos();
                }
                for (k, s) in sin_coeffs.iter().enumerate() {
                    r += s * ((k + 1) as f64 * theta).sin();
                }
                r
            }
        }
    }

    /// Largest `s <= max_step` such that `R` is even in theta and invariant
    /// under rotation by `2 pi / s`. Returns 1 when the mirror symmetry fails.
    pub fn symmetry(&self, max_step: usize) -> usize {
        let grid: Vec<f64> = (0..SYMMETRY_GRID)
            .map(|i| TAU * (i as f64 + 0.37) / SYMMETRY_GRID as f64)
            .collect();
        let mirror = grid
            .iter()
            .all(|&t| (self.radius(t) - self.radius(-t)).abs() <= SYMMETRY_TOL);
        if !mirror {
            return 1;
        }
        (1..=max_step.max(1))
            .rev()
            .find(|&s| {
                let step = TAU / s as f64;
                grid.iter()
                    .all(|&t| (self.radius(t) - self.radius(t + step)).abs() <= SYMMETRY_TOL)
            })
            .unwrap_or(1)
    }

    /// Radius range over a uniform grid, used for bounding boxes.
    pub fn max_radius(&self) -> f64 {
        (0..POSITIVITY_GRID)
            .map(|i| self.radius(TAU * i as f64 / POSITIVITY_GRID as f64))
            .fold(0.0, f64::max)
    }
}

pub fn shape_radius(shape: &TargetShape, theta: f64) -> f64 {
    shape.radius(theta)
}

pub fn shape_symmetry(shape: &TargetShape) -> usize {
    shape.symmetry(DEFAULT_MAX_SYMMETRY)
}
