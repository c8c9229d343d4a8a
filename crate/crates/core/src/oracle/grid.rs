//! Uniform Cartesian grid clipped to a star-shaped domain, with
//! Shortley-Weller arm lengths at nodes next to the boundary.

use rayon::prelude::*;

use super::sparse::CsrMatrix;
use crate::domain::TargetShape;
use crate::error::{Error, Result};

const BISECTION_STEPS: usize = 64;
const NONE: usize = usize::MAX;

/// Stencil directions: east, west, north, south.
const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// One arm of the 5-point stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    /// Arm length over `h`, in `(0, 1]`.
    pub fraction: f64,
    /// Interior node at the far end, `None` when the arm ends on the boundary.
    pub neighbor: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FdGrid {
    pub h: f64,
    half_width: i64,
    /// Node coordinates in units of `h`.
    nodes: Vec<(i64, i64)>,
    index: Vec<usize>,
    arms: Vec<[Arm; 4]>,
}

/// Nodes closer than this (in units of `h`) to the boundary count as
/// boundary points.
const BOUNDARY_BAND: f64 = 1e-9;

fn inside(shape: &TargetShape, x: f64, y: f64, h: f64) -> bool {
    boundary_gap(shape, x, y) < -BOUNDARY_BAND * h
}

fn boundary_gap(shape: &TargetShape, x: f64, y: f64) -> f64 {
    x.hypot(y) - shape.radius(y.atan2(x))
}

/// Fraction `t` in `(0, 1]` where the segment from an interior point
/// `(x, y)` along `(dx, dy)` leaves the domain.
fn crossing(shape: &TargetShape, x: f64, y: f64, dx: f64, dy: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if boundary_gap(shape, x + mid * dx, y + mid * dy) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

impl FdGrid {
    pub fn new(shape: &TargetShape, h: f64) -> Result<Self> {
        shape.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Oracle(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        let extent = 1.05 * shape.max_radius() + h;
        let half_width = (extent / h).ceil() as i64;
        let side = (2 * half_width + 1) as usize;
        if side.saturating_mul(side) > 200_000_000 {
            return Err(Error::Oracle(format!("grid spacing {h} is too fine")));
        }
        let mut index = vec![NONE; side * side];
        let mut nodes = Vec::new();
        for j in -half_width..=half_width {
            for i in -half_width..=half_width {
                if inside(shape, i as f64 * h, j as f64 * h, h) {
                    index[Self::slot(half_width, i, j)] = nodes.len();
                    nodes.push((i, j));
                }
            }
        }
        let arms = nodes
            .par_iter()
            .map(|&(i, j)| {
                DIRS.map(|(di, dj)| {
                    let (ni, nj) = (i + di, j + dj);
                    let slot = if ni.abs() <= half_width && nj.abs() <= half_width {
                        index[Self::slot(half_width, ni, nj)]
                    } else {
                        NONE
                    };
                    if slot != NONE {
                        Arm {
                            fraction: 1.0,
                            neighbor: Some(slot),
                        }
                    } else {
                        let (x, y) = (i as f64 * h, j as f64 * h);
                        Arm {
                            fraction: crossing(shape, x, y, di as f64 * h, dj as f64 * h),
                            neighbor: None,
                        }
                    }
                })
            })
            .collect();
        Ok(Self {
            h,
            half_width,
            nodes,
            index,
            arms,
        })
    }

    fn slot(half_width: i64, i: i64, j: i64) -> usize {
        let side = 2 * half_width + 1;
        ((j + half_width) * side + (i + half_width)) as usize
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.nodes[node];
        (i as f64 * self.h, j as f64 * self.h)
    }

    /// Node at integer offset `(i, j)` from the origin, if interior.
    pub fn node_at(&self, i: i64, j: i64) -> Option<usize> {
        if i.abs() > self.half_width || j.abs() > self.half_width {
            return None;
        }
        match self.index[Self::slot(self.half_width, i, j)] {
            NONE => None,
            k => Some(k),
        }
    }

    pub fn arms(&self, node: usize) -> &[Arm; 4] {
        &self.arms[node]
    }

    pub fn irregular_count(&self) -> usize {
        self.arms
            .iter()
            .filter(|a| a.iter().any(|arm| arm.neighbor.is_none()))
            .count()
    }

    /// `-Laplacian` with homogeneous Dirichlet data, Shortley-Weller rows.
    pub fn negative_laplacian(&self) -> Result<CsrMatrix> {
        let h2 = self.h * self.h;
        let rows = self
            .arms
            .par_iter()
            .enumerate()
            .map(|(node, arms)| {
                let mut row = Vec::with_capacity(5);
                let mut diag = 0.0;
                // pairs (east, west) and (north, south)
                for (plus, minus) in [(arms[0], arms[1]), (arms[2], arms[3])] {
                    let (a, b) = (plus.fraction, minus.fraction);
                    diag += 2.0 / (a * b * h2);
                    for (arm, w) in [
                        (plus, 2.0 / (a * (a + b) * h2)),
                        (minus, 2.0 / (b * (a + b) * h2)),
                    ] {
                        if let Some(k) = arm.neighbor {
                            row.push((k, -w));
                        }
                    }
                }
                row.push((node, diag));
                row
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arms_satisfy_the_stencil_invariant() {
        let ell = TargetShape::ellipse(0.5, 1.0).unwrap();
        let g = FdGrid::new(&ell, 0.05).unwrap();
        assert!(g.len() > 100);
        for n in 0..g.len() {
            let (x, y) = g.position(n);
            for (arm, (dx, dy)) in g.arms(n).iter().zip(DIRS) {
                assert!(arm.fraction > 0.0 && arm.fraction <= 1.0);
                let (ex, ey) = (
                    x + arm.fraction * g.h * dx as f64,
                    y + arm.fraction * g.h * dy as f64,
                );
                match arm.neighbor {
                    Some(k) => {
                        assert_eq!(arm.fraction, 1.0);
                        let (kx, ky) = g.position(k);
                        assert!((kx - ex).abs() < 1e-12 && (ky - ey).abs() < 1e-12);
                    }
                    None => {
                        let r = ell.radius(ey.atan2(ex));
                        assert!((ex.hypot(ey) - r).abs() < 1e-12, "arm end off boundary");
                    }
                }
            }
        }
    }

    #[test]
    fn disk_node_count_tracks_area() {
        let disk = TargetShape::circle(1.0).unwrap();
        let h = 0.02;
        let g = FdGrid::new(&disk, h).unwrap();
        let area = g.len() as f64 * h * h;
        assert!((area - std::f64::consts::PI).abs() < 0.05, "{area}");
        assert!(g.node_at(0, 0).is_some());
        assert!(g.node_at(60, 0).is_none());
        assert!(g.irregular_count() > 0);
    }

    #[test]
    fn laplacian_is_exact_on_quadratics() {
        // -Lap(1 - x^2 - y^2 / 4) = 2.5 and the field vanishes on the
        // ellipse with semi-axes 1 and 2, so Shortley-Weller is exact.
        let ell = TargetShape::ellipse(1.0, 2.0).unwrap();
        let g = FdGrid::new(&ell, 0.1).unwrap();
        let a = g.negative_laplacian().unwrap();
        let u: Vec<f64> = (0..g.len())
            .map(|n| {
                let (x, y) = g.position(n);
                1.0 - x * x - y * y / 4.0
            })
            .collect();
        let mut lu = vec![0.0; g.len()];
        a.mul_vec(&u, &mut lu);
        for v in lu {
            assert!((v - 2.5).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn bad_spacing_is_rejected() {
        let disk = TargetShape::circle(1.0).unwrap();
        assert!(FdGrid::new(&disk, 0.0).is_err());
        assert!(FdGrid::new(&disk, f64::NAN).is_err());
    }
}
