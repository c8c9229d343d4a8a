//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::domain::TargetShape;
use crate::error::{Error, Result};
use crate::fitter::{OptimConfig, QuadratureGrid};

pub const DEFAULT_TERMS: usize = 10;
pub const DEFAULT_ORACLE_H: f64 = 0.01;
pub const DEFAULT_ORACLE_LEVELS: usize = 2;

/// Every setting, each optional so file and flags can be layered.
/// Keys match the long flag names with `-` replaced by `_`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// ellipse, circle or fourier
    #[arg(long)]
    pub shape: Option<String>,
    /// Ellipse semi-axis along x
    #[arg(long)]
    pub a: Option<f64>,
    /// Ellipse semi-axis along y
    #[arg(long)]
    pub b: Option<f64>,
    /// Circle radius
    #[arg(long)]
    pub radius: Option<f64>,
    /// Mean radius of a Fourier boundary
    #[arg(long)]
    pub r0: Option<f64>,
    /// Cosine coefficients of a Fourier boundary, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cos: Option<Vec<f64>>,
    /// Sine coefficients of a Fourier boundary, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sin: Option<Vec<f64>>,
    /// Number of angular terms besides J0
    #[arg(long)]
    pub terms: Option<usize>,
    /// Angular order step; detected from the shape when absent
    #[arg(long)]
    pub sym: Option<usize>,
    /// Number of quadrature angles
    #[arg(long)]
    pub grid: Option<usize>,
    /// gauss-newton or flow
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Objective and step tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Report the first-order corrected eigenvalue
    #[arg(long)]
    pub hadamard: Option<bool>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coarsest oracle grid spacing
    #[arg(long)]
    pub h: Option<f64>,
    /// Number of oracle spacings, each half the previous
    #[arg(long)]
    pub levels: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Fields set in `top` win.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self, top, shape, a, b, radius, r0, cos, sin, terms, sym, grid, optimizer, tol,
            max_iter, hadamard, out, seed, h, levels
        );
        self
    }

    pub fn resolve(&self) -> Result<Settings> {
        let kind = self.shape.as_deref().unwrap_or("ellipse");
        let shape = match kind {
            "ellipse" => TargetShape::ellipse(self.a.unwrap_or(0.5), self.b.unwrap_or(1.0))?,
            "circle" => TargetShape::circle(self.radius.unwrap_or(1.0))?,
            "fourier" => TargetShape::fourier(
                self.r0.unwrap_or(1.0),
                self.cos.clone().unwrap_or_default(),
                self.sin.clone().unwrap_or_default(),
            )?,
            other => {
                return Err(Error::Config(format!(
                    "unknown shape '{other}' (expected ellipse, circle or fourier)"
                )))
            }
        };
        let grid = QuadratureGrid::new(self.grid.unwrap_or(60))?;
        let mut opt = OptimConfig::default();
        if let Some(tol) = self.tol {
            opt.objective_tol = tol;
            opt.step_tol = tol;
        }
        if let Some(n) = self.max_iter {
            opt.max_iterations = n;
        }
        if let Some(h) = self.hadamard {
            opt.hadamard = h;
        }
        opt.validate()?;
        if let Some(s) = self.sym {
            let detected = shape.symmetry(crate::domain::DEFAULT_MAX_SYMMETRY);
            if s == 0 || detected % s != 0 {
                return Err(Error::Config(format!(
                    "sym {s} does not divide the shape's rotational symmetry {detected}"
                )));
            }
        }
        let oracle_h = self.h.unwrap_or(DEFAULT_ORACLE_H);
        if !(oracle_h > 0.0 && oracle_h.is_finite()) {
            return Err(Error::Config(format!(
                "oracle spacing must be positive, got {oracle_h}"
            )));
        }
        let oracle_levels = self.levels.unwrap_or(DEFAULT_ORACLE_LEVELS);
        if oracle_levels < 2 {
            return Err(Error::Config("oracle needs at least 2 levels".into()));
        }
        Ok(Settings {
            shape,
            n_terms: self.terms.unwrap_or(DEFAULT_TERMS),
            sym: self.sym,
            grid,
            optimizer: self
                .optimizer
                .clone()
                .unwrap_or_else(|| "gauss-newton".into()),
            opt,
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            seed: self.seed.unwrap_or(0),
            oracle_h,
            oracle_levels,
        })
    }
}

/// Validated settings with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub shape: TargetShape,
    pub n_terms: usize,
    pub sym: Option<usize>,
    pub grid: QuadratureGrid,
    pub optimizer: String,
    pub opt: OptimConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub oracle_h: f64,
    pub oracle_levels: usize,
}
