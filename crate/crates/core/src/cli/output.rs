//! Result documents and plot tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::TargetShape;
use crate::error::{Error, Result};
use crate::fitter::{objective_rms, sample_boundary, FitResult, IterationRecord, QuadratureGrid};
use crate::levelset::{LevelSetParams, RootConfig};
use crate::oracle::OracleResult;

pub const RESULT_FILE: &str = "result.json";
pub const BOUNDARY_FILE: &str = "boundary.csv";
pub const COEFFS_FILE: &str = "coeffs.csv";
pub const ORACLE_FILE: &str = "oracle.json";
pub const ORACLE_TABLE_FILE: &str = "oracle.csv";

/// Everything needed to reproduce and re-evaluate one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub optimizer: String,
    pub shape: TargetShape,
    pub m_angles: usize,
    pub n_terms: usize,
    pub sym_step: usize,
    pub rho: f64,
    pub coefficients: Vec<f64>,
    pub eigenvalue_raw: f64,
    pub eigenvalue_hadamard: Option<f64>,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<IterationRecord>,
}

impl ResultDocument {
    pub fn new(fit: &FitResult, shape: &TargetShape, grid: &QuadratureGrid) -> Self {
        Self {
            optimizer: fit.optimizer.clone(),
            shape: shape.clone(),
            m_angles: grid.m_angles,
            n_terms: fit.params.n_terms(),
            sym_step: fit.params.sym_step,
            rho: fit.params.rho,
            coefficients: fit.params.coeffs.clone(),
            eigenvalue_raw: fit.eigenvalue_raw,
            eigenvalue_hadamard: fit.eigenvalue_hadamard,
            rms: fit.rms_residual,
            iterations: fit.iterations,
            converged: fit.converged,
            log: fit.per_iteration_log.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("result document: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> Result<LevelSetParams> {
        if self.coefficients.len() != self.n_terms {
            return Err(Error::Config(format!(
                "result document lists {} coefficients but n_terms = {}",
                self.coefficients.len(),
                self.n_terms
            )));
        }
        LevelSetParams::new(self.rho, self.coefficients.clone(), self.sym_step)
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::new(self.m_angles)
    }

    /// RMS gap recomputed from the stored parameters.
    pub fn recompute_rms(&self, cfg: &RootConfig) -> Result<f64> {
        objective_rms(&self.params()?, &self.shape, &self.grid()?, cfg)
    }
}

/// `theta,R,r_u,D` at every quadrature angle.
pub fn boundary_table(
    params: &LevelSetParams,
    shape: &TargetShape,
    grid: &QuadratureGrid,
    cfg: &RootConfig,
) -> Result<String> {
    let mut out = String::from("theta,R,r_u,D\n");
    for s in sample_boundary(params, shape, grid, cfg)? {
        writeln!(out, "{},{},{},{}", s.theta, s.target, s.r_u, s.gap()).unwrap();
    }
    Ok(out)
}

/// `k,abs_P` with `k` the Bessel order of each coefficient.
pub fn coefficient_table(params: &LevelSetParams) -> String {
    let mut out = String::from("k,abs_P\n0,1\n");
    for (i, p) in params.coeffs.iter().enumerate() {
        writeln!(out, "{},{}", (i + 1) * params.sym_step, p.abs()).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDocument {
    pub shape: TargetShape,
    #[serde(flatten)]
    pub result: OracleResult,
}

pub fn oracle_table(result: &OracleResult) -> String {
    let mut out = String::from("h,lambda_h\n");
    for (h, lam) in &result.eigenvalue_estimates {
        writeln!(out, "{h},{lam}").unwrap();
    }
    out
}

/// Writes all `(name, contents)` pairs under `dir`, creating it first.
pub fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
