//! `lseig` command-line front end.
//!
//! Exit status: 0 on success, 1 when a run fails or a check does not pass,
//! 2 for usage and configuration errors.

pub mod check;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fitter::{FitProblem, IterationRecord, OptimizerRegistry};
use crate::levelset::RootConfig;
use crate::oracle::{oracle_eigenvalue, PowerConfig};

pub use check::{BesselSource, LibraryBessel, PropertyOutcome, PropertySuite};
pub use config::{RunConfig, Settings};
pub use output::ResultDocument;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lseig",
    version,
    about = "Dirichlet Laplace eigenvalues of star-shaped domains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the level set to the target boundary and report the eigenvalue
    Fit(RunArgs),
    /// Finite-difference reference eigenvalue with Richardson extrapolation
    Oracle(RunArgs),
    /// Run the seeded property suite
    Check(RunArgs),
    /// Recompute the boundary table and RMS gap from a result document
    DumpBoundary(DumpArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML file with the same keys as the flags; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// result.json written by `fit`
    pub result: PathBuf,
    /// Output directory; defaults to the result's directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let status = match cli.command {
        Command::Fit(a) => settings(&a).and_then(|s| cmd_fit(&s, stdout, stderr)),
        Command::Oracle(a) => settings(&a).and_then(|s| cmd_oracle(&s, stdout)),
        Command::Check(a) => settings(&a).map(|s| cmd_check(&s, stdout)),
        Command::DumpBoundary(a) => cmd_dump_boundary(&a, stdout),
    };
    match status {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::Config(_)
                | Error::InvalidShape(_)
                | Error::InvalidParams(_)
                | Error::UnknownOptimizer(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn settings(args: &RunArgs) -> Result<Settings> {
    let base = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    base.overlay(&args.run).resolve()
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Validates, fits and only then writes `result.json`, `boundary.csv` and
/// `coeffs.csv`. Progress goes to `stderr` with monotonic timestamps.
pub fn cmd_fit(s: &Settings, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let registry = OptimizerRegistry::with_defaults();
    let optimizer = registry.get(&s.optimizer)?;
    let root = RootConfig::default();
    let mut problem = FitProblem::new(&s.shape, s.n_terms, s.grid, s.opt, root);
    if let Some(sym) = s.sym {
        problem = problem.with_sym_step(sym);
    }
    problem.validate()?;

    let start = Instant::now();
    let mut log = |rec: &IterationRecord| {
        let _ = writeln!(
            stderr,
            "[{:>11.6}s] iter {:>4}  rho {:.15}  rms {:.6e}",
            start.elapsed().as_secs_f64(),
            rec.iteration,
            rec.rho,
            rec.rms
        );
    };
    let fit = optimizer.fit(&problem, &mut log)?;

    let doc = ResultDocument::new(&fit, &s.shape, &s.grid);
    let files = [
        (output::RESULT_FILE, doc.to_json()?),
        (
            output::BOUNDARY_FILE,
            output::boundary_table(&fit.params, &s.shape, &s.grid, &root)?,
        ),
        (output::COEFFS_FILE, output::coefficient_table(&fit.params)),
    ];
    output::write_files(&s.out, &files)?;

    writeln!(stdout, "eigenvalue_raw      {}", fit.eigenvalue_raw).map_err(io_err)?;
    if let Some(h) = fit.eigenvalue_hadamard {
        writeln!(stdout, "eigenvalue_hadamard {h}").map_err(io_err)?;
    }
    writeln!(stdout, "rms                 {:e}", fit.rms_residual).map_err(io_err)?;
    writeln!(stdout, "iterations          {}", fit.iterations).map_err(io_err)?;
    writeln!(stdout, "output              {}", s.out.display()).map_err(io_err)?;
    if fit.converged {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(
            stderr,
            "error: {} stopped after {} iterations without converging",
            fit.optimizer, fit.iterations
        );
        Ok(EXIT_FAILURE)
    }
}

/// Writes `oracle.json` and the `oracle.csv` table of `(h, lambda_h)`.
pub fn cmd_oracle(s: &Settings, stdout: &mut dyn Write) -> Result<i32> {
    let result = oracle_eigenvalue(
        &s.shape,
        s.oracle_h,
        s.oracle_levels,
        &PowerConfig::default(),
    )?;
    let doc = output::OracleDocument {
        shape: s.shape.clone(),
        result,
    };
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    json.push('\n');
    let table = output::oracle_table(&doc.result);
    output::write_files(
        &s.out,
        &[
            (output::ORACLE_FILE, json),
            (output::ORACLE_TABLE_FILE, table.clone()),
        ],
    )?;
    write!(stdout, "{table}").map_err(io_err)?;
    writeln!(
        stdout,
        "extrapolated {} +/- {:e}",
        doc.result.extrapolated, doc.result.estimated_error
    )
    .map_err(io_err)?;
    Ok(EXIT_OK)
}

pub fn cmd_check(s: &Settings, stdout: &mut dyn Write) -> i32 {
    let outcomes = PropertySuite::new(s.seed).run(&LibraryBessel);
    for o in &outcomes {
        let _ = writeln!(stdout, "{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(
        stdout,
        "{} passed, {failed} failed (seed {})",
        outcomes.len() - failed,
        s.seed
    );
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

pub fn cmd_dump_boundary(args: &DumpArgs, stdout: &mut dyn Write) -> Result<i32> {
    let doc = ResultDocument::load(&args.result)?;
    let root = RootConfig::default();
    let params = doc.params()?;
    let grid = doc.grid()?;
    let table = output::boundary_table(&params, &doc.shape, &grid, &root)?;
    let rms = doc.recompute_rms(&root)?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .result
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    output::write_files(&dir, &[(output::BOUNDARY_FILE, table)])?;
    writeln!(stdout, "rms {rms:e} (stored {:e})", doc.rms).map_err(io_err)?;
    Ok(EXIT_OK)
}
