use nalgebra::DVector;

use super::{
    finish, relative_step, residual_jacobian_from, rms_of, sample_boundary, scaled_damped_solve,
    FitProblem, FitResult, IterationRecord, OptimConfig, Optimizer, QuadratureGrid,
};
use crate::domain::TargetShape;
use crate::error::{Error, Result};
use crate::levelset::{LevelSetParams, RootConfig};

const MAX_CONSECUTIVE_ROOT_FAILURES: usize = 5;
const MIN_DAMPING: f64 = 1e-15;
const MAX_DAMPING: f64 = 1e16;

/// Levenberg-Marquardt on the radial residual with the analytic Jacobian.
#[derive(Debug, Default, Clone, Copy)]
pub struct GaussNewtonOptimizer;

impl Optimizer for GaussNewtonOptimizer {
    fn name(&self) -> &'static str {
        "gauss-newton"
    }

    fn fit(
        &self,
        problem: &FitProblem<'_>,
        monitor: &mut dyn FnMut(&IterationRecord),
    ) -> Result<FitResult> {
        problem.validate()?;
        let start = problem.initial_params()?;
        if problem.opt.staged {
            run_staged(problem, start, monitor)
        } else {
            run(problem, start, monitor)
        }
    }
}

impl GaussNewtonOptimizer {
    /// Same iteration from a caller-supplied start.
    pub fn fit_from(
        &self,
        problem: &FitProblem<'_>,
        start: LevelSetParams,
        monitor: &mut dyn FnMut(&IterationRecord),
    ) -> Result<FitResult> {
        problem.validate()?;
        run(problem, start, monitor)
    }
}

struct State {
    params: LevelSetParams,
    residual: DVector<f64>,
    jacobian: nalgebra::DMatrix<f64>,
    rms: f64,
}

fn evaluate(problem: &FitProblem<'_>, params: LevelSetParams) -> Result<State> {
    let samples = sample_boundary(&params, problem.shape, &problem.grid, &problem.root)?;
    let (res, jac) = residual_jacobian_from(&params, &samples)?;
    let rms = rms_of(res.as_slice());
    let scale = problem.opt.objective_scale;
    Ok(State {
        params,
        residual: res * scale,
        jacobian: jac * scale,
        rms,
    })
}

fn run(
    problem: &FitProblem<'_>,
    start: LevelSetParams,
    monitor: &mut dyn FnMut(&IterationRecord),
) -> Result<FitResult> {
    let opt = &problem.opt;
    let mut state = evaluate(problem, start)?;
    let mut log = vec![IterationRecord {
        iteration: 0,
        rho: state.params.rho,
        rms: state.rms,
    }];
    monitor(&log[0]);

    let mut damping = opt.initial_damping;
    let mut failures = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opt.max_iterations {
        if state.rms < opt.objective_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let rhs = -&state.residual;
        let step = scaled_damped_solve(&state.jacobian, &rhs, damping)
            .ok_or_else(|| Error::Singular("damped normal equations".into()))?;
        let current = state.params.to_vector();
        let rel = relative_step(&step, &current);
        let trial_vec: Vec<f64> = current
            .iter()
            .zip(step.iter())
            .map(|(p, d)| p + d)
            .collect();

        let trial = state
            .params
            .with_vector(&trial_vec)
            .and_then(|p| evaluate(problem, p));
        match trial {
            Ok(next) if next.rms < state.rms => {
                failures = 0;
                state = next;
                damping = (damping / opt.damping_update).max(MIN_DAMPING);
                let rec = IterationRecord {
                    iteration: iterations,
                    rho: state.params.rho,
                    rms: state.rms,
                };
                monitor(&rec);
                log.push(rec);
                if rel < opt.step_tol {
                    converged = true;
                    break;
                }
            }
            Ok(_) => {
                failures = 0;
                damping = (damping * opt.damping_update).min(MAX_DAMPING);
                if rel < opt.step_tol {
                    converged = true;
                    break;
                }
            }
            Err(
                e @ (Error::NoRoot { .. }
                | Error::NonConvergence { .. }
                | Error::TangentialZero { .. }),
            )
            | Err(e @ Error::InvalidParams(_)) => {
                failures += 1;
                if failures >= MAX_CONSECUTIVE_ROOT_FAILURES {
                    return Err(Error::Optimizer(format!(
                        "{failures} consecutive failed trial steps, last: {e}"
                    )));
                }
                damping = (damping * opt.damping_update).min(MAX_DAMPING);
            }
            Err(e) => return Err(e),
        }
    }
    finish(
        problem,
        "gauss-newton",
        state.params,
        state.rms,
        iterations,
        converged,
        log,
    )
}

/// Activates coefficients one at a time, each stage warm-started from the
/// previous optimum. From the circle the linearization asks for huge
/// high-order coefficients (their Bessel factors are tiny on the boundary),
/// so switching them all on at once sends the iteration astray.
fn run_staged(
    problem: &FitProblem<'_>,
    start: LevelSetParams,
    monitor: &mut dyn FnMut(&IterationRecord),
) -> Result<FitResult> {
    let n = problem.n_terms;
    let mut current = start;
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut used = 0;
    let mut last = None;
    for active in 0..=n {
        let mut stage = problem.clone();
        stage.n_terms = active;
        stage.opt.max_iterations = problem.opt.max_iterations.saturating_sub(used).max(1);
        stage.opt.hadamard = false;
        let mut coeffs = current.coeffs.clone();
        coeffs.resize(active, 0.0);
        let stage_start = LevelSetParams::new(current.rho, coeffs, current.sym_step)?;
        let offset = used;
        let first = log.is_empty();
        let mut stage_monitor = |rec: &IterationRecord| {
            if first || rec.iteration > 0 {
                monitor(&IterationRecord {
                    iteration: rec.iteration + offset,
                    ..*rec
                });
            }
        };
        let r = run(&stage, stage_start, &mut stage_monitor)?;
        log.extend(
            r.per_iteration_log
                .iter()
                .filter(|rec| first || rec.iteration > 0)
                .map(|rec| IterationRecord {
                    iteration: rec.iteration + offset,
                    ..*rec
                }),
        );
        used += r.iterations;
        current = r.params.clone();
        last = Some(r);
        if used >= problem.opt.max_iterations && active < n {
            break;
        }
    }
    let last = last.expect("at least one stage");
    let mut coeffs = current.coeffs;
    coeffs.resize(n, 0.0);
    let params = LevelSetParams::new(current.rho, coeffs, current.sym_step)?;
    let converged = last.converged && last.params.n_terms() == n;
    finish(
        problem,
        "gauss-newton",
        params,
        last.rms_residual,
        used,
        converged,
        log,
    )
}

/// Levenberg-Marquardt fit from the unit-circle start.
pub fn fit_gauss_newton(
    shape: &TargetShape,
    n_terms: usize,
    grid: &QuadratureGrid,
    opt: &OptimConfig,
    cfg: &RootConfig,
) -> Result<FitResult> {
    let problem = FitProblem::new(shape, n_terms, *grid, *opt, *cfg);
    GaussNewtonOptimizer.fit(&problem, &mut |_| {})
}
