//! Prescribed normal-velocity flow.
//!
//! Moving the parameters with rates `p_dot` moves the zero set of `u` with
//! outward normal speed `C = sum_p p_dot_p (du/dp) / |grad u|`. Each step
//! picks `p_dot` so that `C` matches, in least squares over the angular
//! grid, the normal gap `D_perp = D (r_hat . N_hat)` to the target, then
//! takes an explicit Euler step.

use nalgebra::{DMatrix, DVector};

use super::{
    finish, objective_rms, relative_step, sample_boundary, scaled_damped_solve, FitProblem,
    FitResult, IterationRecord, OptimConfig, Optimizer, QuadratureGrid,
};
use crate::domain::TargetShape;
use crate::error::{Error, Result};
use crate::levelset::{self, LevelSetParams, RootConfig};

const RIDGE_RETRIES: usize = 3;
const DT_GROW: f64 = 1.2;
const DT_SHRINK: f64 = 0.5;

/// Least-squares parameter velocity for one flow step.
pub fn flow_velocity(
    params: &LevelSetParams,
    shape: &TargetShape,
    grid: &QuadratureGrid,
    ridge: f64,
    cfg: &RootConfig,
) -> Result<Vec<f64>> {
    let samples = sample_boundary(params, shape, grid, cfg)?;
    let ncols = 1 + params.n_terms();
    let mut a = DMatrix::zeros(samples.len(), ncols);
    let mut b = DVector::zeros(samples.len());
    for (j, s) in samples.iter().enumerate() {
        let g = s.grad_norm();
        if !(g > 0.0) {
            return Err(Error::TangentialZero {
                theta: s.theta,
                u_r: s.eval.u_r,
            });
        }
        a[(j, 0)] = s.eval.du_drho / g;
        for (k, d) in levelset::coefficient_partials(params, s.r_u, s.theta)
            .into_iter()
            .enumerate()
        {
            a[(j, k + 1)] = d / g;
        }
        b[j] = s.gap() * s.radial_normal_cosine();
    }
    let mut lambda = ridge;
    for _ in 0..=RIDGE_RETRIES {
        if let Some(x) = scaled_damped_solve(&a, &b, lambda) {
            return Ok(x.iter().copied().collect());
        }
        lambda *= 10.0;
    }
    Err(Error::Singular(format!(
        "flow least squares with ridge up to {lambda:e}"
    )))
}

/// One explicit Euler step of length `opt.flow_dt`.
pub fn prescribed_c_step(
    params: &LevelSetParams,
    shape: &TargetShape,
    grid: &QuadratureGrid,
    opt: &OptimConfig,
    cfg: &RootConfig,
) -> Result<LevelSetParams> {
    let v = flow_velocity(params, shape, grid, opt.ridge, cfg)?;
    advance(params, &v, opt.flow_dt)
}

fn advance(params: &LevelSetParams, velocity: &[f64], dt: f64) -> Result<LevelSetParams> {
    let next: Vec<f64> = params
        .to_vector()
        .iter()
        .zip(velocity)
        .map(|(p, v)| p + dt * v)
        .collect();
    params.with_vector(&next)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FlowOptimizer;

impl Optimizer for FlowOptimizer {
    fn name(&self) -> &'static str {
        "flow"
    }

    fn fit(
        &self,
        problem: &FitProblem<'_>,
        monitor: &mut dyn FnMut(&IterationRecord),
    ) -> Result<FitResult> {
        problem.validate()?;
        let opt = &problem.opt;
        let (shape, grid, cfg) = (problem.shape, &problem.grid, &problem.root);

        let mut params = problem.initial_params()?;
        let mut rms = objective_rms(&params, shape, grid, cfg)?;
        let mut log = vec![IterationRecord {
            iteration: 0,
            rho: params.rho,
            rms,
        }];
        monitor(&log[0]);

        let mut dt = opt.flow_dt;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opt.max_iterations {
            if rms < opt.objective_tol {
                converged = true;
                break;
            }
            iterations += 1;
            let v = flow_velocity(&params, shape, grid, opt.ridge, cfg)?;
            let step = DVector::from_iterator(v.len(), v.iter().map(|x| x * dt));
            let rel = relative_step(&step, &params.to_vector());

            let trial = advance(&params, &v, dt).and_then(|p| {
                let r = objective_rms(&p, shape, grid, cfg)?;
                Ok((p, r))
            });
            match trial {
                Ok((p, r)) if r < rms => {
                    params = p;
                    rms = r;
                    dt *= DT_GROW;
                    let rec = IterationRecord {
                        iteration: iterations,
                        rho: params.rho,
                        rms,
                    };
                    monitor(&rec);
                    log.push(rec);
                }
                Ok(_)
                | Err(Error::NoRoot { .. })
                | Err(Error::NonConvergence { .. })
                | Err(Error::TangentialZero { .. })
                | Err(Error::InvalidParams(_)) => {
                    dt *= DT_SHRINK;
                }
                Err(e) => return Err(e),
            }
            // The flow's fixed point is a weighted least-squares optimum;
            // once steps stall there is nothing left to gain.
            if rel < opt.step_tol {
                converged = true;
                break;
            }
        }
        finish(
            problem,
            self.name(),
            params,
            rms,
            iterations,
            converged,
            log,
        )
    }
}

/// Flow fit from the unit-circle start with adaptive step length.
pub fn fit_flow(
    shape: &TargetShape,
    n_terms: usize,
    grid: &QuadratureGrid,
    opt: &OptimConfig,
    cfg: &RootConfig,
) -> Result<FitResult> {
    let problem = FitProblem::new(shape, n_terms, *grid, *opt, *cfg);
    FlowOptimizer.fit(&problem, &mut |_| {})
}
