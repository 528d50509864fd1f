//! Plain Newton-Raphson iteration with full trajectory capture, and the damped
//! first step used only to evaluate the diagnostic indicators.

use thiserror::Error;

use crate::linops::{self, LuFactors, Mat};
use crate::model::{EvalFailure, SystemModel};

/// Jacobians with an estimated reciprocal condition number below this are
/// treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-20;
/// Jacobians below this rcond are flagged as badly conditioned in reports.
pub const ILL_CONDITIONED_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Convergence when the ∞-norm of the increment drops to this value.
    pub increment_tol: f64,
    /// Shrink factor for the first-step damping sequence.
    pub damping_factor: f64,
    pub lambda_min: f64,
    pub capture_trajectory: bool,
    /// rcond below which the Jacobian counts as singular.
    pub singular_rcond: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            increment_tol: 1e-12,
            damping_factor: 0.7,
            lambda_min: 1e-6,
            capture_trajectory: true,
            singular_rcond: SINGULAR_RCOND,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.damping_factor > 0.0 && self.damping_factor < 1.0) {
            return Err(format!("damping factor {} must lie in (0, 1)", self.damping_factor));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min <= 1.0) {
            return Err(format!("lambda_min {} must lie in (0, 1]", self.lambda_min));
        }
        if !(self.increment_tol >= 0.0) {
            return Err(format!("increment tolerance {} must be non-negative", self.increment_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("Jacobian is singular or too badly conditioned (rcond {rcond:e})")]
    SingularJacobian { rcond: f64 },
    #[error(transparent)]
    NonEvaluable(#[from] EvalFailure),
    #[error("no damping factor down to {lambda_min:e} makes the residual evaluable")]
    DampingExhausted { lambda_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    NonEvaluable,
    SingularJacobian,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max_iterations",
            Self::NonEvaluable => "non_evaluable",
            Self::SingularJacobian => "singular_jacobian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Newton updates that moved the iterate by more than the tolerance. The
    /// final step that only confirms convergence is not counted, so a linear
    /// system reports one iteration.
    pub iterations: usize,
    /// Damping of the first step needed to make the residual evaluable
    /// (1 when the full step is evaluable).
    pub lambda_used: f64,
    /// x₀, x₁, … (only x₀ and the last iterate unless capture is requested).
    pub trajectory: Vec<Vec<f64>>,
    pub x_final: Vec<f64>,
    /// ‖f(x_final)‖∞, or infinity when the residual is not evaluable there.
    pub final_residual_inf: f64,
    pub increment_norms: Vec<f64>,
    /// Smallest rcond of the Jacobians factored during the solve.
    pub min_rcond: f64,
    /// Steps whose Jacobian fell below [`ILL_CONDITIONED_RCOND`].
    pub ill_conditioned_steps: usize,
    pub failure: Option<SolverError>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Output of the damped first step.
#[derive(Debug)]
pub struct FirstStepResult {
    pub x0: Vec<f64>,
    /// Full, undamped Newton step.
    pub x1: Vec<f64>,
    /// `x0 + lambda (x1 - x0)`, the nearest point along the step where f is evaluable.
    pub x1_star: Vec<f64>,
    pub lambda: f64,
    pub f_x0: Vec<f64>,
    pub f_x1_star: Vec<f64>,
    pub jacobian_at_x0: Mat,
    pub lu: LuFactors,
}

impl FirstStepResult {
    /// Undamped increment `x1 - x0`.
    pub fn increment(&self) -> Vec<f64> {
        self.x1.iter().zip(&self.x0).map(|(a, b)| a - b).collect()
    }
}

struct Step {
    f: Vec<f64>,
    jacobian: Mat,
    lu: LuFactors,
    x_next: Vec<f64>,
}

fn step(model: &SystemModel, x: &[f64], singular_rcond: f64) -> Result<Step, SolverError> {
    let f = model.eval(x)?;
    let jacobian = model.jacobian_at(x)?;
    let lu = linops::lu_factor(&jacobian).map_err(|_| SolverError::SingularJacobian { rcond: 0.0 })?;
    if lu.rcond() < singular_rcond {
        return Err(SolverError::SingularJacobian { rcond: lu.rcond() });
    }
    let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
    let dx = lu.solve(&neg_f);
    let x_next: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
    Ok(Step { f, jacobian, lu, x_next })
}

/// One undamped Newton update: solves `f_x(x) (x_next - x) = -f(x)`.
pub fn newton_step(model: &SystemModel, x_prev: &[f64]) -> Result<Vec<f64>, SolverError> {
    newton_step_with(model, x_prev, &SolveOptions::default())
}

/// [`newton_step`] honouring the singularity threshold in `opts`.
pub fn newton_step_with(model: &SystemModel, x_prev: &[f64], opts: &SolveOptions) -> Result<Vec<f64>, SolverError> {
    step(model, x_prev, opts.singular_rcond).map(|s| s.x_next)
}

/// Largest λ in {1, d, d², …} with `f(x0 + λ (x1 - x0))` evaluable.
fn damp(
    model: &SystemModel,
    x0: &[f64],
    x1: &[f64],
    opts: &SolveOptions,
) -> Result<(f64, Vec<f64>, Vec<f64>), SolverError> {
    let mut k = 0;
    loop {
        let lambda = opts.damping_factor.powi(k);
        if lambda < opts.lambda_min {
            return Err(SolverError::DampingExhausted { lambda_min: opts.lambda_min });
        }
        let x: Vec<f64> =
            if k == 0 { x1.to_vec() } else { x0.iter().zip(x1).map(|(a, b)| a + lambda * (b - a)).collect() };
        if let Ok(f) = model.eval(&x) {
            return Ok((lambda, x, f));
        }
        k += 1;
    }
}

/// Computes the undamped first step and, if the residual cannot be evaluated
/// at its end point, shrinks it until it can.
pub fn first_step_damped(model: &SystemModel, x0: &[f64], opts: &SolveOptions) -> Result<FirstStepResult, SolverError> {
    let s = step(model, x0, opts.singular_rcond)?;
    let (lambda, x1_star, f_x1_star) = damp(model, x0, &s.x_next, opts)?;
    Ok(FirstStepResult {
        x0: x0.to_vec(),
        x1: s.x_next,
        x1_star,
        lambda,
        f_x0: s.f,
        f_x1_star,
        jacobian_at_x0: s.jacobian,
        lu: s.lu,
    })
}

/// Runs full Newton steps from `x0` until the increment is below tolerance,
/// the iteration limit is hit, or a step fails.
pub fn newton_solve(model: &SystemModel, x0: &[f64], opts: &SolveOptions) -> SolveReport {
    let mut x = x0.to_vec();
    let mut trajectory = vec![x.clone()];
    let mut increment_norms = Vec::new();
    let mut min_rcond = f64::INFINITY;
    let mut ill_conditioned_steps = 0;
    let mut lambda_used = 1.0;
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = opts.max_iter;
    let mut failure = None;

    for k in 0..opts.max_iter {
        let s = match step(model, &x, opts.singular_rcond) {
            Ok(s) => s,
            Err(e) => {
                status = match e {
                    SolverError::SingularJacobian { .. } => SolveStatus::SingularJacobian,
                    _ => SolveStatus::NonEvaluable,
                };
                if let SolverError::SingularJacobian { rcond } = e {
                    min_rcond = min_rcond.min(rcond);
                }
                iterations = k;
                failure = Some(e);
                break;
            }
        };
        min_rcond = min_rcond.min(s.lu.rcond());
        if s.lu.rcond() < ILL_CONDITIONED_RCOND {
            ill_conditioned_steps += 1;
        }
        if k == 0 && model.eval(&s.x_next).is_err() {
            lambda_used = damp(model, &x, &s.x_next, opts).map_or(0.0, |(l, _, _)| l);
        }
        let inc = x.iter().zip(&s.x_next).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
        x = s.x_next;
        increment_norms.push(inc);
        if opts.capture_trajectory {
            trajectory.push(x.clone());
        }
        if !inc.is_finite() {
            status = SolveStatus::NonEvaluable;
            iterations = k + 1;
            failure = Some(SolverError::NonEvaluable(EvalFailure::non_finite(0)));
            break;
        }
        if inc <= opts.increment_tol {
            status = SolveStatus::Converged;
            iterations = k;
            break;
        }
    }
    if !opts.capture_trajectory && trajectory.last() != Some(&x) {
        trajectory.push(x.clone());
    }
    let final_residual_inf = model.eval(&x).map_or(f64::INFINITY, |f| linops::norm_inf(&f));
    SolveReport {
        status,
        iterations,
        lambda_used,
        trajectory,
        x_final: x,
        final_residual_inf,
        increment_norms,
        min_rcond,
        ill_conditioned_steps,
        failure,
    }
}
