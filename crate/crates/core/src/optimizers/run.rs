use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::step::step;
use super::{HyperParams, OptimizerKind, SolverState, StopReason, SubproblemSolver, Trace};
use crate::error::{Error, Result};
use crate::objective::{Objective, Point};
use crate::subproblem::lowest_eigenpair;

/// Consecutive unsuccessful iterations after which a run is abandoned.
pub const STAGNATION_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopCriteria {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_seconds: Option<f64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            grad_tol: 1e-6,
            max_iter: 1000,
            max_seconds: None,
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::Config("grad_tol must be positive".into()));
        }
        if let Some(t) = self.max_seconds {
            if !(t > 0.0) {
                return Err(Error::Config("max_seconds must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub stop: StopCriteria,
    pub solver: SubproblemSolver,
    /// Record `lambda_min` of the Hessian at every iterate.
    pub track_curvature: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stop: StopCriteria::default(),
            solver: SubproblemSolver::Krylov,
            track_curvature: false,
        }
    }
}

/// Runs `kind` from `x0` until a stopping rule fires.
///
/// A point with `|g| <= grad_tol` ends the run unless the Hessian there has
/// an eigenvalue below `-sqrt(grad_tol)`; in that case the next subproblem is
/// seeded with the corresponding eigenvector.
///
/// Errors are returned for invalid settings or a non-finite start. Numeric
/// breakdown later in the run ends it with [`StopReason::Error`].
pub fn run(
    kind: OptimizerKind,
    model: &dyn Objective,
    x0: &Point,
    p: &HyperParams,
    opts: &RunOptions,
) -> Result<Trace> {
    p.validate()?;
    opts.stop.validate()?;
    if opts.solver == SubproblemSolver::Exact && model.dense_hessian(x0).is_none() {
        return Err(Error::Precondition(format!(
            "exact subproblem solver needs a dense Hessian, `{}` has dimension {}",
            model.name(),
            model.dim()
        )));
    }
    let mut state = SolverState::new(kind, model, x0.clone(), p)?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut error = None;
    let curvature_floor = -opts.stop.grad_tol.sqrt();

    let stop_reason = loop {
        let needs_curvature = opts.track_curvature || state.grad.norm() <= opts.stop.grad_tol;
        let curvature = if needs_curvature {
            match lowest_eigenpair(&model.hessian(&state.x)) {
                Ok(c) => Some(c),
                Err(e) => {
                    error = Some(e.to_string());
                    break StopReason::Error;
                }
            }
        } else {
            None
        };
        if state.grad.norm() <= opts.stop.grad_tol {
            match &curvature {
                Some(c) if c.value < curvature_floor => state.escape = Some(c.vector.clone()),
                _ => break StopReason::GradTol,
            }
        }
        if state.k >= opts.stop.max_iter {
            break StopReason::MaxIter;
        }
        if opts.stop.max_seconds.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            break StopReason::MaxSeconds;
        }
        if state.consecutive_failures >= STAGNATION_LIMIT {
            break StopReason::Stagnation;
        }

        let mut rec = step(kind, &mut state, model, p, opts.solver);
        if opts.track_curvature {
            rec.lambda_min = curvature.map(|c| c.value);
        }
        rec.wall_time_s = start.elapsed().as_secs_f64();
        records.push(rec);

        if let Some(i) = state.grad.iter().position(|v| !v.is_finite()) {
            error = Some(format!("gradient became non-finite at coordinate {i}"));
            break StopReason::Error;
        }
    };

    Ok(Trace {
        kind,
        solver: opts.solver,
        params: *p,
        records,
        final_f: state.f_x,
        final_grad_norm: state.grad.norm(),
        final_sigma: state.scale(kind),
        final_x: state.x,
        stop_reason,
        error,
    })
}
