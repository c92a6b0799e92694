use nalgebra::DVector;

use super::momentum::momentum_search;
use super::{rho, sigma_update, Acceptance, HyperParams, IterationRecord, OptimizerKind, SolverState, SubproblemSolver};
use crate::error::Result;
use crate::objective::Objective;
use crate::subproblem::{
    cauchy_point, solve_exact, solve_krylov_with, solve_trust_exact, solve_trust_krylov, CrsSolution, CubicModel,
    KrylovOptions, EXACT_TOL, KRYLOV_TOL,
};

/// One iteration of `kind`.
pub fn step(
    kind: OptimizerKind,
    state: &mut SolverState,
    model: &dyn Objective,
    p: &HyperParams,
    solver: SubproblemSolver,
) -> IterationRecord {
    match kind {
        OptimizerKind::Arcm => arcm_step(state, model, p, solver),
        _ => baseline_step(kind, state, model, p, solver),
    }
}

/// One ARCm iteration: cubic step, ratio test, momentum search on success,
/// penalty update.
pub fn arcm_step(
    state: &mut SolverState,
    model: &dyn Objective,
    p: &HyperParams,
    solver: SubproblemSolver,
) -> IterationRecord {
    adaptive_cubic(state, model, p, solver, true)
}

/// One iteration of a baseline (ARC, CR, CRm or TR).
///
/// # Panics
/// When `kind` is [`OptimizerKind::Arcm`].
pub fn baseline_step(
    kind: OptimizerKind,
    state: &mut SolverState,
    model: &dyn Objective,
    p: &HyperParams,
    solver: SubproblemSolver,
) -> IterationRecord {
    match kind {
        OptimizerKind::Arc => adaptive_cubic(state, model, p, solver, false),
        OptimizerKind::Cr => fixed_cubic(state, model, p, solver, false),
        OptimizerKind::Crm => fixed_cubic(state, model, p, solver, true),
        OptimizerKind::Tr => trust_region(state, model, p, solver),
        OptimizerKind::Arcm => panic!("ARCm is not a baseline"),
    }
}

fn cubic_solve(
    state: &SolverState,
    model: &dyn Objective,
    sigma: f64,
    p: &HyperParams,
    solver: SubproblemSolver,
) -> Result<CrsSolution> {
    let m = CubicModel::new(state.grad.clone(), model.hessian(&state.x), sigma)?;
    let krylov = |max_dim| KrylovOptions {
        max_dim,
        ..KrylovOptions::default()
    };
    match (solver, state.escape.as_ref()) {
        (SubproblemSolver::Exact, _) => solve_exact(&m, EXACT_TOL),
        (SubproblemSolver::Krylov, start) => solve_krylov_with(&m, &krylov(p.krylov_max_dim), start),
        (SubproblemSolver::Cauchy, None) => cauchy_point(&m),
        // Along a single escape direction the one-dimensional Krylov solve
        // is the Cauchy point of that direction.
        (SubproblemSolver::Cauchy, Some(u)) => solve_krylov_with(&m, &krylov(1), Some(u)),
    }
}

/// Record skeleton for `state` before it is advanced.
fn record(state: &SolverState, kind: OptimizerKind) -> IterationRecord {
    IterationRecord {
        k: state.k,
        f: state.f_x,
        grad_norm: state.grad.norm(),
        sigma: state.scale(kind),
        step_norm: 0.0,
        rho: f64::NEG_INFINITY,
        accepted: Acceptance::Fail,
        beta: 0.0,
        momentum_sign: 0,
        krylov_dim: 0,
        model_decrease: 0.0,
        wall_time_s: 0.0,
        model_grad_norm: 0.0,
        f_trial: f64::NAN,
        f_next: state.f_x,
        lambda_min: None,
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Moves the iterate and refreshes the cached value and gradient.
fn advance(state: &mut SolverState, model: &dyn Objective, x: DVector<f64>, f: f64) {
    state.grad = model.gradient(&x);
    state.x = x;
    state.f_x = f;
    state.successes += 1;
    state.consecutive_failures = 0;
}

fn reject(state: &mut SolverState) {
    state.failures += 1;
    state.consecutive_failures += 1;
}

fn finish(state: &mut SolverState, rec: &mut IterationRecord) {
    rec.f_next = state.f_x;
    state.k += 1;
    state.escape = None;
}

fn adaptive_cubic(
    state: &mut SolverState,
    model: &dyn Objective,
    p: &HyperParams,
    solver: SubproblemSolver,
    momentum: bool,
) -> IterationRecord {
    let kind = if momentum { OptimizerKind::Arcm } else { OptimizerKind::Arc };
    let mut rec = record(state, kind);
    match cubic_solve(state, model, state.sigma, p, solver) {
        Err(_) => {
            reject(state);
            state.sigma = sigma_update(state.sigma, f64::NEG_INFINITY, p);
        }
        Ok(sol) => {
            let y = &state.x + &sol.s;
            let f_y = model.value(&y);
            let r = rho(state.f_x, f_y, sol.model_decrease);
            let acc = Acceptance::classify(r, p);
            rec.step_norm = sol.s.norm();
            rec.rho = r;
            rec.accepted = acc;
            rec.krylov_dim = sol.krylov_dim;
            rec.model_decrease = sol.model_decrease;
            rec.model_grad_norm = sol.model_grad_norm;
            rec.f_trial = f_y;
            if acc.is_success() {
                if momentum {
                    let m = momentum_search(model, &y, f_y, &state.v, &sol.s, p);
                    rec.beta = m.beta;
                    if m.beta > 0.0 {
                        rec.momentum_sign = sign(sol.s.dot(&state.v));
                    }
                    state.v = &state.v * m.beta + &sol.s;
                    advance(state, model, m.z, m.f_z);
                } else {
                    state.v = sol.s;
                    advance(state, model, y, f_y);
                }
            } else {
                reject(state);
            }
            state.sigma = sigma_update(state.sigma, r, p);
        }
    }
    finish(state, &mut rec);
    rec
}

/// CR and CRm: fixed penalty `M`, every computed step is taken.
fn fixed_cubic(
    state: &mut SolverState,
    model: &dyn Objective,
    p: &HyperParams,
    solver: SubproblemSolver,
    momentum: bool,
) -> IterationRecord {
    let kind = if momentum { OptimizerKind::Crm } else { OptimizerKind::Cr };
    let mut rec = record(state, kind);
    let solved = cubic_solve(state, model, state.sigma, p, solver);
    match solved {
        Ok(sol) if sol.s.iter().any(|v| *v != 0.0) => {
            let y = &state.x + &sol.s;
            let f_y = model.value(&y);
            let r = rho(state.f_x, f_y, sol.model_decrease);
            rec.step_norm = sol.s.norm();
            rec.rho = r;
            rec.krylov_dim = sol.krylov_dim;
            rec.model_decrease = sol.model_decrease;
            rec.model_grad_norm = sol.model_grad_norm;
            rec.f_trial = f_y;
            if !f_y.is_finite() {
                reject(state);
            } else {
                rec.accepted = if r > p.eta2 {
                    Acceptance::VerySuccess
                } else {
                    Acceptance::Success
                };
                if momentum {
                    // Extrapolate along the difference of consecutive CR points.
                    let dir = &y - &state.y_prev;
                    let m = momentum_search(model, &y, f_y, &dir, &sol.s, p);
                    rec.beta = m.beta;
                    if m.beta > 0.0 {
                        rec.momentum_sign = sign(sol.s.dot(&dir));
                    }
                    state.y_prev = y;
                    advance(state, model, m.z, m.f_z);
                } else {
                    advance(state, model, y, f_y);
                }
            }
        }
        _ => reject(state),
    }
    finish(state, &mut rec);
    rec
}

fn trust_region(
    state: &mut SolverState,
    model: &dyn Objective,
    p: &HyperParams,
    solver: SubproblemSolver,
) -> IterationRecord {
    let mut rec = record(state, OptimizerKind::Tr);
    let h = model.hessian(&state.x);
    let g = &state.grad;
    let radius = state.radius;
    let solved = match solver {
        SubproblemSolver::Exact => solve_trust_exact(g, &h, radius),
        SubproblemSolver::Krylov => {
            solve_trust_krylov(g, &h, radius, p.krylov_max_dim, KRYLOV_TOL, state.escape.as_ref())
        }
        SubproblemSolver::Cauchy => solve_trust_krylov(g, &h, radius, 1, KRYLOV_TOL, state.escape.as_ref()),
    };
    match solved {
        Err(_) => {
            reject(state);
            state.radius *= 0.5;
        }
        Ok(sol) => {
            let y = &state.x + &sol.s;
            let f_y = model.value(&y);
            let r = rho(state.f_x, f_y, sol.model_decrease);
            let acc = Acceptance::classify(r, p);
            rec.step_norm = sol.s.norm();
            rec.rho = r;
            rec.accepted = acc;
            rec.krylov_dim = sol.krylov_dim;
            rec.model_decrease = sol.model_decrease;
            rec.f_trial = f_y;
            match acc {
                Acceptance::VerySuccess => state.radius = (2.0 * radius).min(p.tr_radius_max),
                Acceptance::Success => {}
                Acceptance::Fail => state.radius = 0.5 * radius,
            }
            if acc.is_success() {
                advance(state, model, y, f_y);
            } else {
                reject(state);
            }
        }
    }
    finish(state, &mut rec);
    rec
}
