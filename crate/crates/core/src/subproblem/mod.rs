//! The cubic-regularized subproblem
//!
//! ```text
//! min_s  q(s) = g^T s + 1/2 s^T H s + sigma/6 |s|^3
//! ```
//!
//! solved exactly through the secular equation on a full eigendecomposition,
//! approximately on a Lanczos-generated Krylov subspace, or along the
//! steepest-descent ray (Cauchy point). Approximate solutions can be
//! certified against the three-part inexactness condition.

mod lanczos;
mod secular;
mod trust;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::Hessian;

pub use lanczos::{min_eigen_from, min_eigen_lanczos, LanczosBasis, MinEigen, BREAKDOWN_TOL};
pub use secular::{cubic_in_eigenbasis, trust_in_eigenbasis, EigenSystem, ShiftSolution};
pub use trust::{solve_trust_exact, solve_trust_krylov, TrustSolution};

/// Default tolerance of the exact solver (relative to `max(1, |g|)`).
pub const EXACT_TOL: f64 = 1e-9;
/// Default relative model-gradient tolerance of the Krylov solver.
pub const KRYLOV_TOL: f64 = 1e-6;

/// One cubic subproblem instance at the current iterate.
pub struct CubicModel<'a> {
    pub g: DVector<f64>,
    pub hessian: Hessian<'a>,
    pub sigma: f64,
}

impl<'a> CubicModel<'a> {
    pub fn new(g: DVector<f64>, hessian: Hessian<'a>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Precondition(format!("sigma must be positive, got {sigma}")));
        }
        if g.len() != hessian.dim() {
            return Err(Error::Precondition(format!(
                "gradient has length {} but Hessian dimension is {}",
                g.len(),
                hessian.dim()
            )));
        }
        Ok(CubicModel { g, hessian, sigma })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// `q(s)`, the model value relative to `f(x_k)`.
    pub fn value(&self, s: &DVector<f64>) -> f64 {
        self.value_with(s, &self.hessian.apply(s))
    }

    fn value_with(&self, s: &DVector<f64>, hs: &DVector<f64>) -> f64 {
        let n = s.norm();
        self.g.dot(s) + 0.5 * s.dot(hs) + self.sigma / 6.0 * n * n * n
    }

    /// `g + H s + sigma/2 |s| s`.
    pub fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        self.gradient_with(s, &self.hessian.apply(s))
    }

    fn gradient_with(&self, s: &DVector<f64>, hs: &DVector<f64>) -> DVector<f64> {
        &self.g + hs + s * (0.5 * self.sigma * s.norm())
    }

    fn solution(&self, s: DVector<f64>, hs: &DVector<f64>, solver: SolverKind) -> CrsSolution {
        CrsSolution {
            model_decrease: -self.value_with(&s, hs),
            model_grad_norm: self.gradient_with(&s, hs).norm(),
            lambda: None,
            solver,
            krylov_dim: 0,
            zero_gradient: false,
            s,
        }
    }
}

/// `q(s) = g^T s + 1/2 s^T H s + sigma/6 |s|^3`.
pub fn model_value(m: &CubicModel<'_>, s: &DVector<f64>) -> f64 {
    m.value(s)
}

/// `grad q(s) = g + H s + sigma/2 |s| s`.
pub fn model_gradient(m: &CubicModel<'_>, s: &DVector<f64>) -> DVector<f64> {
    m.gradient(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Krylov,
    Cauchy,
}

#[derive(Debug, Clone)]
pub struct CrsSolution {
    pub s: DVector<f64>,
    /// `-q(s) = f(x_k) - m_k(s)`.
    pub model_decrease: f64,
    pub model_grad_norm: f64,
    /// Secular multiplier `sigma |s| / 2` (exact solver only).
    pub lambda: Option<f64>,
    pub solver: SolverKind,
    pub krylov_dim: usize,
    /// Set when the Krylov solver was handed `g = 0` and returned `s = 0`.
    pub zero_gradient: bool,
}

/// Global minimizer via eigendecomposition and the secular equation.
///
/// Needs a dense Hessian. The returned step satisfies
/// `|grad q(s)| <= tol * max(1, |g|)` or the call fails.
pub fn solve_exact(m: &CubicModel<'_>, tol: f64) -> Result<CrsSolution> {
    let h = m.hessian.dense().ok_or_else(|| {
        Error::Precondition("exact subproblem solver needs a dense Hessian".into())
    })?;
    let eig = EigenSystem::new(h)?;
    let shift = cubic_in_eigenbasis(&eig, &m.g, m.sigma)?;
    let hs = h * &shift.s;
    let mut sol = m.solution(shift.s, &hs, SolverKind::Exact);
    sol.lambda = Some(0.5 * m.sigma * sol.s.norm());
    sol.krylov_dim = m.dim();
    let limit = tol * m.g.norm().max(1.0);
    if !(sol.model_grad_norm <= limit) {
        return Err(Error::SolverFailure {
            iterations: shift.iterations,
            residual: sol.model_grad_norm,
            best: sol.s,
        });
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    pub max_dim: usize,
    /// Stop once `|grad q(s)| <= tol * max(1, |g|)` ...
    pub tol: f64,
    /// ... and, when set, also `|grad q(s)| <= theta (sigma/12)^{2/3} |s|^2`,
    /// which keeps `|grad q|^{3/2}` below `theta^{3/2} sigma |s|^3 / 12`.
    pub cubic_theta: Option<f64>,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 50,
            tol: KRYLOV_TOL,
            cubic_theta: Some(0.5),
        }
    }
}

/// Lanczos/Krylov solver seeded with `g`.
pub fn solve_krylov(m: &CubicModel<'_>, max_dim: usize, tol: f64) -> Result<CrsSolution> {
    let opts = KrylovOptions {
        max_dim,
        tol,
        ..KrylovOptions::default()
    };
    solve_krylov_with(m, &opts, None)
}

/// Lanczos/Krylov solver. `start` overrides the starting vector (used to
/// inject a negative-curvature direction when `g` vanishes).
pub fn solve_krylov_with(
    m: &CubicModel<'_>,
    opts: &KrylovOptions,
    start: Option<&DVector<f64>>,
) -> Result<CrsSolution> {
    if opts.max_dim == 0 {
        return Err(Error::Precondition("max_dim must be at least 1".into()));
    }
    let gnorm = m.g.norm();
    let start = match start {
        Some(v) => v,
        None if gnorm == 0.0 => {
            let d = m.dim();
            let mut sol = m.solution(DVector::zeros(d), &DVector::zeros(d), SolverKind::Krylov);
            sol.zero_gradient = true;
            return Ok(sol);
        }
        None => &m.g,
    };
    let cap = opts.max_dim.min(m.dim());
    let base_limit = opts.tol * gnorm.max(1.0);
    let mut basis = LanczosBasis::new(&m.hessian, start)?;
    loop {
        basis.expand()?;
        let t = basis.tridiagonal();
        let gr = basis.project(&m.g);
        let eig = EigenSystem::new(&t)?;
        let y = cubic_in_eigenbasis(&eig, &gr, m.sigma)?.s;
        let s = basis.lift(&y);
        let hs = basis.lift_hessian(&y);
        let mut sol = m.solution(s, &hs, SolverKind::Krylov);
        sol.krylov_dim = basis.len();
        let snorm = sol.s.norm();
        let limit = match opts.cubic_theta {
            Some(theta) => base_limit.min(theta * (m.sigma / 12.0).powf(2.0 / 3.0) * snorm * snorm),
            None => base_limit,
        };
        if !sol.model_decrease.is_finite() {
            return Err(Error::Numeric("non-finite Krylov solution".into()));
        }
        if sol.model_grad_norm <= limit || basis.len() >= cap || basis.exhausted() {
            return Ok(sol);
        }
    }
}

/// Minimizer of the model along `-g`.
pub fn cauchy_point(m: &CubicModel<'_>) -> Result<CrsSolution> {
    let gn = m.g.norm();
    if gn == 0.0 {
        return Err(Error::Precondition("Cauchy point needs a nonzero gradient".into()));
    }
    let hg = m.hessian.apply(&m.g);
    let curv = m.g.dot(&hg);
    // Positive root of (sigma/2)|g|^3 a^2 + (g^T H g) a - |g|^2 = 0, in the
    // cancellation-free form.
    let alpha = 2.0 * gn * gn / (curv + (curv * curv + 2.0 * m.sigma * gn.powi(5)).sqrt());
    let s = &m.g * -alpha;
    let hs = &hg * -alpha;
    let mut sol = m.solution(s, &hs, SolverKind::Cauchy);
    sol.krylov_dim = 1;
    Ok(sol)
}

/// Lanczos steps used to estimate `lambda_min` of a matrix-free Hessian.
pub const CURVATURE_STEPS: usize = 100;
/// Restarts from the current Ritz vector while the estimate is unconverged.
pub const CURVATURE_RESTARTS: usize = 3;
const CURVATURE_SEED: u64 = 0x1a9c_2b0e;

/// Lowest eigenpair of `H`: exact for dense Hessians, a Lanczos estimate
/// (flagged through `converged`) otherwise.
pub fn lowest_eigenpair(hessian: &Hessian<'_>) -> Result<MinEigen> {
    match hessian.dense() {
        Some(h) => {
            let eig = EigenSystem::new(h)?;
            let i = eig.values.imin();
            Ok(MinEigen {
                value: eig.values[i],
                vector: eig.vectors.column(i).into_owned(),
                converged: true,
                steps: h.nrows(),
            })
        }
        None => {
            let mut est = min_eigen_lanczos(hessian, CURVATURE_STEPS, CURVATURE_SEED)?;
            for _ in 0..CURVATURE_RESTARTS {
                if est.converged {
                    break;
                }
                let next = min_eigen_from(hessian, &est.vector, CURVATURE_STEPS)?;
                let steps = est.steps + next.steps;
                if next.value <= est.value || next.converged {
                    est = next;
                }
                est.steps = steps;
            }
            Ok(est)
        }
    }
}

/// Inexactness certificate of an approximate step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InexactnessCertificate {
    /// Smallest `delta` with `q(s~) <= -sigma/12 |s~|^3 + delta`.
    pub delta1: f64,
    /// `|grad q(s~)|^{3/2}`.
    pub delta2: f64,
    /// `| |s~| - |s*| |^3` when the exact step norm is known.
    pub delta3: Option<f64>,
    pub delta: f64,
    /// `delta / (sigma |s~|^3)`.
    pub ratio_to_cubic: f64,
}

pub fn certify_inexact(
    m: &CubicModel<'_>,
    approx: &CrsSolution,
    exact_norm: Option<f64>,
) -> Result<InexactnessCertificate> {
    if !(approx.model_decrease > 0.0) {
        return Err(Error::CertificateInvalid(approx.model_decrease));
    }
    let n = approx.s.norm();
    let cubic = m.sigma * n * n * n;
    let delta1 = (cubic / 12.0 - approx.model_decrease).max(0.0);
    let delta2 = approx.model_grad_norm.powf(1.5);
    let delta3 = exact_norm.map(|e| (n - e).abs().powi(3));
    let delta = delta1.max(delta2).max(delta3.unwrap_or(0.0));
    Ok(InexactnessCertificate {
        delta1,
        delta2,
        delta3,
        delta,
        ratio_to_cubic: delta / cubic,
    })
}
