//! ARCm and the baselines CR, CRm, ARC and TR.
//!
//! Every method advances a [`SolverState`] one iteration at a time through
//! [`step`] and emits an [`IterationRecord`]; [`run`] drives the loop and
//! collects a [`Trace`].

mod momentum;
mod run;
mod step;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Point;

pub use momentum::{momentum_cap, momentum_search, MomentumResult};
pub use run::{run, RunOptions, StopCriteria, STAGNATION_LIMIT};
pub use step::{arcm_step, baseline_step, step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Arcm,
    Arc,
    Cr,
    Crm,
    Tr,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Arcm,
        OptimizerKind::Arc,
        OptimizerKind::Cr,
        OptimizerKind::Crm,
        OptimizerKind::Tr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Arcm => "arcm",
            OptimizerKind::Arc => "arc",
            OptimizerKind::Cr => "cr",
            OptimizerKind::Crm => "crm",
            OptimizerKind::Tr => "tr",
        }
    }

    /// Methods whose penalty follows the adaptive sigma schedule.
    pub fn is_adaptive_cubic(self) -> bool {
        matches!(self, OptimizerKind::Arcm | OptimizerKind::Arc)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown optimizer `{s}`")))
    }
}

/// How the inner subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubproblemSolver {
    /// Full eigendecomposition; needs a dense Hessian.
    Exact,
    /// Lanczos projection with at most `krylov_max_dim` vectors.
    Krylov,
    /// Steepest-descent ray only.
    Cauchy,
}

impl FromStr for SubproblemSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SubproblemSolver::Exact),
            "krylov" => Ok(SubproblemSolver::Krylov),
            "cauchy" => Ok(SubproblemSolver::Cauchy),
            other => Err(Error::Config(format!("unknown subproblem solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Penalty growth after an unsuccessful iteration.
    pub gamma1: f64,
    /// Penalty factor after a successful iteration.
    pub gamma2: f64,
    /// Penalty factor after a very successful iteration.
    pub gamma3: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    /// Absolute cap on the momentum step size.
    pub tau: f64,
    /// Momentum cap proportional to `|s|`.
    pub alpha1: f64,
    /// Momentum cap proportional to `|s|^2`.
    pub alpha2: f64,
    pub krylov_max_dim: usize,
    /// Number of halvings tried after the largest momentum step size.
    pub momentum_halvings: u32,
    /// Fixed penalty of CR and CRm.
    pub fixed_m: f64,
    pub tr_radius0: f64,
    pub tr_radius_max: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma1: 2.0,
            gamma2: 1.0,
            gamma3: 0.5,
            eta1: 0.1,
            eta2: 0.9,
            sigma0: 1.0,
            sigma_min: 1e-4,
            tau: 0.5,
            alpha1: 0.1,
            alpha2: 1.0,
            krylov_max_dim: 50,
            momentum_halvings: 5,
            fixed_m: 10.0,
            tr_radius0: 1.0,
            tr_radius_max: 100.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        let all = [
            self.gamma1,
            self.gamma2,
            self.gamma3,
            self.eta1,
            self.eta2,
            self.sigma0,
            self.sigma_min,
            self.tau,
            self.alpha1,
            self.alpha2,
            self.fixed_m,
            self.tr_radius0,
            self.tr_radius_max,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("hyperparameters must be finite");
        }
        if !(self.gamma1 > 1.0) {
            return fail("gamma1 must satisfy gamma1 > 1");
        }
        if !(self.gamma2 <= 1.0 && self.gamma2 > self.gamma3) {
            return fail("gamma2 must satisfy 1 ≥ gamma2 > gamma3");
        }
        if !(self.gamma3 > 0.0) {
            return fail("gamma3 must satisfy gamma3 > 0");
        }
        if !(self.eta2 < 1.0 && self.eta2 > self.eta1) {
            return fail("eta2 must satisfy 1 > eta2 > eta1");
        }
        if !(self.eta1 > 0.0) {
            return fail("eta1 must satisfy eta1 > 0");
        }
        if !(self.sigma_min > 0.0) {
            return fail("sigma_min must satisfy sigma_min > 0");
        }
        if !(self.sigma0 >= self.sigma_min) {
            return fail("sigma0 must satisfy sigma0 ≥ sigma_min");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return fail("tau must satisfy 0 < tau < 1");
        }
        // Zero momentum caps are allowed: they reduce ARCm to ARC.
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) {
            return fail("alpha1 and alpha2 must be nonnegative");
        }
        if self.krylov_max_dim == 0 {
            return fail("krylov_max_dim must be at least 1");
        }
        if !(self.fixed_m > 0.0) {
            return fail("fixed_m must be positive");
        }
        if !(self.tr_radius0 > 0.0 && self.tr_radius_max >= self.tr_radius0) {
            return fail("trust radii must satisfy 0 < tr_radius0 ≤ tr_radius_max");
        }
        Ok(())
    }
}

/// Acceptance ratio of actual to predicted decrease.
///
/// A model decrease that is not positive or is below `1e-15 * |f_x|` yields
/// `-inf`, which every method treats as unsuccessful.
pub fn rho(f_x: f64, f_trial: f64, model_decrease: f64) -> f64 {
    if !(model_decrease > 0.0 && model_decrease >= 1e-15 * f_x.abs()) || !f_trial.is_finite() {
        return f64::NEG_INFINITY;
    }
    (f_x - f_trial) / model_decrease
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    VerySuccess,
    Success,
    Fail,
}

impl Acceptance {
    pub fn classify(rho: f64, p: &HyperParams) -> Self {
        if rho > p.eta2 {
            Acceptance::VerySuccess
        } else if rho > p.eta1 {
            Acceptance::Success
        } else {
            Acceptance::Fail
        }
    }

    pub fn is_success(self) -> bool {
        self != Acceptance::Fail
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Acceptance::VerySuccess => "very_success",
            Acceptance::Success => "success",
            Acceptance::Fail => "fail",
        }
    }
}

impl FromStr for Acceptance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "very_success" => Ok(Acceptance::VerySuccess),
            "success" => Ok(Acceptance::Success),
            "fail" => Ok(Acceptance::Fail),
            other => Err(Error::Config(format!("unknown acceptance tag `{other}`"))),
        }
    }
}

/// Adaptive penalty schedule.
pub fn sigma_update(sigma: f64, rho: f64, p: &HyperParams) -> f64 {
    match Acceptance::classify(rho, p) {
        Acceptance::VerySuccess => p.sigma_min.max(p.gamma3 * sigma),
        Acceptance::Success => p.gamma2 * sigma,
        Acceptance::Fail => p.gamma1 * sigma,
    }
}

/// Mutable state of one optimizer run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Point,
    /// Momentum buffer `v_{k-1}`; zero until the first success.
    pub v: DVector<f64>,
    /// Cubic penalty (ARC family) or fixed `M` (CR family).
    pub sigma: f64,
    /// Trust radius (TR only).
    pub radius: f64,
    pub k: usize,
    pub f_x: f64,
    pub grad: DVector<f64>,
    pub successes: usize,
    pub failures: usize,
    pub consecutive_failures: usize,
    /// Previous CR point `y_k` for CRm's extrapolation.
    pub y_prev: Point,
    /// Start vector for the Krylov solver when escaping a saddle.
    pub(crate) escape: Option<DVector<f64>>,
}

impl SolverState {
    pub fn new(
        kind: OptimizerKind,
        model: &dyn crate::objective::Objective,
        x0: Point,
        p: &HyperParams,
    ) -> Result<Self> {
        if x0.len() != model.dim() {
            return Err(Error::Precondition(format!(
                "x0 has {} coordinates, model expects {}",
                x0.len(),
                model.dim()
            )));
        }
        if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("x0 is non-finite at coordinate {i}")));
        }
        let f_x = model.value(&x0);
        if !f_x.is_finite() {
            return Err(Error::Numeric(format!("f(x0) = {f_x}")));
        }
        let grad = model.gradient(&x0);
        if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("gradient at x0 is non-finite at coordinate {i}")));
        }
        let sigma = match kind {
            OptimizerKind::Cr | OptimizerKind::Crm => p.fixed_m,
            _ => p.sigma0,
        };
        Ok(SolverState {
            v: DVector::zeros(x0.len()),
            y_prev: x0.clone(),
            x: x0,
            sigma,
            radius: p.tr_radius0,
            k: 0,
            f_x,
            grad,
            successes: 0,
            failures: 0,
            consecutive_failures: 0,
            escape: None,
        })
    }

    /// The penalty or radius reported in records.
    pub fn scale(&self, kind: OptimizerKind) -> f64 {
        if kind == OptimizerKind::Tr {
            self.radius
        } else {
            self.sigma
        }
    }
}

/// Telemetry of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `f(x_k)` at the start of the iteration.
    pub f: f64,
    pub grad_norm: f64,
    /// `sigma_k` (trust radius for TR).
    pub sigma: f64,
    pub step_norm: f64,
    pub rho: f64,
    pub accepted: Acceptance,
    pub beta: f64,
    /// `sign(s_k^T v_{k-1})` when `beta > 0`, else 0.
    pub momentum_sign: i8,
    pub krylov_dim: usize,
    pub model_decrease: f64,
    pub wall_time_s: f64,
    /// `|grad m_k(s_k)|` of the cubic model (0 for TR).
    pub model_grad_norm: f64,
    /// `f(x_k + s_k)`.
    pub f_trial: f64,
    /// `f(x_{k+1})`.
    pub f_next: f64,
    /// `lambda_min` of the Hessian at `x_k`, when curvature is tracked.
    pub lambda_min: Option<f64>,
}

impl IterationRecord {
    /// Equality on every field except wall time.
    pub fn same_as(&self, other: &IterationRecord) -> bool {
        let a = self;
        // Bit patterns make NaN fields compare equal.
        a.k == other.k
            && a.f.to_bits() == other.f.to_bits()
            && a.grad_norm.to_bits() == other.grad_norm.to_bits()
            && a.sigma.to_bits() == other.sigma.to_bits()
            && a.step_norm.to_bits() == other.step_norm.to_bits()
            && a.rho.to_bits() == other.rho.to_bits()
            && a.accepted == other.accepted
            && a.beta.to_bits() == other.beta.to_bits()
            && a.momentum_sign == other.momentum_sign
            && a.krylov_dim == other.krylov_dim
            && a.model_decrease.to_bits() == other.model_decrease.to_bits()
            && a.model_grad_norm.to_bits() == other.model_grad_norm.to_bits()
            && a.f_trial.to_bits() == other.f_trial.to_bits()
            && a.f_next.to_bits() == other.f_next.to_bits()
            && a.lambda_min.map(f64::to_bits) == other.lambda_min.map(f64::to_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    MaxIter,
    MaxSeconds,
    Stagnation,
    Error,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradTol => "grad_tol",
            StopReason::MaxIter => "max_iter",
            StopReason::MaxSeconds => "max_seconds",
            StopReason::Stagnation => "stagnation",
            StopReason::Error => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub kind: OptimizerKind,
    pub solver: SubproblemSolver,
    pub params: HyperParams,
    pub records: Vec<IterationRecord>,
    pub final_x: Point,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub final_sigma: f64,
    pub stop_reason: StopReason,
    /// Message of the error that ended the run, if any.
    pub error: Option<String>,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn successful_iterations(&self) -> usize {
        self.records.iter().filter(|r| r.accepted.is_success()).count()
    }

    pub fn initial_f(&self) -> f64 {
        self.records.first().map_or(self.final_f, |r| r.f)
    }

    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::GradTol
    }

    /// Record-by-record equality ignoring wall time.
    pub fn same_as(&self, other: &Trace) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.same_as(b))
            && self.final_x == other.final_x
            && self.stop_reason == other.stop_reason
    }
}
