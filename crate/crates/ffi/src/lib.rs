//! C ABI over the `arcm` crate.
//!
//! Objects cross the boundary as opaque handles created by `arcm_*_new`-style
//! constructors and released with the matching `arcm_*_free`. Every fallible
//! call returns an [`ArcmStatus`]; on failure [`arcm_last_error`] describes
//! the most recent error on the calling thread. Panics never cross the
//! boundary and surface as [`ArcmStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use arcm::data::{gen_synthetic, load_csv, load_libsvm, Dataset, SyntheticSpec, Task};
use arcm::objective::{make_objective, ModelKind, ModelSpec, Objective};
use arcm::optimizers::{run, HyperParams, OptimizerKind, RunOptions, StopCriteria, StopReason, SubproblemSolver, Trace};
use arcm::Error;
use nalgebra::DVector;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument or configuration value.
    InvalidArgument = 2,
    /// Numeric breakdown or solver failure.
    Numeric = 3,
    Io = 4,
    /// Malformed input file.
    Parse = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcmOptimizer {
    Arcm = 0,
    Arc = 1,
    Cr = 2,
    Crm = 3,
    Tr = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcmSolver {
    Exact = 0,
    Krylov = 1,
    Cauchy = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcmStopReason {
    GradTol = 0,
    MaxIter = 1,
    MaxSeconds = 2,
    Stagnation = 3,
    Error = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcmAcceptance {
    VerySuccess = 0,
    Success = 1,
    Fail = 2,
}

/// Algorithm hyperparameters. Start from [`arcm_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArcmParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub tau: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub krylov_max_dim: usize,
    pub momentum_halvings: u32,
    pub fixed_m: f64,
    pub tr_radius0: f64,
    pub tr_radius_max: f64,
}

/// Stopping rules. `max_seconds <= 0` means no time limit.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArcmStop {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_seconds: f64,
}

/// One row of a trace.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArcmRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub sigma: f64,
    pub step_norm: f64,
    pub rho: f64,
    pub accepted: ArcmAcceptance,
    pub beta: f64,
    pub momentum_sign: i8,
    pub krylov_dim: usize,
    pub model_decrease: f64,
    pub wall_time_s: f64,
}

/// Opaque dataset handle.
pub struct ArcmDataset(Arc<Dataset>);

/// Opaque objective handle.
pub struct ArcmObjective(Box<dyn Objective>);

/// Opaque handle to a finished run.
pub struct ArcmTrace(Trace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ArcmStatus {
    match e {
        Error::Config(_) | Error::Precondition(_) | Error::InsufficientData(_) => ArcmStatus::InvalidArgument,
        Error::Numeric(_) | Error::SolverFailure { .. } | Error::CertificateInvalid(_) => ArcmStatus::Numeric,
        Error::Parse { .. } => ArcmStatus::Parse,
        Error::Io(_) => ArcmStatus::Io,
    }
}

fn fail(status: ArcmStatus, msg: impl Into<String>) -> ArcmStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), ArcmStatus>) -> ArcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArcmStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ArcmStatus::Panic, format!("panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, ArcmStatus>;
}

impl<T> OrStatus<T> for arcm::Result<T> {
    fn or_status(self) -> Result<T, ArcmStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, ArcmStatus> {
    p.as_ref().ok_or_else(|| fail(ArcmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ArcmStatus> {
    p.as_mut().ok_or_else(|| fail(ArcmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], ArcmStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ArcmStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, ArcmStatus> {
    if p.is_null() {
        return Err(fail(ArcmStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(ArcmStatus::InvalidArgument, "path is not valid UTF-8"))
}

fn vector_for(obj: &dyn Objective, x: &[f64]) -> Result<DVector<f64>, ArcmStatus> {
    if x.len() != obj.dim() {
        return Err(fail(
            ArcmStatus::InvalidArgument,
            format!("vector has length {} but the objective has dimension {}", x.len(), obj.dim()),
        ));
    }
    Ok(DVector::from_column_slice(x))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn arcm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn arcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn arcm_params_default() -> ArcmParams {
    let p = HyperParams::default();
    ArcmParams {
        gamma1: p.gamma1,
        gamma2: p.gamma2,
        gamma3: p.gamma3,
        eta1: p.eta1,
        eta2: p.eta2,
        sigma0: p.sigma0,
        sigma_min: p.sigma_min,
        tau: p.tau,
        alpha1: p.alpha1,
        alpha2: p.alpha2,
        krylov_max_dim: p.krylov_max_dim,
        momentum_halvings: p.momentum_halvings,
        fixed_m: p.fixed_m,
        tr_radius0: p.tr_radius0,
        tr_radius_max: p.tr_radius_max,
    }
}

#[no_mangle]
pub extern "C" fn arcm_stop_default() -> ArcmStop {
    let s = StopCriteria::default();
    ArcmStop {
        grad_tol: s.grad_tol,
        max_iter: s.max_iter,
        max_seconds: 0.0,
    }
}

fn params_from(p: &ArcmParams) -> HyperParams {
    HyperParams {
        gamma1: p.gamma1,
        gamma2: p.gamma2,
        gamma3: p.gamma3,
        eta1: p.eta1,
        eta2: p.eta2,
        sigma0: p.sigma0,
        sigma_min: p.sigma_min,
        tau: p.tau,
        alpha1: p.alpha1,
        alpha2: p.alpha2,
        krylov_max_dim: p.krylov_max_dim,
        momentum_halvings: p.momentum_halvings,
        fixed_m: p.fixed_m,
        tr_radius0: p.tr_radius0,
        tr_radius_max: p.tr_radius_max,
    }
}

// ---- datasets ----

/// Seeded synthetic data. `classification` selects 0/1 labels with
/// `label_noise` flips; otherwise heavy-tailed regression targets.
#[no_mangle]
pub unsafe extern "C" fn arcm_dataset_synthetic(
    n: usize,
    d: usize,
    classification: bool,
    label_noise: f64,
    seed: u64,
    out: *mut *mut ArcmDataset,
) -> ArcmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec = SyntheticSpec {
            n,
            d,
            label_noise: if classification { label_noise } else { 0.0 },
            task: if classification { Task::Classification } else { Task::Regression },
            seed,
        };
        let ds = gen_synthetic(&spec).or_status()?;
        *out = boxed(ArcmDataset(Arc::new(ds)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn arcm_dataset_load_libsvm(path: *const c_char, out: *mut *mut ArcmDataset) -> ArcmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ds = load_libsvm(path_arg(path)?).or_status()?;
        *out = boxed(ArcmDataset(Arc::new(ds)));
        Ok(())
    })
}

/// `label_col` is the 0-based column holding the label.
#[no_mangle]
pub unsafe extern "C" fn arcm_dataset_load_csv(
    path: *const c_char,
    label_col: usize,
    out: *mut *mut ArcmDataset,
) -> ArcmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ds = load_csv(path_arg(path)?, label_col).or_status()?;
        *out = boxed(ArcmDataset(Arc::new(ds)));
        Ok(())
    })
}

/// Number of samples; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn arcm_dataset_len(ds: *const ArcmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Number of features; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn arcm_dataset_dim(ds: *const ArcmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn arcm_dataset_free(ds: *mut ArcmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---- objectives ----

unsafe fn new_objective(spec: ModelSpec, out: *mut *mut ArcmObjective) -> Result<(), ArcmStatus> {
    let out = out_ptr(out, "out")?;
    let obj = make_objective(&spec).or_status()?;
    *out = boxed(ArcmObjective(obj));
    Ok(())
}

/// Nonconvex-regularized logistic regression. The dataset handle may be
/// freed afterwards; the objective keeps its own reference.
#[no_mangle]
pub unsafe extern "C" fn arcm_objective_logistic(
    ds: *const ArcmDataset,
    chi: f64,
    out: *mut *mut ArcmObjective,
) -> ArcmStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        new_objective(ModelSpec::regression(ModelKind::LogisticNonconvex, ds.0.clone(), chi), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn arcm_objective_robust(ds: *const ArcmDataset, out: *mut *mut ArcmObjective) -> ArcmStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        new_objective(ModelSpec::regression(ModelKind::RobustLinear, ds.0.clone(), 0.0), out)
    })
}

/// Seeded random positive definite quadratic with condition number 100.
#[no_mangle]
pub unsafe extern "C" fn arcm_objective_quadratic(dim: usize, seed: u64, out: *mut *mut ArcmObjective) -> ArcmStatus {
    guard(|| new_objective(ModelSpec::analytic(ModelKind::Quadratic, dim).with_seed(seed), out))
}

#[no_mangle]
pub unsafe extern "C" fn arcm_objective_rosenbrock(dim: usize, out: *mut *mut ArcmObjective) -> ArcmStatus {
    guard(|| new_objective(ModelSpec::analytic(ModelKind::Rosenbrock, dim), out))
}

/// Dimension; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn arcm_objective_dim(obj: *const ArcmObjective) -> usize {
    obj.as_ref().map_or(0, |o| o.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn arcm_objective_value(
    obj: *const ArcmObjective,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> ArcmStatus {
    guard(|| {
        let obj = &deref(obj, "objective")?.0;
        let out = out_ptr(out, "out")?;
        let x = vector_for(obj.as_ref(), slice(x, len, "x")?)?;
        *out = obj.value(&x);
        Ok(())
    })
}

/// Writes the gradient at `x` into `grad` (both of length `len`).
#[no_mangle]
pub unsafe extern "C" fn arcm_objective_gradient(
    obj: *const ArcmObjective,
    x: *const f64,
    len: usize,
    grad: *mut f64,
) -> ArcmStatus {
    guard(|| {
        let obj = &deref(obj, "objective")?.0;
        let x = vector_for(obj.as_ref(), slice(x, len, "x")?)?;
        if grad.is_null() && len > 0 {
            return Err(fail(ArcmStatus::NullPointer, "grad is null"));
        }
        let g = obj.gradient(&x);
        if len > 0 {
            std::slice::from_raw_parts_mut(grad, len).copy_from_slice(g.as_slice());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn arcm_objective_free(obj: *mut ArcmObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

// ---- runs ----

/// Minimizes `obj` from `x0`. `params` and `stop` may be null for defaults.
/// A run that ends in numeric breakdown still yields a trace, with stop
/// reason `ARCM_STOP_REASON_ERROR`.
#[no_mangle]
pub unsafe extern "C" fn arcm_run(
    obj: *const ArcmObjective,
    optimizer: ArcmOptimizer,
    solver: ArcmSolver,
    x0: *const f64,
    len: usize,
    params: *const ArcmParams,
    stop: *const ArcmStop,
    out: *mut *mut ArcmTrace,
) -> ArcmStatus {
    guard(|| {
        let obj = &deref(obj, "objective")?.0;
        let out = out_ptr(out, "out")?;
        let x0 = vector_for(obj.as_ref(), slice(x0, len, "x0")?)?;
        let p = params.as_ref().map_or_else(HyperParams::default, params_from);
        let stop = stop.as_ref().map_or_else(StopCriteria::default, |s| StopCriteria {
            grad_tol: s.grad_tol,
            max_iter: s.max_iter,
            max_seconds: (s.max_seconds > 0.0).then_some(s.max_seconds),
        });
        let kind = match optimizer {
            ArcmOptimizer::Arcm => OptimizerKind::Arcm,
            ArcmOptimizer::Arc => OptimizerKind::Arc,
            ArcmOptimizer::Cr => OptimizerKind::Cr,
            ArcmOptimizer::Crm => OptimizerKind::Crm,
            ArcmOptimizer::Tr => OptimizerKind::Tr,
        };
        let solver = match solver {
            ArcmSolver::Exact => SubproblemSolver::Exact,
            ArcmSolver::Krylov => SubproblemSolver::Krylov,
            ArcmSolver::Cauchy => SubproblemSolver::Cauchy,
        };
        let opts = RunOptions {
            stop,
            solver,
            track_curvature: false,
        };
        let trace = run(kind, obj.as_ref(), &x0, &p, &opts).or_status()?;
        if let Some(e) = &trace.error {
            set_error(e.clone());
        }
        *out = boxed(ArcmTrace(trace));
        Ok(())
    })
}

/// Number of recorded iterations; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn arcm_trace_len(t: *const ArcmTrace) -> usize {
    t.as_ref().map_or(0, |t| t.0.iterations())
}

/// Number of successful iterations; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn arcm_trace_successful(t: *const ArcmTrace) -> usize {
    t.as_ref().map_or(0, |t| t.0.successful_iterations())
}

#[no_mangle]
pub unsafe extern "C" fn arcm_trace_stop_reason(t: *const ArcmTrace, out: *mut ArcmStopReason) -> ArcmStatus {
    guard(|| {
        let t = &deref(t, "trace")?.0;
        *out_ptr(out, "out")? = match t.stop_reason {
            StopReason::GradTol => ArcmStopReason::GradTol,
            StopReason::MaxIter => ArcmStopReason::MaxIter,
            StopReason::MaxSeconds => ArcmStopReason::MaxSeconds,
            StopReason::Stagnation => ArcmStopReason::Stagnation,
            StopReason::Error => ArcmStopReason::Error,
        };
        Ok(())
    })
}

/// Final objective value and gradient norm; either output may be null.
#[no_mangle]
pub unsafe extern "C" fn arcm_trace_final(t: *const ArcmTrace, f: *mut f64, grad_norm: *mut f64) -> ArcmStatus {
    guard(|| {
        let t = &deref(t, "trace")?.0;
        if let Some(f) = f.as_mut() {
            *f = t.final_f;
        }
        if let Some(g) = grad_norm.as_mut() {
            *g = t.final_grad_norm;
        }
        Ok(())
    })
}

/// Copies the final iterate into `x` (length `len`, equal to the dimension).
#[no_mangle]
pub unsafe extern "C" fn arcm_trace_final_x(t: *const ArcmTrace, x: *mut f64, len: usize) -> ArcmStatus {
    guard(|| {
        let t = &deref(t, "trace")?.0;
        if len != t.final_x.len() {
            return Err(fail(
                ArcmStatus::InvalidArgument,
                format!("buffer has length {len}, iterate has {}", t.final_x.len()),
            ));
        }
        if len > 0 {
            if x.is_null() {
                return Err(fail(ArcmStatus::NullPointer, "x is null"));
            }
            std::slice::from_raw_parts_mut(x, len).copy_from_slice(t.final_x.as_slice());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn arcm_trace_record(t: *const ArcmTrace, index: usize, out: *mut ArcmRecord) -> ArcmStatus {
    guard(|| {
        let t = &deref(t, "trace")?.0;
        let out = out_ptr(out, "out")?;
        let r = t.records.get(index).ok_or_else(|| {
            fail(
                ArcmStatus::OutOfRange,
                format!("record {index} requested, trace has {}", t.records.len()),
            )
        })?;
        *out = ArcmRecord {
            k: r.k,
            f: r.f,
            grad_norm: r.grad_norm,
            sigma: r.sigma,
            step_norm: r.step_norm,
            rho: r.rho,
            accepted: match r.accepted {
                arcm::optimizers::Acceptance::VerySuccess => ArcmAcceptance::VerySuccess,
                arcm::optimizers::Acceptance::Success => ArcmAcceptance::Success,
                arcm::optimizers::Acceptance::Fail => ArcmAcceptance::Fail,
            },
            beta: r.beta,
            momentum_sign: r.momentum_sign,
            krylov_dim: r.krylov_dim,
            model_decrease: r.model_decrease,
            wall_time_s: r.wall_time_s,
        };
        Ok(())
    })
}

/// Writes the trace in the CLI's CSV format.
#[no_mangle]
pub unsafe extern "C" fn arcm_trace_write_csv(t: *const ArcmTrace, path: *const c_char) -> ArcmStatus {
    guard(|| {
        let t = &deref(t, "trace")?.0;
        arcm::cli::write_trace_csv(t, path_arg(path)?).or_status()
    })
}

#[no_mangle]
pub unsafe extern "C" fn arcm_trace_free(t: *mut ArcmTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}
