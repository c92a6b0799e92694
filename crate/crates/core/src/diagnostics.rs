//! Optimality measure, trace audits, momentum-event counts and empirical
//! convergence rates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Objective, Point};
use crate::optimizers::{sigma_update, Acceptance, HyperParams, OptimizerKind, Trace};
use crate::subproblem::lowest_eigenpair;

/// Slack used by every audit comparison.
pub const AUDIT_SLACK: f64 = 1e-10;

/// Gradient norm below which records count as the superlinear tail.
pub const TAIL_GRAD_NORM: f64 = 1e-6;

/// Records required before the tail for a rate fit.
pub const MIN_RATE_RECORDS: usize = 10;

/// Normalizing constants of the optimality measure plus optional problem
/// constants supplied by the user. `c1 = c2 = 1` makes the measure a
/// scale-free surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub c1: f64,
    pub c2: f64,
    pub lipschitz_grad: Option<f64>,
    pub lipschitz_hess: Option<f64>,
    pub kappa_h: Option<f64>,
    pub f_star: Option<f64>,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            c1: 1.0,
            c2: 1.0,
            lipschitz_grad: None,
            lipschitz_hess: None,
            kappa_h: None,
            f_star: None,
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite() && self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::Config("c1 and c2 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measure {
    pub value: f64,
    /// `sqrt(|g| / c1)`.
    pub grad_term: f64,
    /// `max(0, -lambda_min) / c2`.
    pub curvature_term: f64,
    pub lambda_min: f64,
    /// False when `lambda_min` is an unconverged Lanczos estimate.
    pub confident: bool,
}

/// `max(sqrt(|g| / c1), -lambda_min / c2)` with the second term clamped at 0.
pub fn measure_from(grad_norm: f64, lambda_min: f64, cfg: &MeasureConfig) -> Measure {
    let grad_term = (grad_norm / cfg.c1).sqrt();
    let curvature_term = (-lambda_min).max(0.0) / cfg.c2;
    Measure {
        value: grad_term.max(curvature_term),
        grad_term,
        curvature_term,
        lambda_min,
        confident: true,
    }
}

/// Local optimality measure at `x`. `lambda_min` is exact for dense
/// Hessians and a restarted Lanczos estimate otherwise.
pub fn optimality_measure(model: &dyn Objective, x: &Point, cfg: &MeasureConfig) -> Result<Measure> {
    cfg.validate()?;
    let g = model.gradient(x);
    let eig = lowest_eigenpair(&model.hessian(x))?;
    let mut m = measure_from(g.norm(), eig.value, cfg);
    m.confident = eig.converged;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Monotone,
    SufficientDecrease,
    SigmaFloor,
    SigmaTransition,
    FailureRun,
    CubicBudget,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Monotone => "monotone",
            Rule::SufficientDecrease => "sufficient_decrease",
            Rule::SigmaFloor => "sigma_floor",
            Rule::SigmaTransition => "sigma_transition",
            Rule::FailureRun => "failure_run",
            Rule::CubicBudget => "cubic_budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub k: usize,
    pub rule: Rule,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub monotone_ok: bool,
    /// Whether the sufficient-decrease check applied (exact solver, ARC family).
    pub prop1_checked: bool,
    /// Smallest `f(x_k) - f(x_k + s_k) - eta1/12 sigma_k |s_k|^3` over successes.
    pub prop1_min_margin: f64,
    pub sigma_floor_ok: bool,
    pub sigma_transitions_ok: bool,
    pub sigma_max_observed: f64,
    pub lemma3_ok: bool,
    /// `ceil(log_{gamma1}(sigma_max / sigma_min))`.
    pub lemma3_bound: usize,
    pub longest_failure_run: usize,
    /// `sum_{successes} |s_k|^3 eta1 sigma_min / (12 (f_0 - f_final))`.
    pub lemma4_budget_ratio: f64,
    /// Largest `max(delta1, delta2) / (sigma |s|^3)` over successes (cubic methods).
    pub condition1_max_ratio: f64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "passed: {}", self.passed());
        let _ = writeln!(out, "monotone_ok: {}", self.monotone_ok);
        let _ = writeln!(out, "prop1_checked: {}", self.prop1_checked);
        let _ = writeln!(out, "prop1_min_margin: {:e}", self.prop1_min_margin);
        let _ = writeln!(out, "sigma_floor_ok: {}", self.sigma_floor_ok);
        let _ = writeln!(out, "sigma_transitions_ok: {}", self.sigma_transitions_ok);
        let _ = writeln!(out, "sigma_max_observed: {:e}", self.sigma_max_observed);
        let _ = writeln!(out, "lemma3_ok: {}", self.lemma3_ok);
        let _ = writeln!(out, "lemma3_bound: {}", self.lemma3_bound);
        let _ = writeln!(out, "longest_failure_run: {}", self.longest_failure_run);
        let _ = writeln!(out, "lemma4_budget_ratio: {:e}", self.lemma4_budget_ratio);
        let _ = writeln!(out, "condition1_max_ratio: {:e}", self.condition1_max_ratio);
        let _ = writeln!(out, "violations: {}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(out, "violation: k={} rule={} {}", v.k, v.rule.as_str(), v.detail);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= AUDIT_SLACK * a.abs().max(b.abs()).max(1.0)
}

/// Checks a completed trace against the algorithm's guarantees.
///
/// * f is nonincreasing;
/// * with the exact solver (ARC family), every success decreases f by at
///   least `eta1/12 sigma_k |s_k|^3`;
/// * sigma (or the trust radius) follows its update rule and, for the ARC
///   family, never drops below `sigma_min`;
/// * failure runs are no longer than `ceil(log_{gamma1}(sigma_max / sigma_min))`;
/// * the cubic step budget ratio is at most 1.
///
/// All comparisons allow [`AUDIT_SLACK`].
pub fn audit_trace(trace: &Trace, p: &HyperParams, solver_was_exact: bool) -> Result<AuditReport> {
    let recs = &trace.records;
    if recs.is_empty() {
        return Err(Error::Precondition("cannot audit an empty trace".into()));
    }
    let kind = trace.kind;
    let adaptive = kind.is_adaptive_cubic();
    let mut violations = Vec::new();
    let mut flag = |k: usize, rule: Rule, detail: String| violations.push(Violation { k, rule, detail });

    // (a) monotone f.
    let mut monotone_ok = true;
    for k in 1..recs.len() {
        if recs[k].f > recs[k - 1].f + AUDIT_SLACK {
            monotone_ok = false;
            flag(k, Rule::Monotone, format!("f rose from {:e} to {:e}", recs[k - 1].f, recs[k].f));
        }
    }
    let last = recs.len() - 1;
    if trace.final_f > recs[last].f + AUDIT_SLACK {
        monotone_ok = false;
        flag(
            recs.len(),
            Rule::Monotone,
            format!("final f {:e} exceeds {:e}", trace.final_f, recs[last].f),
        );
    }

    // (b) sufficient decrease at successes.
    let prop1_checked = solver_was_exact && adaptive;
    let mut prop1_min_margin = f64::INFINITY;
    if prop1_checked {
        for r in recs.iter().filter(|r| r.accepted.is_success()) {
            let need = p.eta1 / 12.0 * r.sigma * r.step_norm.powi(3);
            let margin = (r.f - r.f_trial) - need;
            prop1_min_margin = prop1_min_margin.min(margin);
            if margin < -AUDIT_SLACK {
                flag(r.k, Rule::SufficientDecrease, format!("decrease short by {:e}", -margin));
            }
        }
    }

    // (c) sigma floor and transitions.
    let next_scale = |i: usize| if i + 1 < recs.len() { recs[i + 1].sigma } else { trace.final_sigma };
    let mut sigma_floor_ok = true;
    let mut sigma_transitions_ok = true;
    for (i, r) in recs.iter().enumerate() {
        let next = next_scale(i);
        if adaptive && r.sigma < p.sigma_min * (1.0 - AUDIT_SLACK) {
            sigma_floor_ok = false;
            flag(r.k, Rule::SigmaFloor, format!("sigma {:e} below {:e}", r.sigma, p.sigma_min));
        }
        let want = match kind {
            OptimizerKind::Arcm | OptimizerKind::Arc => sigma_update(r.sigma, r.rho, p),
            OptimizerKind::Cr | OptimizerKind::Crm => r.sigma,
            OptimizerKind::Tr => match r.accepted {
                Acceptance::VerySuccess => (2.0 * r.sigma).min(p.tr_radius_max),
                Acceptance::Success => r.sigma,
                Acceptance::Fail => 0.5 * r.sigma,
            },
        };
        if !close(next, want) {
            sigma_transitions_ok = false;
            flag(
                r.k,
                Rule::SigmaTransition,
                format!("expected {want:e} after {:e}, got {next:e}", r.sigma),
            );
        }
    }

    // (d) failure runs.
    let sigma_max_observed = recs
        .iter()
        .map(|r| r.sigma)
        .chain(std::iter::once(trace.final_sigma))
        .fold(f64::NEG_INFINITY, f64::max);
    let lemma3_bound = if sigma_max_observed > p.sigma_min {
        ((sigma_max_observed / p.sigma_min).ln() / p.gamma1.ln() - AUDIT_SLACK).ceil().max(0.0) as usize
    } else {
        0
    };
    let mut longest_failure_run = 0;
    let mut lemma3_ok = true;
    let mut run = 0;
    for r in recs {
        if r.accepted == Acceptance::Fail {
            run += 1;
            longest_failure_run = longest_failure_run.max(run);
            if adaptive && run == lemma3_bound + 1 {
                lemma3_ok = false;
                flag(r.k, Rule::FailureRun, format!("{run} consecutive failures exceed {lemma3_bound}"));
            }
        } else {
            run = 0;
        }
    }

    // (e) cubic budget.
    let cubes: f64 = recs
        .iter()
        .filter(|r| r.accepted.is_success())
        .map(|r| r.step_norm.powi(3))
        .sum();
    let drop = recs[0].f - trace.final_f;
    let lemma4_budget_ratio = if cubes == 0.0 {
        0.0
    } else if drop > 0.0 {
        cubes * p.eta1 * p.sigma_min / (12.0 * drop)
    } else {
        f64::INFINITY
    };
    if kind != OptimizerKind::Tr && lemma4_budget_ratio > 1.0 + AUDIT_SLACK {
        flag(last, Rule::CubicBudget, format!("budget ratio {lemma4_budget_ratio:e} exceeds 1"));
    }

    let condition1_max_ratio = if kind == OptimizerKind::Tr {
        0.0
    } else {
        recs.iter()
            .filter(|r| r.accepted.is_success() && r.step_norm > 0.0)
            .map(|r| {
                let cubic = r.sigma * r.step_norm.powi(3);
                let d1 = (cubic / 12.0 - r.model_decrease).max(0.0);
                let d2 = r.model_grad_norm.powf(1.5);
                d1.max(d2) / cubic
            })
            .fold(0.0, f64::max)
    };

    Ok(AuditReport {
        monotone_ok,
        prop1_checked,
        prop1_min_margin,
        sigma_floor_ok,
        sigma_transitions_ok,
        sigma_max_observed,
        lemma3_ok,
        lemma3_bound,
        longest_failure_run,
        lemma4_budget_ratio,
        condition1_max_ratio,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `beta > 0` and `s_k^T v_{k-1} > 0`.
    Aligned,
    /// `beta > 0` and `s_k^T v_{k-1} < 0`.
    Opposed,
    /// `beta = 0` or a zero sign.
    NoMomentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumEvent {
    pub k: usize,
    pub beta: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MomentumEvents {
    pub helped_pos: usize,
    pub helped_neg: usize,
    pub beta_zero: usize,
    /// One entry per successful iteration.
    pub events: Vec<MomentumEvent>,
}

/// Splits successful iterations by momentum use and direction.
pub fn classify_momentum_events(trace: &Trace) -> MomentumEvents {
    let mut out = MomentumEvents::default();
    for r in trace.records.iter().filter(|r| r.accepted.is_success()) {
        let kind = match (r.beta > 0.0, r.momentum_sign) {
            (true, 1) => EventKind::Aligned,
            (true, -1) => EventKind::Opposed,
            _ => EventKind::NoMomentum,
        };
        match kind {
            EventKind::Aligned => out.helped_pos += 1,
            EventKind::Opposed => out.helped_neg += 1,
            EventKind::NoMomentum => out.beta_zero += 1,
        }
        out.events.push(MomentumEvent { k: r.k, beta: r.beta, kind });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateQuantity {
    GradNorm,
    /// The optimality measure with `c1 = c2 = 1`; needs recorded curvature.
    Measure,
}

/// Least-squares slope of `log(min_{j<=k} q_j)` against `log(1 + k)` over the
/// records preceding the first one with `grad_norm < 1e-6`.
pub fn fit_rate(trace: &Trace, quantity: RateQuantity) -> Result<f64> {
    let window: Vec<_> = trace
        .records
        .iter()
        .take_while(|r| r.grad_norm >= TAIL_GRAD_NORM)
        .collect();
    if window.len() < MIN_RATE_RECORDS {
        return Err(Error::InsufficientData(format!(
            "{} records before the tail, need {MIN_RATE_RECORDS}",
            window.len()
        )));
    }
    let cfg = MeasureConfig::default();
    let mut best = f64::INFINITY;
    let mut xs = Vec::with_capacity(window.len());
    let mut ys = Vec::with_capacity(window.len());
    for r in window {
        let q = match quantity {
            RateQuantity::GradNorm => r.grad_norm,
            RateQuantity::Measure => {
                let lam = r.lambda_min.ok_or_else(|| {
                    Error::InsufficientData(format!("record {} has no curvature estimate", r.k))
                })?;
                measure_from(r.grad_norm, lam, &cfg).value
            }
        };
        best = best.min(q);
        if !(best > 0.0 && best.is_finite()) {
            return Err(Error::Numeric(format!("cannot take the log of {best} at record {}", r.k)));
        }
        xs.push((1.0 + r.k as f64).ln());
        ys.push(best.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
