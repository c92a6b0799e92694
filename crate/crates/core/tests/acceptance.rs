//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
//!
//! Desk instances: synthetic n=200, d=50 data (label noise 0.05 for the
//! logistic model) with dataset seed = run seed, seeds 0..10, x0 drawn as
//! 3 * N(0, I) from seed 1000 + run seed, Krylov solver with max_dim 50.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use arcm::cli::config::{initial_point, X0Policy};
use arcm::data::{gen_synthetic, SyntheticSpec};
use arcm::diagnostics::{audit_trace, classify_momentum_events, fit_rate, RateQuantity};
use arcm::objective::{check_derivatives, Hessian, LogisticNonconvex, Objective, Quadratic, RobustLinear, Rosenbrock};
use arcm::optimizers::{
    arcm_step, run, HyperParams, OptimizerKind, RunOptions, SolverState, StopCriteria, SubproblemSolver, Trace,
};
use arcm::subproblem::{
    cauchy_point, certify_inexact, solve_exact, solve_krylov, solve_krylov_with, CubicModel, KrylovOptions,
    EXACT_TOL, KRYLOV_TOL,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

const SEEDS: u64 = 10;
const N: usize = 200;
const D: usize = 50;
const CHI: f64 = 0.1;
const X0: X0Policy = X0Policy::SeededGaussian { scale: 3.0, seed: 1000 };
const CR_GRID: [f64; 7] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant, v: Verdict) -> Verdict {
    let el = started.elapsed();
    match v {
        Ok(d) if el <= limit => Ok(d),
        Ok(d) => Err(format!("{d}; runtime {el:.1?} exceeds {limit:?}")),
        e => e,
    }
}

fn gaussian(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_symmetric(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2 - 1] == v[n / 2] {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Desk {
    Logistic,
    Robust,
}

impl Desk {
    fn name(self) -> &'static str {
        match self {
            Desk::Logistic => "logistic",
            Desk::Robust => "robust",
        }
    }

    fn objective(self, seed: u64) -> Box<dyn Objective> {
        match self {
            Desk::Logistic => {
                let ds = gen_synthetic(&SyntheticSpec::classification(N, D, 0.05, seed)).unwrap();
                Box::new(LogisticNonconvex::new(Arc::new(ds), CHI))
            }
            Desk::Robust => {
                let ds = gen_synthetic(&SyntheticSpec::regression(N, D, seed)).unwrap();
                Box::new(RobustLinear::new(Arc::new(ds)))
            }
        }
    }
}

fn krylov_opts() -> RunOptions {
    RunOptions {
        solver: SubproblemSolver::Krylov,
        ..RunOptions::default()
    }
}

fn desk_run(model: Desk, kind: OptimizerKind, p: &HyperParams, seed: u64) -> Trace {
    let obj = model.objective(seed);
    let x0 = initial_point(X0, D, seed);
    run(kind, obj.as_ref(), &x0, p, &krylov_opts()).unwrap()
}

/// Successful iterations to tolerance; a run that did not converge counts as infinite.
fn iters_to_tol(t: &Trace) -> f64 {
    if t.converged() {
        t.successful_iterations() as f64
    } else {
        f64::INFINITY
    }
}

struct ModelRuns {
    arcm: Vec<Trace>,
    arc: Vec<Trace>,
    /// CR traces per grid value of M.
    cr: Vec<Vec<Trace>>,
}

struct Comparative {
    runs: Vec<(Desk, ModelRuns)>,
}

fn comparative() -> &'static Comparative {
    static CELL: OnceLock<Comparative> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = HyperParams::default();
        let runs = [Desk::Logistic, Desk::Robust]
            .into_iter()
            .map(|model| {
                let seeds: Vec<u64> = (0..SEEDS).collect();
                let batch = |kind: OptimizerKind, p: HyperParams| -> Vec<Trace> {
                    seeds.par_iter().map(|&s| desk_run(model, kind, &p, s)).collect()
                };
                let cr = CR_GRID
                    .iter()
                    .map(|&m| batch(OptimizerKind::Cr, HyperParams { fixed_m: m, ..p }))
                    .collect();
                let runs = ModelRuns {
                    arcm: batch(OptimizerKind::Arcm, p),
                    arc: batch(OptimizerKind::Arc, p),
                    cr,
                };
                (model, runs)
            })
            .collect();
        Comparative { runs }
    })
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut worst = (0.0_f64, 0.0_f64);
    for model in [Desk::Logistic, Desk::Robust] {
        let obj = model.objective(0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = gaussian(D, &mut rng);
            let r = check_derivatives(obj.as_ref(), &x, 1e-5).map_err(|e| e.to_string())?;
            worst.0 = worst.0.max(r.max_rel_err_grad);
            worst.1 = worst.1.max(r.max_rel_err_hvp);
        }
    }
    let v = check(
        worst.0 <= 1e-5 && worst.1 <= 1e-4,
        format!("max grad rel err {:.2e} (<= 1e-5), max Hv rel err {:.2e} (<= 1e-4)", worst.0, worst.1),
    );
    within(Duration::from_secs(5), started, v)
}

/// Minimum of the model over a 32^4 grid on `[-r, r]^4`, evaluated directly.
fn grid_min(h: &DMatrix<f64>, g: &DVector<f64>, sigma: f64, r: f64) -> f64 {
    const PTS: usize = 32;
    let axis: Vec<f64> = (0..PTS).map(|i| -r + 2.0 * r * i as f64 / (PTS - 1) as f64).collect();
    let mut best = f64::INFINITY;
    let mut s = [0.0; 4];
    for &a in &axis {
        s[0] = a;
        for &b in &axis {
            s[1] = b;
            for &c in &axis {
                s[2] = c;
                for &d in &axis {
                    s[3] = d;
                    let mut lin = 0.0;
                    let mut quad = 0.0;
                    let mut nn = 0.0;
                    for i in 0..4 {
                        lin += g[i] * s[i];
                        nn += s[i] * s[i];
                        for j in 0..4 {
                            quad += s[i] * h[(i, j)] * s[j];
                        }
                    }
                    let q = lin + 0.5 * quad + sigma / 6.0 * nn * nn.sqrt();
                    best = best.min(q);
                }
            }
        }
    }
    best
}

fn criterion_2() -> Verdict {
    let started = Instant::now();
    let m = CubicModel::new(DVector::from_vec(vec![1.0, 0.0]), Hessian::Dense(DMatrix::identity(2, 2)), 2.0).unwrap();
    let radial = solve_exact(&m, EXACT_TOL).map_err(|e| e.to_string())?;
    let radial_err = (radial.s.norm() - (5.0_f64.sqrt() - 1.0) / 2.0).abs();

    let m = CubicModel::new(DVector::zeros(1), Hessian::Dense(DMatrix::from_element(1, 1, -1.0)), 1.0).unwrap();
    let scalar = solve_exact(&m, EXACT_TOL).map_err(|e| e.to_string())?;
    let scalar_err = (scalar.s.norm() - 2.0).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst_margin = f64::INFINITY;
    for _ in 0..20 {
        let h = random_symmetric(4, &mut rng);
        let g = gaussian(4, &mut rng);
        let sigma = 0.5 + 2.0 * rng.gen::<f64>();
        let m = CubicModel::new(g.clone(), Hessian::Dense(h.clone()), sigma).unwrap();
        let sol = solve_exact(&m, EXACT_TOL).map_err(|e| e.to_string())?;
        // Any box containing the minimizer works; the grid only bounds from above.
        let r = 1.5 * sol.s.amax() + 0.1;
        worst_margin = worst_margin.min(grid_min(&h, &g, sigma, r) - m.value(&sol.s));
    }
    let v = check(
        radial_err <= 1e-10 && scalar_err <= 1e-10 && worst_margin >= -1e-9,
        format!(
            "radial |s| err {radial_err:.1e}, scalar |s| err {scalar_err:.1e}, min grid margin {worst_margin:.2e} over 20 instances"
        ),
    );
    within(Duration::from_secs(60), started, v)
}

fn criterion_3() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst_gap = 0.0_f64;
    let mut cauchy_ok = 0;
    for _ in 0..20 {
        let h = random_symmetric(30, &mut rng);
        let g = gaussian(30, &mut rng);
        let sigma = 0.1 + 5.0 * rng.gen::<f64>();
        let m = CubicModel::new(g, Hessian::Dense(h), sigma).unwrap();
        let exact = solve_exact(&m, EXACT_TOL).map_err(|e| e.to_string())?;
        let full = solve_krylov(&m, 30, KRYLOV_TOL).map_err(|e| e.to_string())?;
        let small = solve_krylov(&m, 5, KRYLOV_TOL).map_err(|e| e.to_string())?;
        let cp = cauchy_point(&m).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max((full.model_decrease - exact.model_decrease).abs() / exact.model_decrease);
        if small.model_decrease >= cp.model_decrease {
            cauchy_ok += 1;
        }
    }
    let v = check(
        worst_gap <= 1e-8 && cauchy_ok == 20,
        format!("max relative decrease gap {worst_gap:.2e} at max_dim=30; max_dim=5 beats Cauchy on {cauchy_ok}/20"),
    );
    within(Duration::from_secs(30), started, v)
}

/// The ARCm test matrix: problem name, objective, start.
fn invariant_matrix() -> Vec<(String, Box<dyn Objective>, DVector<f64>)> {
    let mut out: Vec<(String, Box<dyn Objective>, DVector<f64>)> = Vec::new();
    for seed in 0..5u64 {
        out.push((format!("quadratic/{seed}"), Box::new(Quadratic::random_spd(50, 100.0, seed)), DVector::zeros(50)));
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let x0 = DVector::from_vec(vec![-1.2, 1.0]) + gaussian(2, &mut rng) * 0.5;
        out.push((format!("rosenbrock/{seed}"), Box::new(Rosenbrock::new(2)), x0));
        for model in [Desk::Logistic, Desk::Robust] {
            out.push((
                format!("{}/{seed}", model.name()),
                model.objective(seed),
                initial_point(X0, D, seed),
            ));
        }
    }
    out
}

fn exact_opts() -> RunOptions {
    RunOptions {
        solver: SubproblemSolver::Exact,
        ..RunOptions::default()
    }
}

fn criterion_4() -> Verdict {
    let started = Instant::now();
    let p = HyperParams::default();
    let matrix = invariant_matrix();
    let results: Vec<Result<(String, bool, String), String>> = matrix
        .par_iter()
        .map(|(name, obj, x0)| {
            let t = run(OptimizerKind::Arcm, obj.as_ref(), x0, &p, &exact_opts()).map_err(|e| format!("{name}: {e}"))?;
            let a = audit_trace(&t, &p, true).map_err(|e| format!("{name}: {e}"))?;
            let ok = a.passed()
                && a.monotone_ok
                && a.prop1_checked
                && a.prop1_min_margin >= -1e-10
                && a.sigma_floor_ok
                && a.lemma3_ok
                && a.lemma4_budget_ratio <= 1.0;
            let why = a.violations.first().map_or(String::new(), |v| format!("k={} {}", v.k, v.detail));
            Ok((name.clone(), ok, why))
        })
        .collect();
    let mut failed = Vec::new();
    for r in results {
        let (name, ok, why) = r?;
        if !ok {
            failed.push(format!("{name} ({why})"));
        }
    }
    let v = check(
        failed.is_empty(),
        format!("{}/{} ARCm traces pass audit_trace{}", matrix.len() - failed.len(), matrix.len(), fmt_failed(&failed)),
    );
    within(Duration::from_secs(120), started, v)
}

fn fmt_failed(failed: &[String]) -> String {
    if failed.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", failed.join(", "))
    }
}

fn criterion_5() -> Verdict {
    let p = HyperParams {
        alpha1: 0.0,
        alpha2: 0.0,
        ..HyperParams::default()
    };
    let matrix = invariant_matrix();
    let mut failed = Vec::new();
    let mut compared = 0;
    for solver in [SubproblemSolver::Exact, SubproblemSolver::Krylov] {
        let opts = RunOptions {
            solver,
            ..RunOptions::default()
        };
        let res: Vec<(String, bool)> = matrix
            .par_iter()
            .map(|(name, obj, x0)| {
                let a = run(OptimizerKind::Arcm, obj.as_ref(), x0, &p, &opts).unwrap();
                let b = run(OptimizerKind::Arc, obj.as_ref(), x0, &p, &opts).unwrap();
                (format!("{name}[{solver:?}]"), a.same_as(&b) && a.iterations() > 0)
            })
            .collect();
        for (name, ok) in res {
            compared += 1;
            if !ok {
                failed.push(name);
            }
        }
    }
    check(
        failed.is_empty(),
        format!("{}/{compared} ARCm(alpha=0) traces identical to ARC{}", compared - failed.len(), fmt_failed(&failed)),
    )
}

fn criterion_6() -> Verdict {
    let started = Instant::now();
    let cmp = comparative();
    let mut ok = true;
    let mut parts = Vec::new();
    for (model, runs) in &cmp.runs {
        let med = |ts: &[Trace]| median(&ts.iter().map(iters_to_tol).collect::<Vec<_>>());
        let arcm = med(&runs.arcm);
        let arc = med(&runs.arc);
        let (best_m, cr) = CR_GRID
            .iter()
            .zip(&runs.cr)
            .map(|(&m, ts)| (m, med(ts)))
            .fold((f64::NAN, f64::INFINITY), |acc, (m, v)| if v < acc.1 { (m, v) } else { acc });
        let model_ok = arcm <= arc && arcm <= 1.05 * arc && arcm <= cr && arc <= cr;
        ok &= model_ok;
        parts.push(format!(
            "{}: median ARCm {arcm} ARC {arc} CR(M={best_m}) {cr} [ARCm<=ARC {}, <=1.05xARC {}, ARCm<=CR {}, ARC<=CR {}]",
            model.name(),
            arcm <= arc,
            arcm <= 1.05 * arc,
            arcm <= cr,
            arc <= cr
        ));
    }
    within(Duration::from_secs(600), started, check(ok, parts.join("; ")))
}

fn criterion_7() -> Verdict {
    let cmp = comparative();
    let (_, runs) = cmp.runs.iter().find(|(m, _)| *m == Desk::Logistic).unwrap();
    let mut slopes = Vec::new();
    for t in &runs.arcm {
        slopes.push(fit_rate(t, RateQuantity::GradNorm).map_err(|e| e.to_string())?);
    }
    let worst = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    check(
        worst <= -0.55,
        format!(
            "ARCm min-so-far grad-norm slope over {} seeds: median {:.2}, worst {worst:.2} (<= -0.55)",
            slopes.len(),
            median(&slopes)
        ),
    )
}

/// Re-runs ARCm step by step, certifying every Krylov step against the exact solution.
fn certified_run(model: Desk, seed: u64) -> Result<(usize, usize, Trace), String> {
    let p = HyperParams::default();
    let obj = model.objective(seed);
    let x0 = initial_point(X0, D, seed);
    let mut state = SolverState::new(OptimizerKind::Arcm, obj.as_ref(), x0, &p).map_err(|e| e.to_string())?;
    let kopts = KrylovOptions {
        max_dim: p.krylov_max_dim,
        ..KrylovOptions::default()
    };
    let stop = StopCriteria::default();
    let mut records = Vec::new();
    let (mut below, mut successes) = (0, 0);
    while state.grad.norm() > stop.grad_tol && state.k < stop.max_iter {
        let m = CubicModel::new(state.grad.clone(), obj.hessian(&state.x), state.sigma).map_err(|e| e.to_string())?;
        let kry = solve_krylov_with(&m, &kopts, None).map_err(|e| e.to_string())?;
        let ex = solve_exact(&m, EXACT_TOL).map_err(|e| e.to_string())?;
        let cert = certify_inexact(&m, &kry, Some(ex.s.norm())).map_err(|e| e.to_string())?;
        let rec = arcm_step(&mut state, obj.as_ref(), &p, SubproblemSolver::Krylov);
        if (rec.step_norm - kry.s.norm()).abs() > 0.0 {
            return Err(format!("{} seed {seed}: step differs from the certified one", model.name()));
        }
        if rec.accepted.is_success() {
            successes += 1;
            if cert.ratio_to_cubic < 1.0 / 12.0 {
                below += 1;
            }
        }
        records.push(rec);
    }
    let trace = Trace {
        kind: OptimizerKind::Arcm,
        solver: SubproblemSolver::Krylov,
        params: p,
        records,
        final_f: state.f_x,
        final_grad_norm: state.grad.norm(),
        final_sigma: state.sigma,
        final_x: state.x,
        stop_reason: arcm::optimizers::StopReason::GradTol,
        error: None,
    };
    Ok((below, successes, trace))
}

fn criterion_8() -> Verdict {
    let p = HyperParams::default();
    let jobs: Vec<(Desk, u64)> = [Desk::Logistic, Desk::Robust]
        .into_iter()
        .flat_map(|m| (0..SEEDS).map(move |s| (m, s)))
        .collect();
    let results: Vec<Result<(Desk, u64, usize, usize, bool), String>> = jobs
        .par_iter()
        .map(|&(m, s)| {
            let (below, succ, t) = certified_run(m, s)?;
            let a = audit_trace(&t, &p, false).map_err(|e| e.to_string())?;
            Ok((m, s, below, succ, a.monotone_ok && a.sigma_floor_ok))
        })
        .collect();
    let mut failed = Vec::new();
    let (mut below_all, mut succ_all, mut worst) = (0, 0, 1.0_f64);
    for r in results {
        let (m, s, below, succ, audit_ok) = r?;
        below_all += below;
        succ_all += succ;
        let frac = below as f64 / succ.max(1) as f64;
        worst = worst.min(frac);
        if frac < 0.95 || !audit_ok {
            failed.push(format!("{}/{s} ({below}/{succ}, audit {audit_ok})", m.name()));
        }
    }
    check(
        failed.is_empty(),
        format!(
            "ratio < 1/12 on {below_all}/{succ_all} successes overall, worst run {:.1}%; monotone and sigma floor hold{}",
            100.0 * worst,
            fmt_failed(&failed)
        ),
    )
}

fn criterion_9() -> Verdict {
    let cmp = comparative();
    let mut with_beta = 0;
    let mut violations = Vec::new();
    let mut traces = 0;
    for (model, runs) in &cmp.runs {
        let all = runs.arcm.iter().chain(&runs.arc).chain(runs.cr.iter().flatten());
        for t in all {
            traces += 1;
            for r in t.records.iter().filter(|r| r.beta > 0.0) {
                with_beta += 1;
                if !(r.f_next <= r.f_trial) {
                    violations.push(format!("{} {} k={}", model.name(), t.kind, r.k));
                }
            }
            let ev = classify_momentum_events(t);
            let succ: Vec<_> = t.records.iter().filter(|r| r.accepted.is_success()).collect();
            let pos = succ.iter().filter(|r| r.beta > 0.0 && r.momentum_sign > 0).count();
            let neg = succ.iter().filter(|r| r.beta > 0.0 && r.momentum_sign < 0).count();
            if ev.helped_pos != pos
                || ev.helped_neg != neg
                || ev.beta_zero != succ.len() - pos - neg
                || ev.events.len() != succ.len()
            {
                violations.push(format!("{} {} event counts", model.name(), t.kind));
            }
        }
    }
    check(
        violations.is_empty() && with_beta > 0,
        format!(
            "{with_beta} iterations with beta > 0 across {traces} traces, f(z) <= f(y) on all; event counts match{}",
            fmt_failed(&violations)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("derivative correctness", criterion_1),
        ("CRS exactness", criterion_2),
        ("Krylov equivalence", criterion_3),
        ("ARCm invariant suite", criterion_4),
        ("ARC-reduction identity", criterion_5),
        ("comparative claim at desk scale", criterion_6),
        ("rate consistency", criterion_7),
        ("inexactness regime", criterion_8),
        ("momentum-event semantics", criterion_9),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let el = started.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS criterion {} ({name}): {d} [{el:.1}s]", i + 1),
            Err(d) => {
                failures += 1;
                println!("FAIL criterion {} ({name}): {d} [{el:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {}/9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
