//! Randomized invariants.

use std::sync::Arc;

use arcm::cli::report::{read_trace_csv, write_trace_csv};
use arcm::data::{gen_synthetic, load_csv, load_libsvm_dim, write_csv, write_libsvm, Dataset, SyntheticSpec};
use arcm::diagnostics::audit_trace;
use arcm::objective::{Hessian, LogisticNonconvex, Objective, Quadratic, RobustLinear};
use arcm::optimizers::{
    momentum_cap, momentum_search, run, sigma_update, HyperParams, OptimizerKind, RunOptions, StopCriteria,
    SubproblemSolver,
};
use arcm::subproblem::{cauchy_point, solve_exact, solve_krylov, CubicModel, EXACT_TOL};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vector(d: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0..3.0_f64, d).prop_map(DVector::from_vec)
}

fn symmetric(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0_f64, d * d).prop_map(move |v| {
        let a = DMatrix::from_vec(d, d, v);
        (&a + a.transpose()) * 0.5
    })
}

fn instance() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, f64)> {
    (2usize..12).prop_flat_map(|d| (symmetric(d), vector(d), 0.05..5.0_f64))
}

fn logistic(seed: u64) -> LogisticNonconvex {
    let ds = gen_synthetic(&SyntheticSpec::classification(40, 5, 0.1, seed)).unwrap();
    LogisticNonconvex::new(Arc::new(ds), 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hessian_vec_is_linear(seed in 0u64..1000, x in vector(5), u in vector(5), v in vector(5), a in -2.0..2.0_f64) {
        let reg = gen_synthetic(&SyntheticSpec::regression(40, 5, seed)).unwrap();
        let models: [Box<dyn Objective>; 2] = [Box::new(logistic(seed)), Box::new(RobustLinear::new(Arc::new(reg)))];
        for m in &models {
            let lhs = m.hessian_vec(&x, &(&u * a + &v));
            let rhs = m.hessian_vec(&x, &u) * a + m.hessian_vec(&x, &v);
            prop_assert!((&lhs - &rhs).amax() <= 1e-10 * (1.0 + rhs.amax()), "{}", m.name());
        }
    }

    #[test]
    fn exact_step_meets_global_optimality_conditions((h, g, sigma) in instance()) {
        let d = g.len();
        let m = CubicModel::new(g.clone(), Hessian::Dense(h.clone()), sigma).unwrap();
        let sol = solve_exact(&m, EXACT_TOL).unwrap();
        let lambda = sigma * sol.s.norm() / 2.0;
        let shifted = &h + DMatrix::identity(d, d) * lambda;
        let stationarity = &shifted * &sol.s + &g;
        prop_assert!(stationarity.norm() <= 1e-7 * (1.0 + g.norm()), "residual {}", stationarity.norm());
        let lmin = shifted.symmetric_eigenvalues().min();
        prop_assert!(lmin >= -1e-7 * (1.0 + h.norm()), "H + lambda I has eigenvalue {lmin}");
    }

    #[test]
    fn exact_beats_krylov_beats_cauchy((h, g, sigma) in instance(), dim in 1usize..6) {
        prop_assume!(g.norm() > 1e-3);
        let m = CubicModel::new(g, Hessian::Dense(h), sigma).unwrap();
        let e = m.value(&solve_exact(&m, EXACT_TOL).unwrap().s);
        let k = m.value(&solve_krylov(&m, dim, 1e-10).unwrap().s);
        let c = m.value(&cauchy_point(&m).unwrap().s);
        let slack = 1e-9 * e.abs().max(1.0);
        prop_assert!(e <= k + slack, "exact {e} krylov {k}");
        prop_assert!(k <= c + slack, "krylov {k} cauchy {c}");
        prop_assert!(c < 0.0);
    }

    #[test]
    fn sigma_never_drops_below_floor(sigma in 1e-6..1e6_f64, rho in -10.0..10.0_f64) {
        let p = HyperParams::default();
        let sigma = sigma.max(p.sigma_min);
        let next = sigma_update(sigma, rho, &p);
        prop_assert!(next >= p.sigma_min);
        prop_assert!(next <= p.gamma1 * sigma);
    }

    #[test]
    fn momentum_stays_within_cap(seed in 0u64..1000, y in vector(5), v in vector(5), s in vector(5)) {
        let p = HyperParams::default();
        let model = logistic(seed);
        let f_y = model.value(&y);
        let r = momentum_search(&model, &y, f_y, &v, &s, &p);
        let cap = momentum_cap(s.norm(), &p);
        prop_assert!(r.beta >= 0.0 && r.beta <= cap);
        prop_assert!(cap <= p.tau && cap <= p.alpha1 * s.norm() && cap <= p.alpha2 * s.norm().powi(2));
        prop_assert!(r.f_z <= f_y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn arcm_audit_passes_on_convex_quadratics(d in 2usize..15, condition in 1.0..1e3_f64, seed in 0u64..1000, x0 in vector(15)) {
        let q = Quadratic::random_spd(d, condition, seed);
        let x0 = x0.rows(0, d).into_owned();
        // Much below 1e-6 the decrease drops under the roundoff of f at the
        // minimizer and rho stops resolving progress.
        let opts = RunOptions {
            solver: SubproblemSolver::Exact,
            stop: StopCriteria { grad_tol: 1e-6, max_iter: 500, max_seconds: None },
            track_curvature: false,
        };
        let p = HyperParams::default();
        let t = run(OptimizerKind::Arcm, &q, &x0, &p, &opts).unwrap();
        prop_assert!(t.converged(), "{:?} at f = {:e}, |g| = {:e}", t.stop_reason, t.final_f, t.final_grad_norm);
        if !t.records.is_empty() {
            let audit = audit_trace(&t, &p, true).unwrap();
            prop_assert!(audit.passed(), "{}", audit.to_text());
        }
    }

    #[test]
    fn datasets_survive_a_file_round_trip(
        rows in prop::collection::vec((prop::collection::vec(-1e3..1e3_f64, 4), any::<bool>()), 1..30),
    ) {
        let n = rows.len();
        let cells: Vec<f64> = rows.iter().flat_map(|(r, _)| r.iter().copied()).collect();
        let labels: Vec<f64> = rows.iter().map(|(_, b)| if *b { 1.0 } else { 0.0 }).collect();
        let ds = Dataset::new(DMatrix::from_row_slice(n, 4, &cells), DVector::from_vec(labels), "rt").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let svm = dir.path().join("rt.svm");
        let csv = dir.path().join("rt.csv");
        write_libsvm(&ds, &svm).unwrap();
        write_csv(&ds, &csv).unwrap();
        for back in [load_libsvm_dim(&svm, 4).unwrap(), load_csv(&csv, 4).unwrap()] {
            prop_assert_eq!(&back.features, &ds.features);
            prop_assert_eq!(&back.labels, &ds.labels);
        }
    }

    #[test]
    fn traces_survive_a_csv_round_trip(seed in 0u64..1000, kind in 0usize..5, x0 in vector(5)) {
        let kind = OptimizerKind::ALL[kind];
        let opts = RunOptions {
            solver: SubproblemSolver::Krylov,
            stop: StopCriteria { grad_tol: 1e-6, max_iter: 30, max_seconds: None },
            track_curvature: false,
        };
        let t = run(kind, &logistic(seed), &x0, &HyperParams::default(), &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace_csv(&t, &path).unwrap();
        let back = read_trace_csv(&path).unwrap();
        prop_assert_eq!(back.len(), t.records.len());
        for (a, b) in t.records.iter().zip(&back) {
            prop_assert_eq!(a.k, b.k);
            prop_assert_eq!(a.accepted, b.accepted);
            prop_assert_eq!(a.momentum_sign, b.momentum_sign);
            prop_assert_eq!(a.krylov_dim, b.krylov_dim);
            let reals = [
                (a.f, b.f), (a.grad_norm, b.grad_norm), (a.sigma, b.sigma), (a.step_norm, b.step_norm),
                (a.beta, b.beta), (a.model_decrease, b.model_decrease), (a.wall_time_s, b.wall_time_s),
            ];
            for (u, v) in reals {
                prop_assert_eq!(u.to_bits(), v.to_bits());
            }
            prop_assert!(a.rho == b.rho || (a.rho.is_nan() && b.rho.is_nan()));
        }
    }
}
