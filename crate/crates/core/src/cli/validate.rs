//! Built-in verification battery behind `arcm validate`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{gen_synthetic, SyntheticSpec};
use crate::objective::{check_derivatives, Hessian, LogisticNonconvex, Objective, RobustLinear};
use crate::optimizers::{run, sigma_update, HyperParams, OptimizerKind, RunOptions, StopCriteria, SubproblemSolver};
use crate::subproblem::{cauchy_point, solve_exact, solve_krylov, CubicModel, EXACT_TOL};

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-5;
const SEED: u64 = 20_240_611;

#[derive(Debug, Clone)]
pub struct BatteryItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatteryReport {
    pub items: Vec<BatteryItem>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn to_text(&self) -> String {
        self.items
            .iter()
            .map(|i| format!("{} {}: {}\n", if i.passed { "PASS" } else { "FAIL" }, i.name, i.detail))
            .collect()
    }
}

/// Objectives whose derivatives the battery checks. Tests swap in faulty ones.
pub struct Battery {
    pub models: Vec<Box<dyn Objective>>,
}

impl Battery {
    /// The two regression models on small seeded synthetic data.
    pub fn standard() -> Self {
        let cls = Arc::new(gen_synthetic(&SyntheticSpec::classification(60, 6, 0.1, SEED)).expect("valid spec"));
        let reg = Arc::new(gen_synthetic(&SyntheticSpec::regression(60, 6, SEED)).expect("valid spec"));
        Battery {
            models: vec![
                Box::new(LogisticNonconvex::new(cls, 0.1)),
                Box::new(RobustLinear::new(reg)),
            ],
        }
    }

    pub fn run(&self) -> BatteryReport {
        let mut items = Vec::new();
        for m in &self.models {
            items.push(derivative_item(m.as_ref()));
        }
        items.push(exact_easy_case());
        items.push(exact_hard_case());
        items.push(krylov_matches_exact());
        items.push(cauchy_dominance());
        items.push(sigma_truth_table());
        items.push(arc_reduction());
        BatteryReport { items }
    }
}

fn item(name: &str, passed: bool, detail: String) -> BatteryItem {
    BatteryItem {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn gaussian(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_symmetric(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

fn derivative_item(model: &dyn Objective) -> BatteryItem {
    let name = format!("derivatives[{}]", model.name());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let x = gaussian(model.dim(), &mut rng);
    match check_derivatives(model, &x, FD_STEP) {
        Ok(r) => item(
            &name,
            r.max_rel_err_grad <= FD_TOL && r.max_rel_err_hvp <= FD_TOL,
            format!("grad rel err {:.2e}, hvp rel err {:.2e} (tol {FD_TOL:.0e})", r.max_rel_err_grad, r.max_rel_err_hvp),
        ),
        Err(e) => item(&name, false, e.to_string()),
    }
}

/// `H = lambda I`: the minimizer is `-r g/|g|` with `lambda r + sigma r^2 / 2 = |g|`.
fn exact_easy_case() -> BatteryItem {
    let (lambda, sigma) = (0.5_f64, 2.0);
    let g: DVector<f64> = DVector::from_vec(vec![3.0, -4.0, 0.0]);
    let gn = g.norm();
    let r = (-lambda + (lambda * lambda + 2.0 * sigma * gn).sqrt()) / sigma;
    let expected = -&g * (r / gn);
    let m = CubicModel::new(g, Hessian::Dense(DMatrix::identity(3, 3) * lambda), sigma).expect("valid model");
    match solve_exact(&m, EXACT_TOL) {
        Ok(sol) => {
            let err = (&sol.s - &expected).norm();
            item("exact[scaled identity]", err <= 1e-10, format!("|s - s*| = {err:.2e}"))
        }
        Err(e) => item("exact[scaled identity]", false, e.to_string()),
    }
}

/// `H = diag(-2, 1)`, `g = (0, 1)`, `sigma = 1`: `g` misses the bottom
/// eigenvector, the multiplier is 2 and `|s| = 4`, `s_2 = -1/3`.
fn exact_hard_case() -> BatteryItem {
    let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0]));
    let g = DVector::from_vec(vec![0.0, 1.0]);
    let m = CubicModel::new(g, Hessian::Dense(h), 1.0).expect("valid model");
    let s1 = (16.0_f64 - 1.0 / 9.0).sqrt();
    let expected_q = -1.0 / 3.0 + 0.5 * (-2.0 * s1 * s1 + 1.0 / 9.0) + 64.0 / 6.0;
    match solve_exact(&m, EXACT_TOL) {
        Ok(sol) => {
            let err = (sol.s.norm() - 4.0).abs().max((sol.s[1] + 1.0 / 3.0).abs());
            let q_err = (m.value(&sol.s) - expected_q).abs();
            item(
                "exact[hard case]",
                err <= 1e-8 && q_err <= 1e-8,
                format!("step error {err:.2e}, model value error {q_err:.2e}"),
            )
        }
        Err(e) => item("exact[hard case]", false, e.to_string()),
    }
}

fn krylov_matches_exact() -> BatteryItem {
    let d = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let h = random_symmetric(d, &mut rng);
        let g = gaussian(d, &mut rng);
        let m = CubicModel::new(g, Hessian::Dense(h), 1.0).expect("valid model");
        let (exact, krylov) = match (solve_exact(&m, EXACT_TOL), solve_krylov(&m, d, 1e-10)) {
            (Ok(e), Ok(k)) => (e, k),
            (Err(e), _) | (_, Err(e)) => return item("krylov vs exact (d=30)", false, e.to_string()),
        };
        let qe = m.value(&exact.s);
        let qk = m.value(&krylov.s);
        worst = worst.max((qk - qe).abs() / qe.abs().max(1.0));
    }
    item(
        "krylov vs exact (d=30)",
        worst <= 1e-8,
        format!("max relative model gap {worst:.2e}"),
    )
}

fn cauchy_dominance() -> BatteryItem {
    let d = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut ok = true;
    let mut detail = String::from("q(exact) <= q(krylov) <= q(cauchy) < 0 on 10 instances");
    for i in 0..10 {
        let h = random_symmetric(d, &mut rng);
        let g = gaussian(d, &mut rng);
        let sigma = 0.1 + rng.gen::<f64>() * 5.0;
        let m = CubicModel::new(g, Hessian::Dense(h), sigma).expect("valid model");
        let sols = (solve_exact(&m, EXACT_TOL), solve_krylov(&m, 10, 1e-6), cauchy_point(&m));
        let (e, k, c) = match sols {
            (Ok(e), Ok(k), Ok(c)) => (m.value(&e.s), m.value(&k.s), m.value(&c.s)),
            (Err(err), _, _) | (_, Err(err), _) | (_, _, Err(err)) => {
                return item("cauchy dominance", false, err.to_string())
            }
        };
        let slack = 1e-10 * e.abs().max(1.0);
        if !(e <= k + slack && k <= c + slack && c < 0.0) {
            ok = false;
            detail = format!("instance {i}: q(exact)={e:e}, q(krylov)={k:e}, q(cauchy)={c:e}");
            break;
        }
    }
    item("cauchy dominance", ok, detail)
}

fn sigma_truth_table() -> BatteryItem {
    let p = HyperParams::default();
    let cases = [
        (1.0, 0.95, p.gamma3),
        (1.0, 0.5, p.gamma2),
        (1.0, 0.05, p.gamma1),
        (1.0, -1.0, p.gamma1),
        (1.0, f64::NEG_INFINITY, p.gamma1),
        (1.0, p.eta2, p.gamma2),
        (1.0, p.eta1, p.gamma1),
    ];
    for (sigma, rho, factor) in cases {
        let got = sigma_update(sigma, rho, &p);
        if got != factor * sigma {
            return item("sigma_update truth table", false, format!("rho={rho}: got {got}, want {}", factor * sigma));
        }
    }
    let floored = sigma_update(p.sigma_min, 0.99, &p);
    if floored != p.sigma_min {
        return item("sigma_update truth table", false, format!("floor: got {floored}, want {}", p.sigma_min));
    }
    item("sigma_update truth table", true, format!("{} cases and the sigma_min floor", cases.len()))
}

/// ARCm with `alpha1 = alpha2 = 0` must reproduce ARC exactly.
fn arc_reduction() -> BatteryItem {
    let data = Arc::new(gen_synthetic(&SyntheticSpec::classification(80, 8, 0.1, SEED + 3)).expect("valid spec"));
    let model = LogisticNonconvex::new(data, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let x0 = gaussian(8, &mut rng) * 3.0;
    let zero = HyperParams {
        alpha1: 0.0,
        alpha2: 0.0,
        ..HyperParams::default()
    };
    let opts = RunOptions {
        solver: SubproblemSolver::Exact,
        stop: StopCriteria {
            max_iter: 40,
            ..StopCriteria::default()
        },
        ..RunOptions::default()
    };
    match (
        run(OptimizerKind::Arcm, &model, &x0, &zero, &opts),
        run(OptimizerKind::Arc, &model, &x0, &zero, &opts),
    ) {
        (Ok(a), Ok(b)) => item(
            "ARC reduction (alpha1 = alpha2 = 0)",
            a.same_as(&b) && !a.records.is_empty(),
            format!("{} iterations, traces identical: {}", a.iterations(), a.same_as(&b)),
        ),
        (Err(e), _) | (_, Err(e)) => item("ARC reduction (alpha1 = alpha2 = 0)", false, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_battery_passes() {
        let report = Battery::standard().run();
        assert!(report.passed(), "{}", report.to_text());
        assert_eq!(report.items.len(), 8);
    }
}
