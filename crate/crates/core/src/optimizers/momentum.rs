use nalgebra::DVector;

use super::HyperParams;
use crate::objective::{Objective, Point};

/// `min(tau, alpha1 |s|, alpha2 |s|^2)`.
pub fn momentum_cap(step_norm: f64, p: &HyperParams) -> f64 {
    p.tau.min(p.alpha1 * step_norm).min(p.alpha2 * step_norm * step_norm)
}

#[derive(Debug, Clone)]
pub struct MomentumResult {
    pub beta: f64,
    /// `y + beta v_prev`, equal to `y` when `beta = 0`.
    pub z: Point,
    pub f_z: f64,
    /// Objective evaluations spent.
    pub evaluations: usize,
}

/// Backtracking search over `beta_max, beta_max/2, ...` for the largest
/// momentum weight whose point `z = y + beta v_prev` is no worse than `y`.
///
/// `y = x_k + s_k` is the accepted trial point and `f_y` its value. A zero
/// `v_prev` admits any weight, so `beta_max` is returned with `z = y`. When no
/// candidate qualifies the result is `beta = 0, z = y`.
pub fn momentum_search(
    model: &dyn Objective,
    y: &Point,
    f_y: f64,
    v_prev: &DVector<f64>,
    s: &DVector<f64>,
    p: &HyperParams,
) -> MomentumResult {
    let beta_max = momentum_cap(s.norm(), p);
    let at_y = |beta: f64, evaluations| MomentumResult {
        beta,
        z: y.clone(),
        f_z: f_y,
        evaluations,
    };
    if !(beta_max > 0.0) {
        return at_y(0.0, 0);
    }
    if v_prev.iter().all(|v| *v == 0.0) {
        return at_y(beta_max, 0);
    }
    let mut beta = beta_max;
    for i in 0..=p.momentum_halvings {
        let z = y + v_prev * beta;
        let f_z = model.value(&z);
        // Ties go to the momentum point.
        if f_z <= f_y {
            return MomentumResult {
                beta,
                z,
                f_z,
                evaluations: i as usize + 1,
            };
        }
        beta *= 0.5;
    }
    at_y(0.0, p.momentum_halvings as usize + 1)
}
