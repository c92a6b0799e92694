use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{Objective, Point};
use crate::error::{Error, Result};

const DIRECTIONS: usize = 4;
const DIRECTION_SEED: u64 = 0x5eed_d1ff;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeReport {
    pub max_rel_err_grad: f64,
    pub max_rel_err_hvp: f64,
}

/// Worst componentwise error scaled by the larger of the two vectors' max-norms.
fn rel_err(analytic: &DVector<f64>, numeric: &DVector<f64>) -> f64 {
    let scale = analytic.amax().max(numeric.amax()).max(1e-8);
    (analytic - numeric).amax() / scale
}

fn finite_or(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(what()))
    }
}

fn finite_vec_or(v: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    match v.iter().position(|c| !c.is_finite()) {
        None => Ok(v),
        Some(i) => Err(Error::Numeric(format!("{what} is non-finite at coordinate {i}"))),
    }
}

/// Central-difference check of the gradient (coordinatewise) and of the
/// Hessian action (along a few seeded random unit directions).
pub fn check_derivatives(
    model: &dyn Objective,
    x: &Point,
    h: f64,
) -> Result<DerivativeReport> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("step h must be positive, got {h}")));
    }
    let d = model.dim();
    if x.len() != d {
        return Err(Error::Precondition(format!(
            "point has {} coordinates, model expects {d}",
            x.len()
        )));
    }

    let grad = finite_vec_or(model.gradient(x), "analytic gradient")?;
    let mut fd_grad = DVector::zeros(d);
    let mut probe = x.clone();
    for i in 0..d {
        let xi = probe[i];
        probe[i] = xi + h;
        let fp = finite_or(model.value(&probe), || {
            format!("f(x + h e_{i}) is non-finite (coordinate {i})")
        })?;
        probe[i] = xi - h;
        let fm = finite_or(model.value(&probe), || {
            format!("f(x - h e_{i}) is non-finite (coordinate {i})")
        })?;
        probe[i] = xi;
        fd_grad[i] = (fp - fm) / (2.0 * h);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
    let mut worst_hvp = 0.0_f64;
    for _ in 0..DIRECTIONS {
        let mut u = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        u /= u.norm();
        let hu = finite_vec_or(model.hessian_vec(x, &u), "analytic Hessian action")?;
        let gp = finite_vec_or(model.gradient(&(x + &u * h)), "gradient at x + h u")?;
        let gm = finite_vec_or(model.gradient(&(x - &u * h)), "gradient at x - h u")?;
        let fd = (gp - gm) / (2.0 * h);
        worst_hvp = worst_hvp.max(rel_err(&hu, &fd));
    }

    Ok(DerivativeReport {
        max_rel_err_grad: rel_err(&grad, &fd_grad),
        max_rel_err_hvp: worst_hvp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Quadratic;

    struct Broken;

    impl Objective for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &Point) -> f64 {
            if x[1] > 0.5 {
                f64::NAN
            } else {
                x.norm_squared()
            }
        }
        fn gradient(&self, x: &Point) -> DVector<f64> {
            x * 2.0
        }
        fn hessian_vec(&self, _x: &Point, v: &DVector<f64>) -> DVector<f64> {
            v * 2.0
        }
    }

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let q = Quadratic::isotropic(7);
        let x = DVector::from_fn(7, |i, _| i as f64 * 0.3 - 1.0);
        let r = check_derivatives(&q, &x, 1e-5).unwrap();
        assert!(r.max_rel_err_grad <= 1e-8, "{r:?}");
        assert!(r.max_rel_err_hvp <= 1e-8, "{r:?}");
    }

    #[test]
    fn non_finite_names_coordinate() {
        let x = DVector::from_vec(vec![0.0, 0.5]);
        let err = check_derivatives(&Broken, &x, 1e-3).unwrap_err();
        assert!(err.to_string().contains("coordinate 1"), "{err}");
    }

    #[test]
    fn rejects_bad_step() {
        let q = Quadratic::isotropic(2);
        assert!(check_derivatives(&q, &DVector::zeros(2), 0.0).is_err());
    }
}
