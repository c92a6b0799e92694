//! Trust-region subproblem `min g^T s + 1/2 s^T H s, |s| <= radius`, used by
//! the trust-region baseline.

use nalgebra::DVector;

use super::lanczos::LanczosBasis;
use super::secular::{trust_in_eigenbasis, EigenSystem};
use crate::error::{Error, Result};
use crate::objective::Hessian;

#[derive(Debug, Clone)]
pub struct TrustSolution {
    pub s: DVector<f64>,
    /// `-(g^T s + 1/2 s^T H s)`.
    pub model_decrease: f64,
    /// Multiplier of the norm constraint.
    pub lambda: f64,
    pub krylov_dim: usize,
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("trust radius must be positive, got {radius}")))
    }
}

pub fn solve_trust_exact(g: &DVector<f64>, hessian: &Hessian<'_>, radius: f64) -> Result<TrustSolution> {
    check_radius(radius)?;
    let h = hessian
        .dense()
        .ok_or_else(|| Error::Precondition("exact trust-region solver needs a dense Hessian".into()))?;
    let eig = EigenSystem::new(h)?;
    let shift = trust_in_eigenbasis(&eig, g, radius)?;
    let hs = h * &shift.s;
    Ok(TrustSolution {
        model_decrease: -(g.dot(&shift.s) + 0.5 * shift.s.dot(&hs)),
        s: shift.s,
        lambda: shift.lambda,
        krylov_dim: g.len(),
    })
}

/// Lanczos projection of the trust-region subproblem, stopping when the
/// Lagrangian gradient `|g + (H + lambda I) s|` drops below
/// `tol * max(1, |g|)` or the subspace is exhausted.
pub fn solve_trust_krylov(
    g: &DVector<f64>,
    hessian: &Hessian<'_>,
    radius: f64,
    max_dim: usize,
    tol: f64,
    start: Option<&DVector<f64>>,
) -> Result<TrustSolution> {
    check_radius(radius)?;
    let d = g.len();
    let gnorm = g.norm();
    let start = match start {
        Some(v) => v,
        None if gnorm == 0.0 => {
            return Ok(TrustSolution {
                s: DVector::zeros(d),
                model_decrease: 0.0,
                lambda: 0.0,
                krylov_dim: 0,
            })
        }
        None => g,
    };
    let cap = max_dim.max(1).min(d);
    let limit = tol * gnorm.max(1.0);
    let mut basis = LanczosBasis::new(hessian, start)?;
    loop {
        basis.expand()?;
        let t = basis.tridiagonal();
        let gr = basis.project(g);
        let eig = EigenSystem::new(&t)?;
        let shift = trust_in_eigenbasis(&eig, &gr, radius)?;
        let s = basis.lift(&shift.s);
        let hs = basis.lift_hessian(&shift.s);
        let resid = (g + &hs + &s * shift.lambda).norm();
        if resid <= limit || basis.len() >= cap || basis.exhausted() {
            return Ok(TrustSolution {
                model_decrease: -(g.dot(&s) + 0.5 * s.dot(&hs)),
                s,
                lambda: shift.lambda,
                krylov_dim: basis.len(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn interior_newton_step() {
        let h = Hessian::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0])));
        let g = DVector::from_vec(vec![1.0, 1.0]);
        let sol = solve_trust_exact(&g, &h, 10.0).unwrap();
        assert!((sol.s - DVector::from_vec(vec![-0.5, -0.25])).amax() < 1e-15);
        assert_eq!(sol.lambda, 0.0);
    }

    #[test]
    fn boundary_step_has_radius_norm() {
        let h = Hessian::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0, 3.0])));
        let g = DVector::from_vec(vec![0.5, 1.0, -1.0]);
        let exact = solve_trust_exact(&g, &h, 0.7).unwrap();
        assert!((exact.s.norm() - 0.7).abs() < 1e-12);
        assert!(exact.lambda >= 1.0);
        let kry = solve_trust_krylov(&g, &h, 0.7, 3, 1e-10, None).unwrap();
        assert!((kry.model_decrease - exact.model_decrease).abs() < 1e-10);
    }

    #[test]
    fn hard_case_fills_radius() {
        let h = Hessian::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0])));
        let g = DVector::from_vec(vec![0.0, 0.1]);
        let sol = solve_trust_exact(&g, &h, 2.0).unwrap();
        assert!((sol.s.norm() - 2.0).abs() < 1e-12);
        assert!((sol.lambda - 1.0).abs() < 1e-15);
    }
}
