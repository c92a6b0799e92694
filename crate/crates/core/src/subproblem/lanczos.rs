use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::secular::EigenSystem;
use crate::error::{Error, Result};
use crate::objective::Hessian;

/// Absolute floor on the Lanczos residual below which the Krylov space is
/// treated as invariant.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Orthonormal Krylov basis `Q_j` with `Q_j^T H Q_j = T_j` tridiagonal.
///
/// Every new vector is fully reorthogonalized against the basis (two passes).
/// The raw products `H q_i` are kept so that `H Q_j y` is available without
/// further Hessian actions.
pub struct LanczosBasis<'h, 'a> {
    hessian: &'h Hessian<'a>,
    q: Vec<DVector<f64>>,
    hq: Vec<DVector<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    next: Option<DVector<f64>>,
}

impl<'h, 'a> LanczosBasis<'h, 'a> {
    /// Starts from `start / |start|`. Fails on a zero or non-finite start.
    pub fn new(hessian: &'h Hessian<'a>, start: &DVector<f64>) -> Result<Self> {
        let norm = start.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numeric(format!("Lanczos start vector has norm {norm}")));
        }
        Ok(LanczosBasis {
            hessian,
            q: Vec::new(),
            hq: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            next: Some(start / norm),
        })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// True once the last residual fell below [`BREAKDOWN_TOL`] (the space is
    /// invariant under `H`) or the basis spans the whole space.
    pub fn exhausted(&self) -> bool {
        self.next.is_none()
    }

    /// Last off-diagonal residual `beta_j`.
    pub fn residual(&self) -> f64 {
        self.beta.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Adds one basis vector. Returns false when already exhausted.
    pub fn expand(&mut self) -> Result<bool> {
        let Some(qj) = self.next.take() else {
            return Ok(false);
        };
        let hq = self.hessian.apply(&qj);
        let a = qj.dot(&hq);
        let mut w = &hq - &qj * a;
        if let (Some(prev), Some(&b)) = (self.q.last(), self.beta.last()) {
            w.axpy(-b, prev, 1.0);
        }
        self.q.push(qj);
        self.hq.push(hq);
        for _ in 0..2 {
            for qi in &self.q {
                let c = qi.dot(&w);
                w.axpy(-c, qi, 1.0);
            }
        }
        let b = w.norm();
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Numeric("non-finite Lanczos recurrence".into()));
        }
        self.alpha.push(a);
        self.beta.push(b);
        let scale = self.alpha.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if b > BREAKDOWN_TOL * scale && self.q.len() < self.hessian.dim() {
            self.next = Some(w / b);
        }
        Ok(true)
    }

    pub fn tridiagonal(&self) -> DMatrix<f64> {
        let j = self.q.len();
        let mut t = DMatrix::zeros(j, j);
        for i in 0..j {
            t[(i, i)] = self.alpha[i];
            if i + 1 < j {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        t
    }

    /// `Q_j^T v`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.q.len(), self.q.iter().map(|qi| qi.dot(v)))
    }

    /// `Q_j y`.
    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        combine(&self.q, y)
    }

    /// `H Q_j y`, from the stored products.
    pub fn lift_hessian(&self, y: &DVector<f64>) -> DVector<f64> {
        combine(&self.hq, y)
    }
}

fn combine(vs: &[DVector<f64>], y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(vs[0].len());
    for (v, c) in vs.iter().zip(y.iter()) {
        out.axpy(*c, v, 1.0);
    }
    out
}

/// Smallest-eigenvalue estimate from a Lanczos run.
#[derive(Debug, Clone)]
pub struct MinEigen {
    pub value: f64,
    pub vector: DVector<f64>,
    /// Ritz residual `|H u - value u|` met `1e-6 * max(1, |T|)`.
    pub converged: bool,
    pub steps: usize,
}

/// Estimate `lambda_min(H)` with at most `max_steps` Lanczos steps from a
/// seeded random start.
pub fn min_eigen_lanczos(hessian: &Hessian<'_>, max_steps: usize, seed: u64) -> Result<MinEigen> {
    let d = hessian.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    min_eigen_from(hessian, &start, max_steps)
}

/// As [`min_eigen_lanczos`] from a given start vector, e.g. a previous Ritz
/// vector when restarting.
pub fn min_eigen_from(hessian: &Hessian<'_>, start: &DVector<f64>, max_steps: usize) -> Result<MinEigen> {
    let mut basis = LanczosBasis::new(hessian, start)?;
    for _ in 0..max_steps.max(1) {
        if !basis.expand()? {
            break;
        }
    }
    let t = basis.tridiagonal();
    let eig = EigenSystem::new(&t)?;
    let imin = eig.values.imin();
    let value = eig.values[imin];
    let y = eig.vectors.column(imin).into_owned();
    let last = y[y.len() - 1].abs();
    let scale = t.amax().max(1.0);
    let converged = basis.exhausted() || basis.residual() * last <= 1e-6 * scale;
    let mut vector = basis.lift(&y);
    vector /= vector.norm();
    Ok(MinEigen {
        value,
        vector,
        converged,
        steps: basis.len(),
    })
}
