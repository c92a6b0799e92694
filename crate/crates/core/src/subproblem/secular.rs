//! Eigenbasis solvers for the cubic and trust-region subproblems.
//!
//! With `H = Q diag(l) Q^T` and `g~ = Q^T g`, both subproblems reduce to
//! finding a shift `lambda >= max(0, -l_min)` such that
//! `s(lambda) = -(H + lambda I)^{-1} g` has a prescribed norm: `2 lambda / sigma`
//! for the cubic model, the radius for the trust region. The root is sought on
//! `phi(lambda) = 1/|s(lambda)| - 1/target(lambda)`, which is increasing and
//! close to linear in `lambda`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ROOT_ITERS: usize = 200;

/// Relative threshold on `|g~_i| / |g|` under which `g` is considered
/// orthogonal to the bottom eigenspace.
pub const HARD_CASE_TOL: f64 = 1e-12;

pub struct EigenSystem {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("Hessian has non-finite entries".into()));
        }
        let d = h.nrows();
        let evd = faer::Mat::<f64>::from_fn(d, d, |i, j| h[(i, j)]).selfadjoint_eigendecomposition(faer::Side::Lower);
        let (s, u) = (evd.s().column_vector(), evd.u());
        let values = DVector::from_fn(d, |i, _| s.read(i));
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("eigendecomposition produced non-finite values".into()));
        }
        Ok(EigenSystem {
            values,
            vectors: DMatrix::from_fn(d, d, |i, j| u.read(i, j)),
        })
    }

    pub fn min_value(&self) -> f64 {
        self.values.min()
    }
}

/// Shift solution returned by the eigenbasis solvers.
pub struct ShiftSolution {
    pub s: DVector<f64>,
    pub lambda: f64,
    pub hard_case: bool,
    pub iterations: usize,
}

/// Target norm as a function of the shift, with its derivative.
#[derive(Clone, Copy)]
enum Target {
    /// `|s| = 2 lambda / sigma`.
    Cubic { sigma: f64 },
    /// `|s| = radius`.
    Radius(f64),
}

impl Target {
    /// `1 / target(lambda)` and its derivative in `lambda`.
    fn inv(self, lambda: f64) -> (f64, f64) {
        match self {
            Target::Cubic { sigma } => (sigma / (2.0 * lambda), -sigma / (2.0 * lambda * lambda)),
            Target::Radius(r) => (1.0 / r, 0.0),
        }
    }

    fn norm_at(self, lambda: f64) -> f64 {
        match self {
            Target::Cubic { sigma } => 2.0 * lambda / sigma,
            Target::Radius(r) => r,
        }
    }
}

struct Shifted<'a> {
    /// `l_i + lambda_lo`, nonnegative, exactly zero at the bottom eigenvalue
    /// when it is negative.
    base: Vec<f64>,
    gt: &'a DVector<f64>,
}

impl Shifted<'_> {
    /// `|s(t)|` and `d|s|/dt`-related sum `sum g~_i^2 / (base_i + t)^3`.
    fn eval(&self, t: f64) -> (f64, f64) {
        let mut n2 = 0.0;
        let mut cube = 0.0;
        for (b, g) in self.base.iter().zip(self.gt.iter()) {
            if *g == 0.0 {
                continue;
            }
            let den = b + t;
            let r = g / den;
            n2 += r * r;
            cube += r * r / den;
        }
        (n2.sqrt(), cube)
    }
}

fn bottom_group(values: &DVector<f64>, lam_min: f64) -> Vec<usize> {
    let scale = values.amax().max(1.0);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v - lam_min <= 1e-12 * scale)
        .map(|(i, _)| i)
        .collect()
}

/// Global minimizer of `g^T s + 0.5 s^T H s + sigma/6 |s|^3` in the eigenbasis.
pub fn cubic_in_eigenbasis(eig: &EigenSystem, g: &DVector<f64>, sigma: f64) -> Result<ShiftSolution> {
    solve(eig, g, Target::Cubic { sigma })
}

/// Global minimizer of `g^T s + 0.5 s^T H s` subject to `|s| <= radius`.
pub fn trust_in_eigenbasis(eig: &EigenSystem, g: &DVector<f64>, radius: f64) -> Result<ShiftSolution> {
    let lam_min = eig.min_value();
    if lam_min >= 0.0 {
        // Interior (pseudo-)Newton step when it exists and fits.
        let gt = eig.vectors.tr_mul(g);
        let st = DVector::from_fn(gt.len(), |i, _| match (eig.values[i] > 0.0, gt[i] == 0.0) {
            (true, _) => -gt[i] / eig.values[i],
            (false, true) => 0.0,
            (false, false) => f64::INFINITY,
        });
        if st.norm() <= radius {
            return Ok(ShiftSolution {
                s: &eig.vectors * st,
                lambda: 0.0,
                hard_case: false,
                iterations: 0,
            });
        }
    }
    solve(eig, g, Target::Radius(radius))
}

fn solve(eig: &EigenSystem, g: &DVector<f64>, target: Target) -> Result<ShiftSolution> {
    let d = g.len();
    let gt = eig.vectors.tr_mul(g);
    let gnorm = gt.norm();
    let lam_min = eig.min_value();
    let lam_lo = (-lam_min).max(0.0);
    let group = if lam_min < 0.0 { bottom_group(&eig.values, lam_min) } else { Vec::new() };
    let mut base: Vec<f64> = eig.values.iter().map(|v| v + lam_lo).collect();
    for &i in &group {
        base[i] = 0.0;
    }

    if gnorm == 0.0 && lam_min >= 0.0 {
        // Zero gradient with PSD Hessian: the origin is optimal.
        return Ok(ShiftSolution {
            s: DVector::zeros(d),
            lambda: 0.0,
            hard_case: false,
            iterations: 0,
        });
    }

    // Hard case: g (numerically) orthogonal to the bottom eigenspace and the
    // pseudo-inverse step at lambda_lo already too short.
    if !group.is_empty() && group.iter().all(|&i| gt[i].abs() <= HARD_CASE_TOL * gnorm) {
        let mut gp = gt.clone();
        for &i in &group {
            gp[i] = 0.0;
        }
        let (pnorm, _) = Shifted { base: base.clone(), gt: &gp }.eval(0.0);
        let want = target.norm_at(lam_lo);
        if pnorm <= want {
            let mut st = DVector::from_fn(d, |i, _| if gp[i] == 0.0 { 0.0 } else { -gp[i] / base[i] });
            let i0 = group[0];
            let c = (want * want - pnorm * pnorm).max(0.0).sqrt();
            // Point the eigen-component downhill when g has any trace of it.
            st[i0] = if gt[i0] > 0.0 { -c } else { c };
            return Ok(ShiftSolution {
                s: &eig.vectors * st,
                lambda: lam_lo,
                hard_case: true,
                iterations: 0,
            });
        }
    }

    let sh = Shifted { base, gt: &gt };
    let phi = |t: f64| -> (f64, f64) {
        let (n, cube) = sh.eval(t);
        let (inv, dinv) = target.inv(lam_lo + t);
        (1.0 / n - inv, cube / (n * n * n) - dinv)
    };

    // Bracket the root in t = lambda - lambda_lo > 0; phi(0+) < 0 here.
    let mut lo = 0.0_f64;
    let mut hi = match target {
        Target::Cubic { sigma } => (sigma * gnorm).sqrt(),
        Target::Radius(r) => gnorm / r,
    }
    .max(eig.values.amax())
    .max(1e-12);
    let mut iterations = 0;
    while phi(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations > MAX_ROOT_ITERS || !hi.is_finite() {
            return Err(failure(eig, &sh, hi, phi(hi).0, iterations));
        }
    }

    let mut t = hi;
    loop {
        iterations += 1;
        let (f, df) = phi(t);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let (n, _) = sh.eval(t);
        let (inv, _) = target.inv(lam_lo + t);
        if f.abs() <= 1e-15 * (1.0 / n + inv) {
            break;
        }
        if iterations >= MAX_ROOT_ITERS {
            return Err(failure(eig, &sh, t, f, iterations));
        }
        let newton = t - f / df;
        t = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }

    Ok(ShiftSolution {
        s: &eig.vectors * step_at(&sh, t),
        lambda: lam_lo + t,
        hard_case: false,
        iterations,
    })
}

fn step_at(sh: &Shifted<'_>, t: f64) -> DVector<f64> {
    DVector::from_fn(sh.gt.len(), |i, _| {
        let g = sh.gt[i];
        if g == 0.0 {
            0.0
        } else {
            -g / (sh.base[i] + t)
        }
    })
}

fn failure(eig: &EigenSystem, sh: &Shifted<'_>, t: f64, phi: f64, iterations: usize) -> Error {
    Error::SolverFailure {
        iterations,
        residual: phi.abs(),
        best: &eig.vectors * step_at(sh, t),
    }
}
