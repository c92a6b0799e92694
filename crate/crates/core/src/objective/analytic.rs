use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Objective, Point, DEFAULT_DENSE_CAP};

/// `f(x) = 0.5 x^T A x - b^T x` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        assert_eq!(a.nrows(), b.len());
        let at = a.transpose();
        Quadratic {
            a: (a + at) * 0.5,
            b,
        }
    }

    /// `0.5 |x|^2`.
    pub fn isotropic(dim: usize) -> Self {
        Quadratic::new(DMatrix::identity(dim, dim), DVector::zeros(dim))
    }

    /// Random orthogonal basis with eigenvalues log-spaced in `[1, condition]`
    /// and a standard normal linear term.
    pub fn random_spd(dim: usize, condition: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let eig = DVector::from_fn(dim, |i, _| {
            let t = if dim > 1 { i as f64 / (dim - 1) as f64 } else { 0.0 };
            condition.powf(t)
        });
        let a = &q * DMatrix::from_diagonal(&eig) * q.transpose();
        let b = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        Quadratic::new(a, b)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }

    /// Unique minimizer `A^{-1} b` (requires `A` positive definite).
    pub fn minimizer(&self) -> Option<DVector<f64>> {
        self.a.clone().cholesky().map(|c| c.solve(&self.b))
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * x.dot(&(&self.a * x)) - self.b.dot(x)
    }

    fn gradient(&self, x: &Point) -> DVector<f64> {
        &self.a * x - &self.b
    }

    fn hessian_vec(&self, _x: &Point, v: &DVector<f64>) -> DVector<f64> {
        &self.a * v
    }

    fn dense_hessian(&self, _x: &Point) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }
}

/// Chained Rosenbrock: `sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2`.
/// Global minimum 0 at the all-ones point.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    dim: usize,
    dense_cap: usize,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "rosenbrock needs at least two variables");
        Rosenbrock {
            dim,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    /// Diagonal and off-diagonal of the tridiagonal Hessian.
    fn bands(&self, x: &Point) -> (Vec<f64>, Vec<f64>) {
        let mut diag = vec![0.0; self.dim];
        let mut off = vec![0.0; self.dim - 1];
        for i in 0..self.dim - 1 {
            diag[i] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
            diag[i + 1] += 200.0;
            off[i] = -400.0 * x[i];
        }
        (diag, off)
    }
}

impl Objective for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Point) -> f64 {
        (0..self.dim - 1)
            .map(|i| {
                let a = x[i + 1] - x[i] * x[i];
                let b = 1.0 - x[i];
                100.0 * a * a + b * b
            })
            .sum()
    }

    fn gradient(&self, x: &Point) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for i in 0..self.dim - 1 {
            let a = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * a;
        }
        g
    }

    fn hessian_vec(&self, x: &Point, v: &DVector<f64>) -> DVector<f64> {
        let (diag, off) = self.bands(x);
        DVector::from_fn(self.dim, |i, _| {
            let mut out = diag[i] * v[i];
            if i > 0 {
                out += off[i - 1] * v[i - 1];
            }
            if i + 1 < self.dim {
                out += off[i] * v[i + 1];
            }
            out
        })
    }

    fn dense_hessian(&self, x: &Point) -> Option<DMatrix<f64>> {
        if self.dim > self.dense_cap {
            return None;
        }
        let (diag, off) = self.bands(x);
        let mut h = DMatrix::from_diagonal(&DVector::from_vec(diag));
        for (i, o) in off.into_iter().enumerate() {
            h[(i, i + 1)] = o;
            h[(i + 1, i)] = o;
        }
        Some(h)
    }
}
