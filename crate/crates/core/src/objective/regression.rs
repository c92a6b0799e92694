use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Hessian, LinearOperator, Objective, Point, DEFAULT_DENSE_CAP};
use crate::data::Dataset;

/// `log(1 + e^t)` without overflow.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic sigmoid, evaluated on the branch that cannot overflow.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `(1/n) A^T diag(w) A v + diag(extra) v`, with `w` already divided by `n`.
struct CurvatureOp<'a> {
    a: &'a DMatrix<f64>,
    weights: DVector<f64>,
    extra: Option<DVector<f64>>,
}

impl LinearOperator for CurvatureOp<'_> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let av = self.a * v;
        let mut out = self.a.tr_mul(&av.component_mul(&self.weights));
        if let Some(extra) = &self.extra {
            out += extra.component_mul(v);
        }
        out
    }
}

impl CurvatureOp<'_> {
    fn to_dense(&self) -> DMatrix<f64> {
        let mut scaled = self.a.clone();
        for (mut row, w) in scaled.row_iter_mut().zip(self.weights.iter()) {
            row *= *w;
        }
        let mut h = self.a.tr_mul(&scaled);
        if let Some(extra) = &self.extra {
            for (j, e) in extra.iter().enumerate() {
                h[(j, j)] += e;
            }
        }
        // Symmetrize away rounding asymmetry of the product.
        let ht = h.transpose();
        (h + ht) * 0.5
    }
}

/// Negative log-likelihood of logistic regression plus the bounded
/// nonconvex penalty `chi * sum_j w_j^2 / (1 + w_j^2)`.
#[derive(Debug, Clone)]
pub struct LogisticNonconvex {
    data: Arc<Dataset>,
    chi: f64,
    dense_cap: usize,
}

impl LogisticNonconvex {
    pub fn new(data: Arc<Dataset>, chi: f64) -> Self {
        LogisticNonconvex {
            data,
            chi,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// The penalty term alone.
    pub fn regularizer(&self, w: &Point) -> f64 {
        self.chi * w.iter().map(|wj| wj * wj / (1.0 + wj * wj)).sum::<f64>()
    }

    fn curvature(&self, w: &Point) -> CurvatureOp<'_> {
        let n = self.data.len() as f64;
        let z = &self.data.features * w;
        let weights = z.map(|zi| {
            let p = sigmoid(zi);
            p * (1.0 - p) / n
        });
        let extra = w.map(|wj| {
            let q = 1.0 + wj * wj;
            self.chi * (2.0 - 6.0 * wj * wj) / (q * q * q)
        });
        CurvatureOp {
            a: &self.data.features,
            weights,
            extra: Some(extra),
        }
    }
}

impl Objective for LogisticNonconvex {
    fn name(&self) -> &str {
        "logistic_nonconvex"
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, w: &Point) -> f64 {
        let z = &self.data.features * w;
        let nll: f64 = z
            .iter()
            .zip(self.data.labels.iter())
            .map(|(&zi, &bi)| bi * softplus(-zi) + (1.0 - bi) * softplus(zi))
            .sum();
        nll / self.data.len() as f64 + self.regularizer(w)
    }

    fn gradient(&self, w: &Point) -> DVector<f64> {
        let n = self.data.len() as f64;
        let z = &self.data.features * w;
        let resid = z.zip_map(&self.data.labels, |zi, bi| (sigmoid(zi) - bi) / n);
        let mut g = self.data.features.tr_mul(&resid);
        for (gj, wj) in g.iter_mut().zip(w.iter()) {
            let q = 1.0 + wj * wj;
            *gj += self.chi * 2.0 * wj / (q * q);
        }
        g
    }

    fn hessian_vec(&self, w: &Point, v: &DVector<f64>) -> DVector<f64> {
        self.curvature(w).apply(v)
    }

    fn dense_hessian(&self, w: &Point) -> Option<DMatrix<f64>> {
        (self.dim() <= self.dense_cap).then(|| self.curvature(w).to_dense())
    }

    fn hessian(&self, w: &Point) -> Hessian<'_> {
        let op = self.curvature(w);
        if self.dim() <= self.dense_cap {
            Hessian::Dense(op.to_dense())
        } else {
            Hessian::Operator(Box::new(op))
        }
    }
}

/// Mean of `log(r^2 / 2 + 1)` over residuals `r = b - A w`.
#[derive(Debug, Clone)]
pub struct RobustLinear {
    data: Arc<Dataset>,
    dense_cap: usize,
}

impl RobustLinear {
    pub fn new(data: Arc<Dataset>) -> Self {
        RobustLinear {
            data,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    fn residuals(&self, w: &Point) -> DVector<f64> {
        &self.data.labels - &self.data.features * w
    }

    fn curvature(&self, w: &Point) -> CurvatureOp<'_> {
        let n = self.data.len() as f64;
        let weights = self.residuals(w).map(|r| {
            let q = 2.0 + r * r;
            (4.0 - 2.0 * r * r) / (q * q) / n
        });
        CurvatureOp {
            a: &self.data.features,
            weights,
            extra: None,
        }
    }
}

impl Objective for RobustLinear {
    fn name(&self) -> &str {
        "robust_linear"
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, w: &Point) -> f64 {
        let r = self.residuals(w);
        r.iter().map(|ri| (0.5 * ri * ri).ln_1p()).sum::<f64>() / self.data.len() as f64
    }

    fn gradient(&self, w: &Point) -> DVector<f64> {
        let n = self.data.len() as f64;
        let psi = self.residuals(w).map(|r| -2.0 * r / (2.0 + r * r) / n);
        self.data.features.tr_mul(&psi)
    }

    fn hessian_vec(&self, w: &Point, v: &DVector<f64>) -> DVector<f64> {
        self.curvature(w).apply(v)
    }

    fn dense_hessian(&self, w: &Point) -> Option<DMatrix<f64>> {
        (self.dim() <= self.dense_cap).then(|| self.curvature(w).to_dense())
    }

    fn hessian(&self, w: &Point) -> Hessian<'_> {
        let op = self.curvature(w);
        if self.dim() <= self.dense_cap {
            Hessian::Dense(op.to_dense())
        } else {
            Hessian::Operator(Box::new(op))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Arc<Dataset> {
        Arc::new(
            Dataset::new(
                DMatrix::from_row_slice(4, 3, &[
                    1.0, 0.5, -0.2, //
                    -0.3, 2.0, 0.1, //
                    0.7, -1.1, 0.4, //
                    0.0, 0.3, -0.9,
                ]),
                DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]),
                "toy",
            )
            .unwrap(),
        )
    }

    #[test]
    fn softplus_matches_naive_and_survives_extremes() {
        for t in [-30.0, -1.0, 0.0, 0.5, 20.0] {
            assert!((softplus(t) - (1.0 + f64::exp(t)).ln()).abs() < 1e-12);
        }
        assert_eq!(softplus(1000.0), 1000.0);
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn logistic_at_origin_is_log_two() {
        let m = LogisticNonconvex::new(toy(), 0.1);
        let f = m.value(&DVector::zeros(3));
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn robust_zero_residual_is_stationary() {
        let w = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let mut ds = (*toy()).clone();
        ds.labels = &ds.features * &w;
        let m = RobustLinear::new(Arc::new(ds));
        assert_eq!(m.value(&w), 0.0);
        assert!(m.gradient(&w).amax() < 1e-16);
    }

    #[test]
    fn dense_agrees_with_action_and_is_symmetric() {
        let w = DVector::from_vec(vec![0.4, -0.2, 1.5]);
        let models: Vec<Box<dyn Objective>> = vec![
            Box::new(LogisticNonconvex::new(toy(), 0.1)),
            Box::new(RobustLinear::new(toy())),
        ];
        for m in &models {
            let h = m.dense_hessian(&w).unwrap();
            assert!((&h - h.transpose()).amax() <= 1e-12);
            for j in 0..3 {
                let e = DVector::from_fn(3, |i, _| if i == j { 1.0 } else { 0.0 });
                let col = m.hessian_vec(&w, &e);
                assert!((col - h.column(j)).amax() <= 1e-10);
            }
        }
    }

    #[test]
    fn dense_cap_switches_representation() {
        let w = DVector::zeros(3);
        let m = RobustLinear::new(toy()).with_dense_cap(2);
        assert!(m.dense_hessian(&w).is_none());
        assert!(m.hessian(&w).dense().is_none());
        let m = RobustLinear::new(toy());
        assert!(m.hessian(&w).dense().is_some());
    }
}
