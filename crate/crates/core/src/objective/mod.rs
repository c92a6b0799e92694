//! Objective functions with analytic first and second derivatives.
//!
//! Every model exposes its value, gradient and Hessian action. Models whose
//! dimension is at most [`DEFAULT_DENSE_CAP`] also materialize the dense
//! Hessian, which the exact subproblem solver and exact curvature estimates
//! rely on.

mod analytic;
mod check;
mod regression;

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use analytic::{Quadratic, Rosenbrock};
pub use check::{check_derivatives, DerivativeReport};
pub use regression::{LogisticNonconvex, RobustLinear};

/// Decision variables. Entries are expected to be finite.
pub type Point = DVector<f64>;

/// Largest dimension for which dense Hessians are materialized.
pub const DEFAULT_DENSE_CAP: usize = 256;

/// A symmetric linear map `v -> H v`.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }
}

/// Hessian at a fixed point, either materialized or as an action.
pub enum Hessian<'a> {
    Dense(DMatrix<f64>),
    Operator(Box<dyn LinearOperator + 'a>),
}

impl Hessian<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Hessian::Dense(m) => m.nrows(),
            Hessian::Operator(op) => op.dim(),
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Hessian::Dense(m) => m * v,
            Hessian::Operator(op) => op.apply(v),
        }
    }

    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        match self {
            Hessian::Dense(m) => Some(m),
            Hessian::Operator(_) => None,
        }
    }
}

impl std::fmt::Debug for Hessian<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hessian::Dense(m) => write!(f, "Hessian::Dense({}x{})", m.nrows(), m.ncols()),
            Hessian::Operator(op) => write!(f, "Hessian::Operator(dim={})", op.dim()),
        }
    }
}

/// Wraps an [`Objective`]'s `hessian_vec` at a fixed point.
struct PointHessian<'a, O: Objective + ?Sized> {
    model: &'a O,
    x: Point,
}

impl<O: Objective + ?Sized> LinearOperator for PointHessian<'_, O> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.model.hessian_vec(&self.x, v)
    }
}

/// A twice differentiable function `f: R^d -> R`.
///
/// Evaluation must be pure: the same input yields bit-identical output.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, x: &Point) -> DVector<f64>;

    fn hessian_vec(&self, x: &Point, v: &DVector<f64>) -> DVector<f64>;

    /// Dense Hessian. Must be provided whenever `dim() <= dense_cap`.
    fn dense_hessian(&self, _x: &Point) -> Option<DMatrix<f64>> {
        None
    }

    /// The Hessian at `x` in the cheapest representation available.
    fn hessian(&self, x: &Point) -> Hessian<'_> {
        match self.dense_hessian(x) {
            Some(h) => Hessian::Dense(h),
            None => Hessian::Operator(Box::new(PointHessian {
                model: self,
                x: x.clone(),
            })),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticNonconvex,
    RobustLinear,
    Quadratic,
    Rosenbrock,
}

impl ModelKind {
    pub fn is_regression(self) -> bool {
        matches!(self, ModelKind::LogisticNonconvex | ModelKind::RobustLinear)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LogisticNonconvex => "logistic_nonconvex",
            ModelKind::RobustLinear => "robust_linear",
            ModelKind::Quadratic => "quadratic",
            ModelKind::Rosenbrock => "rosenbrock",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic_nonconvex" => Ok(ModelKind::LogisticNonconvex),
            "robust_linear" => Ok(ModelKind::RobustLinear),
            "quadratic" => Ok(ModelKind::Quadratic),
            "rosenbrock" => Ok(ModelKind::Rosenbrock),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Everything needed to build an objective.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Problem dimension. For regression kinds this must match the dataset.
    pub dim: usize,
    pub dataset: Option<Arc<Dataset>>,
    /// Weight of the nonconvex regularizer (logistic only).
    pub chi: f64,
    /// Quadratic only: `None` gives `0.5 * |x|^2`, `Some(seed)` a seeded
    /// random positive definite form.
    pub seed: Option<u64>,
    pub dense_cap: usize,
}

impl ModelSpec {
    pub fn regression(kind: ModelKind, dataset: Arc<Dataset>, chi: f64) -> Self {
        ModelSpec {
            kind,
            dim: dataset.dim(),
            dataset: Some(dataset),
            chi,
            seed: None,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn analytic(kind: ModelKind, dim: usize) -> Self {
        ModelSpec {
            kind,
            dim,
            dataset: None,
            chi: 0.0,
            seed: None,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("model dimension must be positive".into()));
        }
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::Config(format!("chi must be >= 0, got {}", self.chi)));
        }
        match (self.kind.is_regression(), &self.dataset) {
            (true, None) => Err(Error::Config(format!(
                "model `{}` requires a dataset",
                self.kind.as_str()
            ))),
            (false, Some(_)) => Err(Error::Config(format!(
                "model `{}` does not take a dataset",
                self.kind.as_str()
            ))),
            (true, Some(ds)) if ds.dim() != self.dim => Err(Error::Config(format!(
                "dimension mismatch: spec dim {} but dataset has {} features",
                self.dim,
                ds.dim()
            ))),
            _ => Ok(()),
        }
    }
}

pub fn make_objective(spec: &ModelSpec) -> Result<Box<dyn Objective>> {
    spec.validate()?;
    let model: Box<dyn Objective> = match spec.kind {
        ModelKind::LogisticNonconvex => Box::new(
            LogisticNonconvex::new(spec.dataset.clone().unwrap(), spec.chi)
                .with_dense_cap(spec.dense_cap),
        ),
        ModelKind::RobustLinear => Box::new(
            RobustLinear::new(spec.dataset.clone().unwrap()).with_dense_cap(spec.dense_cap),
        ),
        ModelKind::Quadratic => Box::new(match spec.seed {
            None => Quadratic::isotropic(spec.dim),
            Some(seed) => Quadratic::random_spd(spec.dim, 100.0, seed),
        }),
        ModelKind::Rosenbrock => {
            if spec.dim < 2 {
                return Err(Error::Config("rosenbrock needs dim >= 2".into()));
            }
            Box::new(Rosenbrock::new(spec.dim).with_dense_cap(spec.dense_cap))
        }
    };
    Ok(model)
}
