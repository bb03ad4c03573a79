//! The objective abstraction plus deterministic test functions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// Which samples an evaluation should use.
///
/// Analytic test functions ignore the batch; data-backed objectives resolve
/// `Indices` against their dataset and reject out-of-range entries.
#[derive(Clone, Debug)]
pub enum BatchRef {
    /// Every sample.
    Full,
    /// An explicit subset, in the given order.
    Indices(Arc<[usize]>),
}

impl BatchRef {
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::domain("batch must contain at least one sample"));
        }
        Ok(BatchRef::Indices(indices.into()))
    }
}

/// A differentiable objective `f: R^n -> R`.
///
/// `eval` returns the value and the gradient together because every consumer
/// in this crate needs both; `loss` is the value-only path used for trial
/// points, where a non-finite value must be observable (it signals step
/// rejection) rather than turned into an error by gradient validation.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Value and gradient at `theta` over `batch`. The gradient is finite or
    /// this returns [`Error::NonFinite`]; the value may be any `f64`.
    fn eval(&self, theta: &ParamVector, batch: &BatchRef) -> Result<(f64, ParamVector)>;

    /// Value only. The default delegates to `eval`.
    fn loss(&self, theta: &ParamVector, batch: &BatchRef) -> Result<f64> {
        self.eval(theta, batch).map(|(f, _)| f)
    }
}

fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// `f(θ) = ½ θᵀ diag(a) θ − bᵀ θ`, gradient `diag(a) θ − b`.
pub struct QuadraticObjective {
    a_diag: Vec<f64>,
    b: Vec<f64>,
}

impl QuadraticObjective {
    /// Requires strictly positive curvature entries.
    pub fn new(a_diag: ParamVector, b: ParamVector) -> Result<Self> {
        check_dim("quadratic coefficients", a_diag.len(), b.len())?;
        if a_diag.as_slice().iter().any(|&a| a <= 0.0) {
            return Err(Error::domain(
                "quadratic curvature entries must be strictly positive",
            ));
        }
        Ok(QuadraticObjective {
            a_diag: a_diag.into_vec(),
            b: b.into_vec(),
        })
    }

    /// The unique minimizer `θ* = b / a` (componentwise).
    pub fn minimizer(&self) -> ParamVector {
        let v = self
            .b
            .iter()
            .zip(&self.a_diag)
            .map(|(b, a)| b / a)
            .collect();
        ParamVector::checked(v, "quadratic minimizer").expect("finite by construction")
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.a_diag.len()
    }

    fn eval(&self, theta: &ParamVector, _batch: &BatchRef) -> Result<(f64, ParamVector)> {
        check_dim("quadratic eval", self.dim(), theta.len())?;
        let t = theta.as_slice();
        let mut f = 0.0;
        let mut g = Vec::with_capacity(t.len());
        for i in 0..t.len() {
            f += 0.5 * self.a_diag[i] * t[i] * t[i] - self.b[i] * t[i];
            g.push(self.a_diag[i] * t[i] - self.b[i]);
        }
        Ok((f, ParamVector::checked(g, "quadratic gradient")?))
    }
}

/// The classic 2-d Rosenbrock valley `f(x, y) = (1−x)² + 100 (y−x²)²`.
pub struct RosenbrockObjective;

impl Objective for RosenbrockObjective {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, theta: &ParamVector, _batch: &BatchRef) -> Result<(f64, ParamVector)> {
        check_dim("rosenbrock eval", 2, theta.len())?;
        let (x, y) = (theta[0], theta[1]);
        let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
        let g = vec![
            -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
            200.0 * (y - x * x),
        ];
        Ok((f, ParamVector::checked(g, "rosenbrock gradient")?))
    }
}

/// Wraps a closure `θ -> (value, gradient)` as an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

/// Builds an objective from a closure; handy for ad-hoc test functions.
pub fn from_fn<F>(dim: usize, f: F) -> FnObjective<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
{
    FnObjective { dim, f }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &ParamVector, _batch: &BatchRef) -> Result<(f64, ParamVector)> {
        check_dim("closure objective eval", self.dim, theta.len())?;
        let (f, g) = (self.f)(theta.as_slice());
        check_dim("closure objective gradient", self.dim, g.len())?;
        Ok((f, ParamVector::checked(g, "closure objective gradient")?))
    }
}

/// Central-difference gradient estimate with per-coordinate step
/// `h · max(1, |θ_i|)`. Used as the oracle in gradient tests.
pub fn finite_diff_grad(
    obj: &dyn Objective,
    theta: &ParamVector,
    batch: &BatchRef,
    h: f64,
) -> Result<ParamVector> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!(
            "finite-difference step must be positive and finite, got {h}"
        )));
    }
    check_dim("finite-difference gradient", obj.dim(), theta.len())?;
    let base = theta.as_slice().to_vec();
    let mut grad = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let hi = h * base[i].abs().max(1.0);
        let mut plus = base.clone();
        plus[i] += hi;
        let mut minus = base.clone();
        minus[i] -= hi;
        let fp = obj.loss(&ParamVector::checked(plus, "finite-difference probe")?, batch)?;
        let fm = obj.loss(&ParamVector::checked(minus, "finite-difference probe")?, batch)?;
        grad.push((fp - fm) / (2.0 * hi));
    }
    ParamVector::checked(grad, "finite-difference gradient")
}
