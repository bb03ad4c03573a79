//! Subdomain-restricted objectives with the first-order consistency
//! correction.
//!
//! For subdomain `d` anchored at the current iterate `θᵏ`, the restricted
//! objective is `f_d(v) = f(θᵏ with subdomain d replaced by v)`. The
//! corrected local objective adds a linear term,
//!
//! ```text
//! f̃_d(v) = f_d(v) + ⟨R_d ∇f(θᵏ) − ∇f_d(R_d θᵏ), v − R_d θᵏ⟩,
//! ```
//!
//! so that its gradient at the anchor equals the restriction of the global
//! gradient even when the local solve runs on a different batch than the one
//! that produced `∇f(θᵏ)`. On the same batch the correction vanishes.

use crate::decomp::{restrict, Partition};
use crate::error::{Error, Result};
use crate::objective::{BatchRef, Objective};
use crate::vector::ParamVector;

pub struct LocalObjective<'a> {
    base: &'a dyn Objective,
    partition: &'a Partition,
    d: usize,
    anchor: ParamVector,
    anchor_restricted: ParamVector,
    anchor_value: f64,
    correction: ParamVector,
}

impl<'a> LocalObjective<'a> {
    /// Builds the corrected local objective for subdomain `d` anchored at
    /// `anchor`, against the global gradient `global_grad`. The correction is
    /// computed by one evaluation of `base` on `batch` at the anchor.
    pub fn new(
        base: &'a dyn Objective,
        partition: &'a Partition,
        d: usize,
        anchor: &ParamVector,
        global_grad: &ParamVector,
        batch: &BatchRef,
    ) -> Result<Self> {
        if base.dim() != partition.dim() {
            return Err(Error::Dimension {
                context: "local objective partition",
                expected: base.dim(),
                actual: partition.dim(),
            });
        }
        if anchor.len() != base.dim() {
            return Err(Error::Dimension {
                context: "local objective anchor",
                expected: base.dim(),
                actual: anchor.len(),
            });
        }
        if global_grad.len() != base.dim() {
            return Err(Error::Dimension {
                context: "local objective global gradient",
                expected: base.dim(),
                actual: global_grad.len(),
            });
        }
        let anchor_restricted = restrict(partition, d, anchor)?;
        let (anchor_value, grad_here) = base.eval(anchor, batch)?;
        if !anchor_value.is_finite() {
            return Err(Error::NonFinite("objective value at the anchor"));
        }
        let correction = restrict(partition, d, global_grad)?
            .sub(&restrict(partition, d, &grad_here)?)?;
        Ok(LocalObjective {
            base,
            partition,
            d,
            anchor: anchor.clone(),
            anchor_restricted,
            anchor_value,
            correction,
        })
    }

    pub fn subdomain(&self) -> usize {
        self.d
    }

    pub fn anchor_restricted(&self) -> &ParamVector {
        &self.anchor_restricted
    }

    /// `f̃_d` at the anchor, which equals the base value there.
    pub fn anchor_value(&self) -> f64 {
        self.anchor_value
    }

    pub fn correction(&self) -> &ParamVector {
        &self.correction
    }

    fn embed(&self, theta_d: &ParamVector) -> Result<ParamVector> {
        let subset = self.partition.subset(self.d)?;
        if theta_d.len() != subset.len() {
            return Err(Error::Dimension {
                context: "local iterate",
                expected: subset.len(),
                actual: theta_d.len(),
            });
        }
        let mut full = self.anchor.as_slice().to_vec();
        for (k, &i) in subset.iter().enumerate() {
            full[i] = theta_d[k];
        }
        ParamVector::checked(full, "local iterate embedding")
    }

    /// Plain restriction without the correction: `f_d` and its gradient.
    pub fn restricted_eval(
        &self,
        theta_d: &ParamVector,
        batch: &BatchRef,
    ) -> Result<(f64, ParamVector)> {
        let full = self.embed(theta_d)?;
        let (f, g) = self.base.eval(&full, batch)?;
        Ok((f, restrict(self.partition, self.d, &g)?))
    }

    /// The corrected objective `f̃_d` and its gradient.
    pub fn consistent_eval(
        &self,
        theta_d: &ParamVector,
        batch: &BatchRef,
    ) -> Result<(f64, ParamVector)> {
        let (f, g) = self.restricted_eval(theta_d, batch)?;
        let diff = theta_d.sub(&self.anchor_restricted)?;
        let value = f + self.correction.dot(&diff)?;
        Ok((value, g.add(&self.correction)?))
    }
}

impl Objective for LocalObjective<'_> {
    fn dim(&self) -> usize {
        self.anchor_restricted.len()
    }

    fn eval(&self, theta: &ParamVector, batch: &BatchRef) -> Result<(f64, ParamVector)> {
        self.consistent_eval(theta, batch)
    }

    fn loss(&self, theta: &ParamVector, batch: &BatchRef) -> Result<f64> {
        let full = self.embed(theta)?;
        let f = self.base.loss(&full, batch)?;
        let diff = theta.sub(&self.anchor_restricted)?;
        Ok(f + self.correction.dot(&diff)?)
    }
}
