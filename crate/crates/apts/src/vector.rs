//! Flat parameter vectors and the two norms used by the solvers.

use crate::error::{Error, Result};

/// Which norm a trust region (or a step clip) is measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    /// Euclidean norm.
    L2,
    /// Maximum absolute entry.
    Linf,
}

/// A dense parameter vector whose entries are guaranteed finite.
///
/// Every constructor and every arithmetic helper re-validates finiteness, so
/// holding a `ParamVector` is proof that no NaN or infinity has leaked into
/// an iterate, gradient, or step.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    /// Wraps `values`, rejecting NaN and infinities.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::checked(values, "vector construction")
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector {
            values: vec![0.0; len],
        }
    }

    pub(crate) fn checked(values: Vec<f64>, context: &'static str) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(context));
        }
        Ok(ParamVector { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.values.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Linf => self.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_len(other.len(), "dot")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_len(other.len(), "vector add")?;
        let out = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Self::checked(out, "vector add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_len(other.len(), "vector sub")?;
        let out = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Self::checked(out, "vector sub")
    }

    pub fn scale(&self, alpha: f64) -> Result<Self> {
        let out = self.values.iter().map(|v| alpha * v).collect();
        Self::checked(out, "vector scale")
    }

    fn check_len(&self, other: usize, context: &'static str) -> Result<()> {
        if self.len() != other {
            return Err(Error::Dimension {
                context,
                expected: self.len(),
                actual: other,
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        self.values.as_slice()
    }
}

/// Computes `alpha * x + y`.
pub fn axpy(alpha: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            context: "axpy",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let out = x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(xi, yi)| alpha * xi + yi)
        .collect();
    ParamVector::checked(out, "axpy")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_norm_of_3_4_is_5() {
        let v = ParamVector::from_slice(&[3.0, 4.0]).unwrap();
        assert_eq!(v.norm(Norm::L2), 5.0);
    }

    #[test]
    fn linf_norm_takes_max_abs() {
        let v = ParamVector::from_slice(&[3.0, -7.0, 2.0]).unwrap();
        assert_eq!(v.norm(Norm::Linf), 7.0);
    }

    #[test]
    fn empty_vector_has_zero_norm() {
        let v = ParamVector::zeros(0);
        assert_eq!(v.norm(Norm::L2), 0.0);
        assert_eq!(v.norm(Norm::Linf), 0.0);
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(matches!(
            ParamVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            ParamVector::new(vec![f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn axpy_matches_hand_computation() {
        let x = ParamVector::from_slice(&[1.0, 2.0]).unwrap();
        let y = ParamVector::from_slice(&[10.0, 20.0]).unwrap();
        let z = axpy(2.0, &x, &y).unwrap();
        assert_eq!(z.as_slice(), &[12.0, 24.0]);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let x = ParamVector::zeros(2);
        let y = ParamVector::zeros(3);
        assert!(matches!(x.dot(&y), Err(Error::Dimension { .. })));
        assert!(matches!(axpy(1.0, &x, &y), Err(Error::Dimension { .. })));
    }

    #[test]
    fn scale_by_infinity_is_caught() {
        let x = ParamVector::from_slice(&[1.0]).unwrap();
        assert!(matches!(x.scale(f64::INFINITY), Err(Error::NonFinite(_))));
    }
}
