//! Clipped Adam: a standard Adam update whose step, *after* the moment
//! update, is rescaled to fit inside a trust radius. When the raw step
//! already fits, the update is bit-for-bit a plain Adam step, and the
//! moment estimates never see the clipping either way.

use crate::error::{Error, Result};
use crate::vector::{Norm, ParamVector};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates plus the step counter.
#[derive(Clone, Debug)]
pub struct CAdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl CAdamState {
    pub fn new(dim: usize, lr: f64) -> Result<Self> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::domain(format!(
                "learning rate must be positive and finite, got {lr}"
            )));
        }
        Ok(CAdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
        })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::domain(format!(
                "learning rate must be positive and finite, got {lr}"
            )));
        }
        self.lr = lr;
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Zeroes both moments and the step counter.
    pub fn reset_moments(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }
}

/// One clipped-Adam step. Returns the displacement to add to the iterate;
/// the moments are updated from the raw gradient before clipping, so
/// clipping affects only the returned step. On any error the state is
/// untouched.
pub fn cadam_step(
    state: &mut CAdamState,
    grad: &ParamVector,
    delta: f64,
    norm: Norm,
) -> Result<ParamVector> {
    if grad.len() != state.dim() {
        return Err(Error::Dimension {
            context: "cadam gradient",
            expected: state.dim(),
            actual: grad.len(),
        });
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!(
            "clip radius must be positive and finite, got {delta}"
        )));
    }
    if grad.as_slice().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("cadam gradient"));
    }

    state.t += 1;
    let t = state.t as f64;
    let bias1 = 1.0 - BETA1.powf(t);
    let bias2 = 1.0 - BETA2.powf(t);
    let mut step = Vec::with_capacity(state.dim());
    for (i, &g) in grad.as_slice().iter().enumerate() {
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        step.push(-(state.lr * m_hat / (v_hat.sqrt() + EPSILON)));
    }
    let step = ParamVector::checked(step, "cadam step")?;
    let len = step.norm(norm);
    if len > delta {
        step.scale(delta / len)
    } else {
        Ok(step)
    }
}
