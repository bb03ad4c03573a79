//! Reference first-order optimizers for the comparison runs.
//!
//! The Adam update here is written with the exact expression order of the
//! library's clipped variant so that, whenever the clip never engages, the
//! two produce bitwise-identical trajectories.

use apts::cadam::{BETA1, BETA2, EPSILON};

/// Plain Adam with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        assert!(lr > 0.0 && lr.is_finite(), "learning rate must be positive");
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Updates `theta` in place from `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len(), "adam parameter dimension");
        assert_eq!(grad.len(), self.m.len(), "adam gradient dimension");
        self.t += 1;
        let t = self.t as f64;
        let bias1 = 1.0 - BETA1.powf(t);
        let bias2 = 1.0 - BETA2.powf(t);
        for (i, &g) in grad.iter().enumerate() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            theta[i] += -(self.lr * m_hat / (v_hat.sqrt() + EPSILON));
        }
    }
}

/// Stochastic gradient descent with classical momentum:
/// `v ← μ·v + g`, `θ ← θ − lr·v`.
#[derive(Clone, Debug)]
pub struct SgdState {
    velocity: Vec<f64>,
    lr: f64,
    momentum: f64,
}

impl SgdState {
    pub fn new(dim: usize, lr: f64, momentum: f64) -> Self {
        assert!(lr > 0.0 && lr.is_finite(), "learning rate must be positive");
        assert!(
            (0.0..1.0).contains(&momentum),
            "momentum must lie in [0, 1)"
        );
        SgdState {
            velocity: vec![0.0; dim],
            lr,
            momentum,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.velocity.len(), "sgd parameter dimension");
        assert_eq!(grad.len(), self.velocity.len(), "sgd gradient dimension");
        for (i, &g) in grad.iter().enumerate() {
            self.velocity[i] = self.momentum * self.velocity[i] + g;
            theta[i] -= self.lr * self.velocity[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use apts::cadam::{cadam_step, CAdamState};
    use apts::vector::{Norm, ParamVector};

    #[test]
    fn adam_matches_unclipped_cadam_bitwise() {
        let grads: Vec<Vec<f64>> = (0..40)
            .map(|k| (0..4).map(|i| ((k * 4 + i) as f64 * 0.21).cos()).collect())
            .collect();

        let mut theta_a = vec![0.3, -0.7, 1.1, 0.0];
        let mut adam = AdamState::new(4, 0.02);

        let mut theta_c = ParamVector::from_slice(&theta_a).unwrap();
        let mut cadam = CAdamState::new(4, 0.02).unwrap();

        for g in &grads {
            adam.step(&mut theta_a, g);
            let gv = ParamVector::from_slice(g).unwrap();
            let s = cadam_step(&mut cadam, &gv, f64::MAX, Norm::Linf).unwrap();
            theta_c = theta_c.add(&s).unwrap();
        }
        assert_eq!(theta_a.as_slice(), theta_c.as_slice());
    }

    #[test]
    fn sgd_momentum_accumulates_velocity() {
        let mut theta = vec![0.0];
        let mut sgd = SgdState::new(1, 0.1, 0.5);
        sgd.step(&mut theta, &[1.0]); // v = 1.0, θ = −0.1
        assert!((theta[0] + 0.1).abs() < 1e-15);
        sgd.step(&mut theta, &[1.0]); // v = 1.5, θ = −0.25
        assert!((theta[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_momentum_is_plain_gradient_descent() {
        let mut theta = vec![2.0, -3.0];
        let mut sgd = SgdState::new(2, 0.25, 0.0);
        sgd.step(&mut theta, &[4.0, -2.0]);
        assert_eq!(theta, vec![1.0, -2.5]);
    }
}
