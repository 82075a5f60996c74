//! Textbook coordinatewise optimizers, kept independent of the blockwise code
//! so that they can serve as baselines and as oracles for reduction checks.

use crate::error::{Error, Result};

use super::check_finite;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One step with learning rate `lr`.
    pub fn step(&mut self, theta: &mut [f64], g: &[f64], lr: f64) -> Result<()> {
        check_len(self.m.len(), theta.len())?;
        check_len(self.m.len(), g.len())?;
        check_finite(g)?;
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adagrad {
    pub eta: f64,
    pub eps: f64,
    v: Vec<f64>,
}

impl Adagrad {
    pub fn new(dim: usize, eta: f64, eps: f64) -> Self {
        Adagrad {
            eta,
            eps,
            v: vec![0.0; dim],
        }
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.v
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) -> Result<()> {
        check_len(self.v.len(), theta.len())?;
        check_len(self.v.len(), g.len())?;
        check_finite(g)?;
        for i in 0..theta.len() {
            self.v[i] += g[i] * g[i];
            let denom = self.v[i].sqrt() + self.eps;
            if denom > 0.0 {
                theta[i] -= self.eta * g[i] / denom;
            }
        }
        Ok(())
    }
}

/// Nesterov's accelerated gradient in the form used by most deep-learning
/// libraries: `b ← μ b + g`, `θ ← θ − η (g + μ b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nag {
    pub eta: f64,
    pub mu: f64,
    buf: Vec<f64>,
}

impl Nag {
    pub fn new(dim: usize, eta: f64, mu: f64) -> Self {
        Nag {
            eta,
            mu,
            buf: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) -> Result<()> {
        check_len(self.buf.len(), theta.len())?;
        check_len(self.buf.len(), g.len())?;
        check_finite(g)?;
        for i in 0..theta.len() {
            self.buf[i] = self.mu * self.buf[i] + g[i];
            theta[i] -= self.eta * (g[i] + self.mu * self.buf[i]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nag_without_momentum_is_sgd() {
        let mut nag = Nag::new(2, 0.1, 0.0);
        let mut theta = vec![1.0, 2.0];
        nag.step(&mut theta, &[0.5, -1.0]).unwrap();
        assert_eq!(theta, vec![1.0 - 0.05, 2.0 + 0.1]);
        nag.step(&mut theta, &[0.5, -1.0]).unwrap();
        assert!((theta[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn nag_momentum_accumulates() {
        let mut nag = Nag::new(1, 1.0, 0.5);
        let mut theta = vec![0.0];
        nag.step(&mut theta, &[1.0]).unwrap();
        // b = 1, step = 1 + 0.5
        assert_eq!(theta[0], -1.5);
        nag.step(&mut theta, &[1.0]).unwrap();
        // b = 1.5, step = 1 + 0.75
        assert_eq!(theta[0], -3.25);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut adam = Adam::new(3, 0.9, 0.999, 0.0);
        let mut theta = vec![0.0; 3];
        adam.step(&mut theta, &[2.0, -0.5, 1e-3], 0.1).unwrap();
        for (th, s) in theta.iter().zip([-0.1, 0.1, -0.1]) {
            assert!((th - s).abs() < 1e-12);
        }
    }

    #[test]
    fn adagrad_first_step() {
        let mut a = Adagrad::new(2, 1.0, 0.0);
        let mut theta = vec![0.0, 0.0];
        a.step(&mut theta, &[3.0, 0.0]).unwrap();
        assert_eq!(theta, vec![-1.0, 0.0]);
        assert!(a.step(&mut theta, &[f64::NAN, 0.0]).is_err());
    }
}
