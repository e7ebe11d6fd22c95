//! ADAM with bias correction, plus global gradient-norm rescaling.

use super::{sc, Scalar};
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

pub struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1 = sc::<T>(self.beta1);
        let b2 = sc::<T>(self.beta2);
        let one = T::one();
        let corr1 = sc::<T>(1.0 - self.beta1.powi(self.t as i32));
        let corr2 = sc::<T>(1.0 - self.beta2.powi(self.t as i32));
        let lr = sc::<T>(lr);
        let eps = sc::<T>(self.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Rescales `grads` to `max_norm` if its global L2 norm exceeds it; returns
/// the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(grads: &mut [T], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = sc::<T>(max_norm / norm);
        for g in grads.iter_mut() {
            *g = *g * scale;
        }
    }
    norm
}

pub fn global_norm<T: Scalar>(grads: &[T]) -> f64 {
    grads
        .iter()
        .map(|g| {
            let x = g.to_f64().unwrap();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_is_lr_sized() {
        // With bias correction the very first update is ~lr * sign(g).
        let mut params = vec![0.0f64; 3];
        let grads = vec![0.5, -2.0, 1e-3];
        let mut opt = Adam::new(3);
        opt.step(&mut params, &grads, 0.01);
        for (p, g) in params.iter().zip(&grads) {
            assert!((p.abs() - 0.01).abs() < 1e-4, "step {p} for grad {g}");
            assert_eq!(p.signum(), -g.signum());
        }
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut params = vec![3.0f64, -4.0];
        let mut opt = Adam::new(2);
        for _ in 0..4000 {
            let grads: Vec<f64> = params.iter().map(|&p| 2.0 * p).collect();
            opt.step(&mut params, &grads, 0.01);
        }
        assert!(params.iter().all(|p| p.abs() < 1e-3), "{params:?}");
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut g = vec![3.0f64, 4.0];
        let norm = clip_global_norm(&mut g, 10.0);
        assert_eq!(norm, 5.0);
        assert_eq!(g, vec![3.0, 4.0]);
        let norm = clip_global_norm(&mut g, 1.0);
        assert_eq!(norm, 5.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-12);
    }
}
