//! Task losses on readout sequences, with burn-in masking.
//!
//! Conventions (pinned here and relied on by the tests): softmax-summed
//! class scores are treated as logits of the final cross-entropy; losses sum
//! over time and average over the batch (the batch average happens in the
//! training loop); burn-in steps contribute neither loss nor gradient.

use super::{sc, Scalar};
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossKind {
    /// Cross entropy of the time-summed per-step softmax against one class.
    SumSoftmaxCe,
    /// Cross entropy of the softmax of time-summed outputs against one class.
    SoftmaxSumCe,
    /// Per-step cross entropy against a per-step class sequence.
    PerStepCe,
    /// Mean squared error against a dense target sequence.
    Mse,
}

/// Number of leading steps excluded from the loss.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BurnIn {
    Steps(usize),
    Fraction(f64),
}

impl BurnIn {
    pub fn resolve(&self, t_steps: usize) -> usize {
        match *self {
            BurnIn::Steps(n) => n.min(t_steps),
            BurnIn::Fraction(f) => ((t_steps as f64 * f) as usize).min(t_steps),
        }
    }
}

/// Classification or regression target.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a, T> {
    Class(usize),
    ClassPerStep(&'a [usize]),
    Dense(&'a [T]),
}

fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = (z - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

/// Loss value and gradient with respect to the outputs (`t_steps x classes`).
pub fn loss_and_grad<T: Scalar>(
    outputs: &[T],
    n_out: usize,
    target: Target<'_, T>,
    kind: LossKind,
    burn_in: BurnIn,
) -> (f64, Vec<T>) {
    let t_steps = outputs.len() / n_out;
    let skip = burn_in.resolve(t_steps);
    let mut grad = vec![T::zero(); outputs.len()];
    if skip >= t_steps {
        return (0.0, grad);
    }
    match (kind, target) {
        (LossKind::SumSoftmaxCe, Target::Class(c)) => {
            assert!(c < n_out, "label out of range");
            let mut z = vec![T::zero(); n_out];
            let mut s = vec![T::zero(); n_out];
            let mut per_step: Vec<T> = Vec::with_capacity((t_steps - skip) * n_out);
            for k in skip..t_steps {
                softmax_into(&outputs[k * n_out..(k + 1) * n_out], &mut s);
                for (zi, &si) in z.iter_mut().zip(&s) {
                    *zi += si;
                }
                per_step.extend_from_slice(&s);
            }
            let mut p = vec![T::zero(); n_out];
            softmax_into(&z, &mut p);
            let loss = -(p[c].to_f64().unwrap().max(1e-300)).ln();
            // dL/dz, then back through each step's softmax Jacobian.
            let mut gz = p;
            gz[c] -= T::one();
            for (idx, k) in (skip..t_steps).enumerate() {
                let s_k = &per_step[idx * n_out..(idx + 1) * n_out];
                let weighted: T = s_k.iter().zip(&gz).map(|(&si, &gi)| si * gi).fold(T::zero(), |a, b| a + b);
                for c2 in 0..n_out {
                    grad[k * n_out + c2] = s_k[c2] * (gz[c2] - weighted);
                }
            }
            (loss, grad)
        }
        (LossKind::SoftmaxSumCe, Target::Class(c)) => {
            assert!(c < n_out, "label out of range");
            let mut z = vec![T::zero(); n_out];
            for k in skip..t_steps {
                for (zi, &yi) in z.iter_mut().zip(&outputs[k * n_out..(k + 1) * n_out]) {
                    *zi += yi;
                }
            }
            let mut p = vec![T::zero(); n_out];
            softmax_into(&z, &mut p);
            let loss = -(p[c].to_f64().unwrap().max(1e-300)).ln();
            let mut gz = p;
            gz[c] -= T::one();
            for k in skip..t_steps {
                grad[k * n_out..(k + 1) * n_out].copy_from_slice(&gz);
            }
            (loss, grad)
        }
        (LossKind::PerStepCe, Target::ClassPerStep(labels)) => {
            assert_eq!(labels.len(), t_steps);
            let mut p = vec![T::zero(); n_out];
            let mut loss = 0.0;
            for k in skip..t_steps {
                let c = labels[k];
                assert!(c < n_out, "label out of range");
                softmax_into(&outputs[k * n_out..(k + 1) * n_out], &mut p);
                loss -= p[c].to_f64().unwrap().max(1e-300).ln();
                let g = &mut grad[k * n_out..(k + 1) * n_out];
                g.copy_from_slice(&p);
                g[c] -= T::one();
            }
            (loss, grad)
        }
        (LossKind::Mse, Target::Dense(t)) => {
            assert_eq!(t.len(), outputs.len());
            let norm = ((t_steps - skip) * n_out) as f64;
            let scale = sc::<T>(2.0 / norm);
            let mut loss = 0.0;
            for k in skip..t_steps {
                for c in 0..n_out {
                    let e = outputs[k * n_out + c] - t[k * n_out + c];
                    loss += e.to_f64().unwrap().powi(2);
                    grad[k * n_out + c] = scale * e;
                }
            }
            (loss / norm, grad)
        }
        _ => panic!("loss kind and target shape do not match"),
    }
}

/// Class prediction by the aggregation matching the loss kind.
pub fn predict_class<T: Scalar>(outputs: &[T], n_out: usize, kind: LossKind, burn_in: BurnIn) -> usize {
    let t_steps = outputs.len() / n_out;
    let skip = burn_in.resolve(t_steps).min(t_steps.saturating_sub(1));
    let mut z = vec![T::zero(); n_out];
    match kind {
        LossKind::SoftmaxSumCe => {
            for k in skip..t_steps {
                for (zi, &yi) in z.iter_mut().zip(&outputs[k * n_out..(k + 1) * n_out]) {
                    *zi += yi;
                }
            }
        }
        _ => {
            let mut s = vec![T::zero(); n_out];
            for k in skip..t_steps {
                softmax_into(&outputs[k * n_out..(k + 1) * n_out], &mut s);
                for (zi, &si) in z.iter_mut().zip(&s) {
                    *zi += si;
                }
            }
        }
    }
    z.iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let outputs = vec![0.25f64; 10 * 4];
        let (loss, _) = loss_and_grad(&outputs, 4, Target::Class(1), LossKind::SumSoftmaxCe, BurnIn::Steps(0));
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        let (loss, _) = loss_and_grad(&outputs, 4, Target::Class(1), LossKind::SoftmaxSumCe, BurnIn::Steps(0));
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mse_zero_at_target() {
        let outputs = vec![1.0f64, 2.0, 3.0, 4.0];
        let (loss, grad) =
            loss_and_grad(&outputs, 2, Target::Dense(&outputs.clone()), LossKind::Mse, BurnIn::Steps(0));
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn full_burn_in_zeroes_everything() {
        let outputs = vec![0.3f64; 5 * 3];
        let (loss, grad) =
            loss_and_grad(&outputs, 3, Target::Class(0), LossKind::SumSoftmaxCe, BurnIn::Fraction(1.0));
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn burn_in_masks_gradient() {
        let outputs: Vec<f64> = (0..5 * 3).map(|i| (i as f64 * 0.7).sin()).collect();
        let (_, grad) =
            loss_and_grad(&outputs, 3, Target::Class(2), LossKind::SumSoftmaxCe, BurnIn::Fraction(0.8));
        assert!(grad[..4 * 3].iter().all(|&g| g == 0.0));
        assert!(grad[4 * 3..].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn per_step_ce_matches_manual() {
        let outputs = vec![2.0f64, 0.0, 0.0, 2.0];
        let labels = vec![0usize, 0];
        let (loss, grad) =
            loss_and_grad(&outputs, 2, Target::ClassPerStep(&labels), LossKind::PerStepCe, BurnIn::Steps(0));
        let p0 = (2.0f64).exp() / ((2.0f64).exp() + 1.0);
        let expected = -(p0.ln()) - ((1.0 - p0).ln());
        assert!((loss - expected).abs() < 1e-12);
        assert!((grad[0] - (p0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Central differences on every output coordinate, all CE variants.
        let t_steps = 6;
        let n_out = 3;
        let outputs: Vec<f64> = (0..t_steps * n_out).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let labels: Vec<usize> = (0..t_steps).map(|k| k % n_out).collect();
        let dense: Vec<f64> = (0..t_steps * n_out).map(|i| (i as f64 * 0.1).cos()).collect();
        let cases: Vec<(LossKind, Target<'_, f64>)> = vec![
            (LossKind::SumSoftmaxCe, Target::Class(1)),
            (LossKind::SoftmaxSumCe, Target::Class(2)),
            (LossKind::PerStepCe, Target::ClassPerStep(&labels)),
            (LossKind::Mse, Target::Dense(&dense)),
        ];
        for (kind, target) in cases {
            let (_, grad) = loss_and_grad(&outputs, n_out, target, kind, BurnIn::Steps(1));
            let h = 1e-6;
            for i in 0..outputs.len() {
                let mut plus = outputs.clone();
                plus[i] += h;
                let mut minus = outputs.clone();
                minus[i] -= h;
                let (lp, _) = loss_and_grad(&plus, n_out, target, kind, BurnIn::Steps(1));
                let (lm, _) = loss_and_grad(&minus, n_out, target, kind, BurnIn::Steps(1));
                let fd = (lp - lm) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "{kind:?} grad[{i}] = {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }
}
