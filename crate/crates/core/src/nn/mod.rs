//! Small differentiable building blocks with hand-written gradients.
//!
//! Batches are row-major: one row per sample or token.

mod adam;
mod attention;
mod checkpoint;
mod dense;

pub use adam::{Adam, AdamConfig};
pub use attention::{AttentionCache, MultiHeadAttention};
pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT};
pub use dense::{Dense, Mlp, MlpCache};

use crate::error::{Error, Result};

/// Named view of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Anything holding trainable tensors.
///
/// Gradients are stored in a value of the same type, so `tensors` and
/// `tensors_mut` must list tensors in the same order.
pub trait Parameters {
    fn tensors(&self) -> Vec<Tensor<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.tensors_mut().iter().map(|t| t.len()).sum();
        if total != values.len() {
            return Err(Error::Shape(format!("expected {total} values, got {}", values.len())));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let src: Vec<Vec<f64>> = other.tensors().iter().map(|t| t.data.to_vec()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn prefixed<'a>(prefix: &str, tensors: Vec<Tensor<'a>>) -> Vec<Tensor<'a>> {
    tensors.into_iter().map(|t| Tensor { name: format!("{prefix}.{}", t.name), ..t }).collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - peak).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradient of a loss with respect to softmax inputs, given the softmax output.
pub fn softmax_backward(probs: &[f64], upstream: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(upstream).map(|(p, u)| p * u).sum();
    probs.iter().zip(upstream).map(|(p, u)| p * (u - dot)).collect()
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!("mse over {} predictions and {} targets", pred.len(), target.len())));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn softmax_singleton_and_symmetry() {
        assert_eq!(softmax(&[3.7]), vec![1.0]);
        assert_eq!(softmax(&[2.0, 2.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_gradient_matches_finite_difference() {
        let z = [0.3, -1.2, 0.8, 0.05];
        let u = [1.0, -0.5, 2.0, 0.25];
        let loss = |z: &[f64]| softmax(z).iter().zip(&u).map(|(p, u)| p * u).sum::<f64>();
        let analytic = softmax_backward(&softmax(&z), &u);
        for k in 0..z.len() {
            let h = 1e-6;
            let (mut zp, mut zm) = (z, z);
            zp[k] += h;
            zm[k] -= h;
            let numeric = (loss(&zp) - loss(&zm)) / (2.0 * h);
            assert_abs_diff_eq!(analytic[k], numeric, epsilon = 1e-8);
        }
    }

    #[test]
    fn mse_examples() {
        let (loss, grad) = mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
        let (loss, _) = mse(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(loss, 0.25, epsilon = 1e-15);
        let pred = [0.2, -1.0, 3.0];
        let target = [1.0, 0.5, 2.0];
        let direct = ((0.2f64 - 1.0).powi(2) + (-1.0f64 - 0.5).powi(2) + 1.0) / 3.0;
        assert_abs_diff_eq!(mse(&pred, &target).unwrap().0, direct, epsilon = 1e-15);
        assert!(mse(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one_and_shift_invariant(z in prop::collection::vec(-30.0f64..30.0, 1..12), c in -50.0f64..50.0) {
            let p = softmax(&z);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
