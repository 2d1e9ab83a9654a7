//! Batch normalization over the channel axis of `[batch, channels, length]`.
//!
//! Training mode normalizes with batch statistics (biased variance) and
//! updates the running estimates by exponential moving average; inference
//! mode normalizes with the running estimates. Running-stat updates mutate
//! the state and must be externally serialized per model instance.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Training,
    Inference,
}

/// Learnable affine + running statistics for one batch-norm layer.
#[derive(Debug, Clone)]
pub struct BatchNormState {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormState {
    /// Canonical init: gamma 1, beta 0, running mean 0, running var 1.
    pub fn new(channels: usize, momentum: f64, epsilon: f64) -> Result<Self> {
        if !(0.0 < momentum && momentum < 1.0) {
            return Err(Error::InvalidConfig(format!("BN momentum must be in (0,1), got {momentum}")));
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!("BN epsilon must be positive, got {epsilon}")));
        }
        Ok(BatchNormState {
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            momentum,
            epsilon,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Values cached by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    /// Normalized activations (before gamma/beta).
    pub x_hat: Tensor,
    /// Per-channel `1 / sqrt(var + eps)` used for normalization.
    pub inv_std: Vec<f64>,
    /// Gamma at forward time.
    pub gamma: Vec<f64>,
    /// Elements per channel (batch * length).
    pub per_channel: usize,
    pub mode: BnMode,
}

/// Forward pass. In training mode the running stats in `state` are updated.
pub fn batchnorm_forward(x: &Tensor, state: &mut BatchNormState, mode: BnMode) -> Result<(Tensor, BatchNormCache)> {
    let (batch, channels, length) = (x.dim(0), x.dim(1), x.dim(2));
    if channels != state.channels() {
        return Err(Error::ShapeMismatch {
            op: "batchnorm_forward",
            axis: "channels",
            expected: state.channels(),
            actual: channels,
        });
    }
    let per_channel = batch * length;
    if mode == BnMode::Training && per_channel < 2 {
        return Err(Error::DegenerateVariance { channel: 0, count: per_channel });
    }

    let mut out = Tensor::zeros(&[batch, channels, length]);
    let mut x_hat = Tensor::zeros(&[batch, channels, length]);
    let mut inv_std = vec![0.0; channels];
    let xs = x.data();

    for c in 0..channels {
        let (mean, var) = match mode {
            BnMode::Training => {
                let mut sum = 0.0;
                let mut sq = 0.0;
                for b in 0..batch {
                    let row = &xs[(b * channels + c) * length..][..length];
                    for v in row {
                        sum += v;
                        sq += v * v;
                    }
                }
                let n = per_channel as f64;
                let mean = sum / n;
                let var = (sq / n - mean * mean).max(0.0);
                // Biased variance normalizes the batch; the running estimate
                // follows the usual unbiased convention.
                let unbiased = if per_channel > 1 { var * n / (n - 1.0) } else { var };
                let m = state.momentum;
                state.running_mean.data_mut()[c] =
                    (1.0 - m) * state.running_mean.data()[c] + m * mean;
                state.running_var.data_mut()[c] =
                    (1.0 - m) * state.running_var.data()[c] + m * unbiased;
                (mean, var)
            }
            BnMode::Inference => (state.running_mean.data()[c], state.running_var.data()[c]),
        };
        if var + state.epsilon <= 0.0 {
            return Err(Error::DegenerateVariance { channel: c, count: per_channel });
        }
        let istd = 1.0 / (var + state.epsilon).sqrt();
        inv_std[c] = istd;
        let g = state.gamma.data()[c];
        let be = state.beta.data()[c];
        for b in 0..batch {
            let base = (b * channels + c) * length;
            let row = &xs[base..base + length];
            let xh = &mut x_hat.data_mut()[base..base + length];
            for (dst, v) in xh.iter_mut().zip(row) {
                *dst = (v - mean) * istd;
            }
            let orow = &mut out.data_mut()[base..base + length];
            let xh = &x_hat.data()[base..base + length];
            for (dst, h) in orow.iter_mut().zip(xh) {
                *dst = g * h + be;
            }
        }
    }

    let cache = BatchNormCache {
        x_hat,
        inv_std,
        gamma: state.gamma.data().to_vec(),
        per_channel,
        mode,
    };
    Ok((out, cache))
}

/// Backward pass; returns `(grad_x, grad_gamma, grad_beta)`.
///
/// Training mode accounts for the dependency of the batch statistics on the
/// input; inference mode treats mean/var as constants.
pub fn batchnorm_backward(grad_out: &Tensor, cache: &BatchNormCache) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, channels, length) = (grad_out.dim(0), grad_out.dim(1), grad_out.dim(2));
    if cache.x_hat.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch {
            op: "batchnorm_backward",
            axis: "grad_out",
            expected: cache.x_hat.len(),
            actual: grad_out.len(),
        });
    }
    let mut grad_x = Tensor::zeros(&[batch, channels, length]);
    let mut grad_gamma = Tensor::zeros(&[channels]);
    let mut grad_beta = Tensor::zeros(&[channels]);

    let gs = grad_out.data();
    let xh = cache.x_hat.data();
    let n = cache.per_channel as f64;

    for c in 0..channels {
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for b in 0..batch {
            let base = (b * channels + c) * length;
            for t in 0..length {
                let g = gs[base + t];
                sum_g += g;
                sum_gx += g * xh[base + t];
            }
        }
        grad_gamma.data_mut()[c] = sum_gx;
        grad_beta.data_mut()[c] = sum_g;

        let gamma = cache.gamma[c];
        let istd = cache.inv_std[c];
        match cache.mode {
            BnMode::Training => {
                let mean_g = sum_g / n;
                let mean_gx = sum_gx / n;
                for b in 0..batch {
                    let base = (b * channels + c) * length;
                    let gx_row = &mut grad_x.data_mut()[base..base + length];
                    for (t, dst) in gx_row.iter_mut().enumerate() {
                        let g = gs[base + t];
                        *dst = gamma * istd * (g - mean_g - xh[base + t] * mean_gx);
                    }
                }
            }
            BnMode::Inference => {
                for b in 0..batch {
                    let base = (b * channels + c) * length;
                    let gx_row = &mut grad_x.data_mut()[base..base + length];
                    for (t, dst) in gx_row.iter_mut().enumerate() {
                        *dst = gamma * istd * gs[base + t];
                    }
                }
            }
        }
    }
    Ok((grad_x, grad_gamma, grad_beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::gradcheck::{max_rel_error, numeric_gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalizes_two_values_to_unit_spread() {
        // channel values {1,3}: mean 2, std 1 -> {-1, +1}
        let x = Tensor::new(vec![2, 1, 1], vec![1.0, 3.0]).unwrap();
        let mut s = BatchNormState::new(1, 0.1, 1e-12).unwrap();
        let (y, _) = batchnorm_forward(&x, &mut s, BnMode::Training).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-6);
        assert!((y.data()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn affine_rescale_applies_after_normalization() {
        let x = Tensor::new(vec![2, 1, 1], vec![1.0, 3.0]).unwrap();
        let mut s = BatchNormState::new(1, 0.1, 1e-12).unwrap();
        s.gamma.data_mut()[0] = 2.0;
        s.beta.data_mut()[0] = 5.0;
        let (y, _) = batchnorm_forward(&x, &mut s, BnMode::Training).unwrap();
        assert!((y.data()[0] - 3.0).abs() < 1e-6);
        assert!((y.data()[1] - 7.0).abs() < 1e-6);
    }

    #[test]
    fn training_output_mean_is_beta_and_var_is_gamma_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Tensor::randn(&[4, 3, 25], 2.0, &mut rng);
        let mut s = BatchNormState::new(3, 0.1, 1e-12).unwrap();
        s.gamma.data_mut().copy_from_slice(&[1.5, 0.5, 2.0]);
        s.beta.data_mut().copy_from_slice(&[0.25, -1.0, 3.0]);
        let (y, _) = batchnorm_forward(&x, &mut s, BnMode::Training).unwrap();
        for c in 0..3 {
            let mut vals = Vec::new();
            for b in 0..4 {
                for t in 0..25 {
                    vals.push(y.data()[y.idx3(b, c, t)]);
                }
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!((mean - s.beta.data()[c]).abs() < 1e-9, "mean != beta");
            let g2 = s.gamma.data()[c] * s.gamma.data()[c];
            assert!((var - g2).abs() < 1e-6, "var != gamma^2");
        }
    }

    #[test]
    fn degenerate_batch_rejected_in_training() {
        let x = Tensor::new(vec![1, 2, 1], vec![1.0, 2.0]).unwrap();
        let mut s = BatchNormState::new(2, 0.1, 1e-5).unwrap();
        let err = batchnorm_forward(&x, &mut s, BnMode::Training).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance { .. }));
        // inference mode is fine with a single value
        assert!(batchnorm_forward(&x, &mut s, BnMode::Inference).is_ok());
    }

    #[test]
    fn running_stats_follow_ema() {
        let x = Tensor::new(vec![2, 1, 2], vec![1.0, 1.0, 3.0, 3.0]).unwrap();
        let mut s = BatchNormState::new(1, 0.1, 1e-5).unwrap();
        batchnorm_forward(&x, &mut s, BnMode::Training).unwrap();
        // batch mean 2, unbiased var 4/3
        assert!((s.running_mean.data()[0] - 0.2).abs() < 1e-12);
        assert!((s.running_var.data()[0] - (0.9 + 0.1 * 4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn grad_beta_is_sum_of_grad_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = Tensor::randn(&[2, 2, 5], 1.0, &mut rng);
        let g = Tensor::randn(&[2, 2, 5], 1.0, &mut rng);
        let mut s = BatchNormState::new(2, 0.1, 1e-5).unwrap();
        let (_, cache) = batchnorm_forward(&x, &mut s, BnMode::Training).unwrap();
        let (_, _, gb) = batchnorm_backward(&g, &cache).unwrap();
        for c in 0..2 {
            let mut sum = 0.0;
            for b in 0..2 {
                for t in 0..5 {
                    sum += g.data()[g.idx3(b, c, t)];
                }
            }
            assert!((gb.data()[c] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let x = Tensor::filled(&[2, 1, 3], 0.7);
        let mut s = BatchNormState::new(1, 0.1, 1e-5).unwrap();
        let (_, cache) = batchnorm_forward(&x, &mut s, BnMode::Training).unwrap();
        let g = Tensor::zeros(&[2, 1, 3]);
        let (gx, gg, gb) = batchnorm_backward(&g, &cache).unwrap();
        assert!(gx.data().iter().all(|v| *v == 0.0));
        assert!(gg.data().iter().all(|v| *v == 0.0));
        assert!(gb.data().iter().all(|v| *v == 0.0));
    }

    /// Finite-difference oracle over input, gamma, and beta in training mode.
    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let x = Tensor::randn(&[3, 2, 4], 1.0, &mut rng);
        let probe = Tensor::randn(&[3, 2, 4], 1.0, &mut rng);
        let gamma0 = vec![1.3, 0.8];
        let beta0 = vec![0.2, -0.4];

        let loss = |xd: &[f64], gd: &[f64], bd: &[f64]| {
            let xt = Tensor::new(vec![3, 2, 4], xd.to_vec()).unwrap();
            let mut s = BatchNormState::new(2, 0.1, 1e-5).unwrap();
            s.gamma.data_mut().copy_from_slice(gd);
            s.beta.data_mut().copy_from_slice(bd);
            let (y, _) = batchnorm_forward(&xt, &mut s, BnMode::Training).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum::<f64>()
        };

        let mut s = BatchNormState::new(2, 0.1, 1e-5).unwrap();
        s.gamma.data_mut().copy_from_slice(&gamma0);
        s.beta.data_mut().copy_from_slice(&beta0);
        let (_, cache) = batchnorm_forward(&x, &mut s, BnMode::Training).unwrap();
        let (gx, gg, gb) = batchnorm_backward(&probe, &cache).unwrap();

        let nx = numeric_gradient(|v| loss(v, &gamma0, &beta0), x.data(), 1e-5);
        assert!(max_rel_error(gx.data(), &nx) < 1e-6, "grad_x: {}", max_rel_error(gx.data(), &nx));
        let ng = numeric_gradient(|v| loss(x.data(), v, &beta0), &gamma0, 1e-5);
        assert!(max_rel_error(gg.data(), &ng) < 1e-6);
        let nb = numeric_gradient(|v| loss(x.data(), &gamma0, v), &beta0, 1e-5);
        assert!(max_rel_error(gb.data(), &nb) < 1e-6);
    }
}
