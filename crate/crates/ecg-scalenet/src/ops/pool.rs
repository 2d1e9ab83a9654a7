//! Max pooling and global average pooling over the temporal axis.
//!
//! Max pooling treats padding positions as absent (equivalent to padding
//! with negative infinity), so a padded window never selects a pad slot.
//! Kernel size 1 with stride 2 degenerates to plain subsampling; the
//! residual shortcuts use exactly that, which keeps shortcut lengths equal
//! to the stride-2 conv lengths on odd inputs.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Same floor formula as the convolution.
pub fn maxpool1d_output_len(length: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = length + 2 * padding;
    if padded < kernel {
        return Err(Error::InvalidInput(format!(
            "pool kernel {kernel} larger than padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Argmax positions (flat indices into the input) cached for backward.
#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    pub argmax: Vec<usize>,
    pub input_shape: [usize; 3],
}

pub fn maxpool1d_forward(
    x: &Tensor,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, MaxPoolCache)> {
    if padding >= kernel {
        // a window lying entirely in padding would have no value to take
        return Err(Error::InvalidConfig(format!(
            "pool padding {padding} must be smaller than kernel {kernel}"
        )));
    }
    let (batch, channels, length) = (x.dim(0), x.dim(1), x.dim(2));
    let out_len = maxpool1d_output_len(length, kernel, stride, padding)?;
    let mut out = Tensor::zeros(&[batch, channels, out_len]);
    let mut argmax = vec![0usize; batch * channels * out_len];
    let xs = x.data();

    for b in 0..batch {
        for c in 0..channels {
            let base = (b * channels + c) * length;
            let row = &xs[base..base + length];
            let obase = (b * channels + c) * out_len;
            for t in 0..out_len {
                // window covers [t*stride - padding, t*stride - padding + kernel)
                let win_lo = (t * stride) as isize - padding as isize;
                let lo = win_lo.max(0) as usize;
                let hi = ((win_lo + kernel as isize).min(length as isize)) as usize;
                debug_assert!(lo < hi, "window fully in padding");
                let mut best = row[lo];
                let mut best_i = lo;
                for (i, v) in row[lo..hi].iter().enumerate() {
                    if *v > best {
                        best = *v;
                        best_i = lo + i;
                    }
                }
                out.data_mut()[obase + t] = best;
                argmax[obase + t] = base + best_i;
            }
        }
    }
    let cache = MaxPoolCache { argmax, input_shape: [batch, channels, length] };
    Ok((out, cache))
}

/// Routes each output gradient to the input position that won the max.
/// Ties were broken toward the earliest position in the forward pass.
pub fn maxpool1d_backward(grad_out: &Tensor, cache: &MaxPoolCache) -> Result<Tensor> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::ShapeMismatch {
            op: "maxpool1d_backward",
            axis: "grad_out",
            expected: cache.argmax.len(),
            actual: grad_out.len(),
        });
    }
    let mut grad_x = Tensor::zeros(&cache.input_shape);
    let gx = grad_x.data_mut();
    for (g, &src) in grad_out.data().iter().zip(&cache.argmax) {
        gx[src] += g;
    }
    Ok(grad_x)
}

/// Mean over the temporal axis: `[b, c, L] -> [b, c]`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(Error::InvalidInput(format!("GAP expects rank-3 input, got rank {}", x.rank())));
    }
    let (batch, channels, length) = (x.dim(0), x.dim(1), x.dim(2));
    let mut out = Tensor::zeros(&[batch, channels]);
    let xs = x.data();
    for b in 0..batch {
        for c in 0..channels {
            let row = &xs[(b * channels + c) * length..][..length];
            out.data_mut()[b * channels + c] = row.iter().sum::<f64>() / length as f64;
        }
    }
    Ok(out)
}

pub fn global_avg_pool_backward(grad_out: &Tensor, length: usize) -> Result<Tensor> {
    let (batch, channels) = (grad_out.dim(0), grad_out.dim(1));
    let mut grad_x = Tensor::zeros(&[batch, channels, length]);
    let scale = 1.0 / length as f64;
    for b in 0..batch {
        for c in 0..channels {
            let g = grad_out.data()[b * channels + c] * scale;
            let row = &mut grad_x.data_mut()[(b * channels + c) * length..][..length];
            row.fill(g);
        }
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::gradcheck::{max_rel_error, numeric_gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gap_of_small_row_is_arithmetic_mean() {
        let x = Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let y = global_avg_pool(&x).unwrap();
        assert_eq!(y.data(), [2.0]);
    }

    #[test]
    fn maxpool_kernel3_stride2_matches_hand_result() {
        let x = Tensor::new(vec![1, 1, 6], vec![1.0, 5.0, 2.0, 4.0, 3.0, 0.0]).unwrap();
        let (y, _) = maxpool1d_forward(&x, 3, 2, 1).unwrap();
        // windows (pad 1): [_,1,5], [5,2,4], [4,3,0]
        assert_eq!(y.data(), [5.0, 5.0, 4.0]);
        assert_eq!(y.dim(2), 3);
    }

    #[test]
    fn subsample_pool_takes_every_other_sample() {
        let x = Tensor::new(vec![1, 1, 5], vec![9.0, 1.0, 7.0, 2.0, 5.0]).unwrap();
        let (y, _) = maxpool1d_forward(&x, 1, 2, 0).unwrap();
        assert_eq!(y.data(), [9.0, 7.0, 5.0]);
    }

    #[test]
    fn oversized_kernel_is_an_error() {
        let x = Tensor::zeros(&[1, 1, 2]);
        assert!(maxpool1d_forward(&x, 5, 2, 1).is_err());
    }

    #[test]
    fn padding_never_wins_the_max() {
        // all-negative signal; with zero-padding the pads would win
        let x = Tensor::new(vec![1, 1, 4], vec![-3.0, -1.0, -2.0, -4.0]).unwrap();
        let (y, _) = maxpool1d_forward(&x, 3, 2, 1).unwrap();
        assert_eq!(y.data(), [-1.0, -1.0]);
    }

    #[test]
    fn backward_routes_to_argmax_only() {
        let x = Tensor::new(vec![1, 1, 4], vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let (_, cache) = maxpool1d_forward(&x, 2, 2, 0).unwrap();
        let g = Tensor::new(vec![1, 1, 2], vec![10.0, 20.0]).unwrap();
        let gx = maxpool1d_backward(&g, &cache).unwrap();
        assert_eq!(gx.data(), [0.0, 10.0, 20.0, 0.0]);
    }

    #[test]
    fn maxpool_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Tensor::randn(&[2, 2, 9], 1.0, &mut rng);
        let probe = Tensor::randn(&[2, 2, 5], 1.0, &mut rng);
        let loss = |xd: &[f64]| {
            let xt = Tensor::new(vec![2, 2, 9], xd.to_vec()).unwrap();
            let (y, _) = maxpool1d_forward(&xt, 3, 2, 1).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = maxpool1d_forward(&x, 3, 2, 1).unwrap();
        let gx = maxpool1d_backward(&probe, &cache).unwrap();
        let nx = numeric_gradient(loss, x.data(), 1e-6);
        assert!(max_rel_error(gx.data(), &nx) < 1e-6);
    }

    #[test]
    fn gap_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let x = Tensor::randn(&[2, 3, 7], 1.0, &mut rng);
        let probe = Tensor::randn(&[2, 3], 1.0, &mut rng);
        let loss = |xd: &[f64]| {
            let xt = Tensor::new(vec![2, 3, 7], xd.to_vec()).unwrap();
            let y = global_avg_pool(&xt).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let gx = global_avg_pool_backward(&probe, 7).unwrap();
        let nx = numeric_gradient(loss, x.data(), 1e-6);
        assert!(max_rel_error(gx.data(), &nx) < 1e-6);
    }
}
