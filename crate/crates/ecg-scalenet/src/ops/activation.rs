//! Elementwise activations.

use crate::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Gradient passes only where the forward input was strictly positive.
pub fn relu_backward(grad_out: &Tensor, x: &Tensor) -> Tensor {
    debug_assert_eq!(grad_out.shape(), x.shape());
    let mut grad = grad_out.clone();
    for (g, v) in grad.data_mut().iter_mut().zip(x.data()) {
        if *v <= 0.0 {
            *g = 0.0;
        }
    }
    grad
}

/// Numerically stable logistic function, elementwise.
pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = stable_sigmoid(*v);
    }
    out
}

#[inline]
pub(crate) fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::from_slice_1d(&[-1.0, 0.0, 2.0]);
        assert_eq!(relu_forward(&x).data(), [0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_backward_masks_nonpositive_inputs() {
        let x = Tensor::from_slice_1d(&[-1.0, 0.0, 2.0]);
        let g = Tensor::from_slice_1d(&[5.0, 5.0, 5.0]);
        assert_eq!(relu_backward(&g, &x).data(), [0.0, 0.0, 5.0]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        let x = Tensor::from_slice_1d(&[-800.0, 0.0, 800.0]);
        let y = sigmoid(&x);
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(y.data()[1], 0.5);
        assert_eq!(y.data()[2], 1.0);
        assert!(y.check_finite("sigmoid").is_ok());
    }
}
