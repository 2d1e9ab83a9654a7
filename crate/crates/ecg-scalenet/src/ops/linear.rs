//! Fully connected layer: `y = x W + b`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct LinearParams {
    /// `[in_features, out_features]`
    pub weights: Tensor,
    /// `[out_features]`
    pub bias: Tensor,
}

impl LinearParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.rank() != 2 || bias.rank() != 1 || weights.dim(1) != bias.dim(0) {
            return Err(Error::ShapeMismatch {
                op: "LinearParams::new",
                axis: "out_features",
                expected: weights.dim(weights.rank() - 1),
                actual: bias.len(),
            });
        }
        Ok(LinearParams { weights, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn out_features(&self) -> usize {
        self.weights.dim(1)
    }
}

pub fn linear_forward(x: &Tensor, p: &LinearParams) -> Result<Tensor> {
    let (batch, features) = (x.dim(0), x.dim(1));
    if features != p.in_features() {
        return Err(Error::ShapeMismatch {
            op: "linear_forward",
            axis: "in_features",
            expected: p.in_features(),
            actual: features,
        });
    }
    let out_f = p.out_features();
    let mut out = Tensor::zeros(&[batch, out_f]);
    let ws = p.weights.data();
    let xs = x.data();
    for b in 0..batch {
        let x_row = &xs[b * features..][..features];
        let o_row = &mut out.data_mut()[b * out_f..][..out_f];
        o_row.copy_from_slice(p.bias.data());
        for (i, xv) in x_row.iter().enumerate() {
            let w_row = &ws[i * out_f..][..out_f];
            for (o, w) in o_row.iter_mut().zip(w_row) {
                *o += xv * w;
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_x, grad_w, grad_b)`.
pub fn linear_backward(grad_out: &Tensor, x: &Tensor, p: &LinearParams) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, features) = (x.dim(0), x.dim(1));
    let out_f = p.out_features();
    if grad_out.shape() != [batch, out_f] {
        return Err(Error::ShapeMismatch {
            op: "linear_backward",
            axis: "grad_out",
            expected: batch * out_f,
            actual: grad_out.len(),
        });
    }
    let mut grad_x = Tensor::zeros(&[batch, features]);
    let mut grad_w = Tensor::zeros(&[features, out_f]);
    let mut grad_b = Tensor::zeros(&[out_f]);

    let ws = p.weights.data();
    let xs = x.data();
    let gs = grad_out.data();
    for b in 0..batch {
        let g_row = &gs[b * out_f..][..out_f];
        let x_row = &xs[b * features..][..features];
        let gx_row = &mut grad_x.data_mut()[b * features..][..features];
        for (i, gx) in gx_row.iter_mut().enumerate() {
            let w_row = &ws[i * out_f..][..out_f];
            *gx = w_row.iter().zip(g_row).map(|(w, g)| w * g).sum();
        }
        for (i, xv) in x_row.iter().enumerate() {
            let gw_row = &mut grad_w.data_mut()[i * out_f..][..out_f];
            for (gw, g) in gw_row.iter_mut().zip(g_row) {
                *gw += xv * g;
            }
        }
        for (gb, g) in grad_b.data_mut().iter_mut().zip(g_row) {
            *gb += g;
        }
    }
    Ok((grad_x, grad_w, grad_b))
}
