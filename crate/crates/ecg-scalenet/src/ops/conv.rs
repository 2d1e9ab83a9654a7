//! 1D convolution (cross-correlation convention, no kernel flip).
//!
//! Layouts:
//! * input `x`: `[batch, in_channels, length]`
//! * weights: `[kernel, in_channels, out_channels]`
//! * output:  `[batch, out_channels, length_out]`
//!
//! Zero padding is implicit: out-of-range taps are skipped rather than
//! materialized, which is algebraically identical and keeps the inner loops
//! contiguous. Convolutions carry no bias; every conv in the architecture
//! is followed by batch normalization, which absorbs it.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Parameters of one convolution.
#[derive(Debug, Clone)]
pub struct ConvParams {
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[kernel_size, in_channels, out_channels]`
    pub weights: Tensor,
}

impl ConvParams {
    /// Validates the structural invariants (odd kernel, stride 1 or 2,
    /// weight shape matching the declared dimensions).
    pub fn new(
        kernel_size: usize,
        stride: usize,
        padding: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Tensor,
    ) -> Result<Self> {
        if kernel_size == 0 || kernel_size % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel_size must be odd and positive, got {kernel_size}"
            )));
        }
        if stride != 1 && stride != 2 {
            return Err(Error::InvalidConfig(format!("stride must be 1 or 2, got {stride}")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidConfig("channel counts must be positive".into()));
        }
        let expect = [kernel_size, in_channels, out_channels];
        if weights.shape() != expect {
            return Err(Error::ShapeMismatch {
                op: "ConvParams::new",
                axis: "weights",
                expected: expect.iter().product(),
                actual: weights.len(),
            });
        }
        Ok(ConvParams { kernel_size, stride, padding, in_channels, out_channels, weights })
    }

    pub fn weight_count(&self) -> usize {
        self.kernel_size * self.in_channels * self.out_channels
    }
}

/// `floor((length + 2*padding - kernel) / stride) + 1`
pub fn conv1d_output_len(length: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = length + 2 * padding;
    if padded < kernel {
        return Err(Error::InvalidInput(format!(
            "conv kernel {kernel} larger than padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// `[b, c, l] -> [b, l, c]` scratch transpose. The kernels below run
/// channels-last so the innermost loops sweep the contiguous channel axis,
/// which is what vectorizes when channel counts are large and temporal
/// lengths are short (the late residual blocks).
fn to_channels_last(x: &Tensor) -> Vec<f64> {
    let (batch, channels, length) = (x.dim(0), x.dim(1), x.dim(2));
    let xs = x.data();
    let mut out = vec![0.0; xs.len()];
    for b in 0..batch {
        for c in 0..channels {
            let row = &xs[(b * channels + c) * length..][..length];
            for (t, v) in row.iter().enumerate() {
                out[(b * length + t) * channels + c] = *v;
            }
        }
    }
    out
}

fn from_channels_last(buf: &[f64], batch: usize, channels: usize, length: usize) -> Tensor {
    let mut out = Tensor::zeros(&[batch, channels, length]);
    let os = out.data_mut();
    for b in 0..batch {
        for t in 0..length {
            let row = &buf[(b * length + t) * channels..][..channels];
            for (c, v) in row.iter().enumerate() {
                os[(b * channels + c) * length + t] = *v;
            }
        }
    }
    out
}

pub fn conv1d_forward(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(Error::InvalidInput(format!("conv1d expects rank-3 input, got rank {}", x.rank())));
    }
    let (batch, c_in, length) = (x.dim(0), x.dim(1), x.dim(2));
    if c_in != p.in_channels {
        return Err(Error::ShapeMismatch {
            op: "conv1d_forward",
            axis: "in_channels",
            expected: p.in_channels,
            actual: c_in,
        });
    }
    let out_len = conv1d_output_len(length, p.kernel_size, p.stride, p.padding)?;
    let c_out = p.out_channels;
    let xt = to_channels_last(x);
    let mut ot = vec![0.0; batch * out_len * c_out];
    let ws = p.weights.data();

    for b in 0..batch {
        for t in 0..out_len {
            let o_row = &mut ot[(b * out_len + t) * c_out..][..c_out];
            for k in 0..p.kernel_size {
                let src = (p.stride * t + k) as isize - p.padding as isize;
                if src < 0 || src >= length as isize {
                    continue; // zero padding
                }
                let x_row = &xt[(b * length + src as usize) * c_in..][..c_in];
                for (ci, xv) in x_row.iter().enumerate() {
                    if *xv == 0.0 {
                        continue;
                    }
                    let w_row = &ws[(k * c_in + ci) * c_out..][..c_out];
                    for (o, w) in o_row.iter_mut().zip(w_row) {
                        *o += xv * w;
                    }
                }
            }
        }
    }
    Ok(from_channels_last(&ot, batch, c_out, out_len))
}

/// Analytic gradients of [`conv1d_forward`].
///
/// Returns `(grad_x, grad_w)` for upstream gradient `grad_out`.
pub fn conv1d_backward(grad_out: &Tensor, x: &Tensor, p: &ConvParams) -> Result<(Tensor, Tensor)> {
    let (batch, c_in, length) = (x.dim(0), x.dim(1), x.dim(2));
    let out_len = conv1d_output_len(length, p.kernel_size, p.stride, p.padding)?;
    let c_out = p.out_channels;
    let expect = [batch, c_out, out_len];
    if grad_out.shape() != expect {
        return Err(Error::ShapeMismatch {
            op: "conv1d_backward",
            axis: "grad_out",
            expected: expect.iter().product(),
            actual: grad_out.len(),
        });
    }

    let xt = to_channels_last(x);
    let gt = to_channels_last(grad_out);
    let mut gxt = vec![0.0; batch * length * c_in];
    let mut grad_w = Tensor::zeros(&[p.kernel_size, c_in, c_out]);
    let ws = p.weights.data();
    let gw = grad_w.data_mut();

    for b in 0..batch {
        for t in 0..out_len {
            let g_row = &gt[(b * out_len + t) * c_out..][..c_out];
            for k in 0..p.kernel_size {
                let src = (p.stride * t + k) as isize - p.padding as isize;
                if src < 0 || src >= length as isize {
                    continue;
                }
                let x_row = &xt[(b * length + src as usize) * c_in..][..c_in];
                let gx_row = &mut gxt[(b * length + src as usize) * c_in..][..c_in];
                for ci in 0..c_in {
                    let w_row = &ws[(k * c_in + ci) * c_out..][..c_out];
                    let xv = x_row[ci];
                    // dL/dx via dot over out channels, dL/dw via axpy;
                    // the axpy is skipped where the activation is zero
                    let mut acc = 0.0;
                    if xv == 0.0 {
                        for (w, g) in w_row.iter().zip(g_row) {
                            acc += w * g;
                        }
                    } else {
                        let gw_row = &mut gw[(k * c_in + ci) * c_out..][..c_out];
                        for ((w, gwv), g) in w_row.iter().zip(gw_row.iter_mut()).zip(g_row) {
                            acc += w * g;
                            *gwv += xv * g;
                        }
                    }
                    gx_row[ci] += acc;
                }
            }
        }
    }

    let grad_x = from_channels_last(&gxt, batch, c_in, length);
    Ok((grad_x, grad_w))
}
