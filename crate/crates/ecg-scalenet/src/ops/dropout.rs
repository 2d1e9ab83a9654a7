//! Inverted dropout.
//!
//! Kept activations are scaled by `1/keep_prob` at train time so that
//! inference is the identity.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::Rng;

/// Bernoulli keep mask recorded by the forward pass.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    pub kept: Vec<bool>,
    pub keep_prob: f64,
}

/// `training=false` (or keep_prob == 1) is the identity and draws nothing
/// from the RNG stream.
pub fn dropout_forward<R: Rng>(
    x: &Tensor,
    keep_prob: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor, Option<DropoutMask>)> {
    if !(0.0 < keep_prob && keep_prob <= 1.0) {
        return Err(Error::InvalidConfig(format!("keep_prob must be in (0,1], got {keep_prob}")));
    }
    if !training || keep_prob == 1.0 {
        return Ok((x.clone(), None));
    }
    let mut out = x.clone();
    let scale = 1.0 / keep_prob;
    let mut kept = vec![false; x.len()];
    for (v, k) in out.data_mut().iter_mut().zip(kept.iter_mut()) {
        if rng.gen::<f64>() < keep_prob {
            *k = true;
            *v *= scale;
        } else {
            *v = 0.0;
        }
    }
    Ok((out, Some(DropoutMask { kept, keep_prob })))
}

pub fn dropout_backward(grad_out: &Tensor, mask: Option<&DropoutMask>) -> Tensor {
    match mask {
        None => grad_out.clone(),
        Some(m) => {
            let mut grad = grad_out.clone();
            let scale = 1.0 / m.keep_prob;
            for (g, k) in grad.data_mut().iter_mut().zip(&m.kept) {
                *g = if *k { *g * scale } else { 0.0 };
            }
            grad
        }
    }
}
