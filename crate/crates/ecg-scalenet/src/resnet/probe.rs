//! Empirical receptive-field probe.
//!
//! The probe builds the network with every conv weight set to +1 (batch
//! norm neutral, dropout off), feeds an all-ones signal, and perturbs one
//! input sample at a time. With strictly positive weights a perturbation
//! propagates through every pooling and activation it can reach, so the set
//! of pre-GAP positions that change is exactly the set whose receptive
//! field covers the perturbed sample.
//!
//! One perturbation alone measures `floor((R-1-r)/J)+1` affected outputs,
//! where `J` is the total stride and `r` the sample's phase within a stride
//! period; summing the counts over one full period of `J` consecutive
//! samples telescopes to `R` exactly.

use crate::error::{Error, Result};
use crate::ops::BnMode;
use crate::resnet::model::ResNet1d;
use crate::resnet::{total_stride, NetworkSpec};
use crate::tensor::Tensor;

/// Measures the receptive field of `spec` empirically.
///
/// `input_length` must comfortably exceed twice the expected field so that
/// every probed window stays clear of the signal boundaries; the probe
/// fails rather than return a clipped estimate.
pub fn probe_receptive_field(spec: &NetworkSpec, input_length: usize) -> Result<usize> {
    let mut model = ResNet1d::from_spec(spec.clone(), 0)?;
    model.set_all_weights(1.0);
    model.dropout_rate = 0.0;

    let x = Tensor::filled(&[1, crate::resnet::INPUT_LEADS, input_length], 1.0);
    let (base, _) = model.forward_features(&x, BnMode::Inference)?;
    let out_len = base.dim(2);
    let channels = base.dim(1);
    if out_len < 3 {
        return Err(Error::InvalidInput(format!(
            "input length {input_length} leaves only {out_len} output positions to probe"
        )));
    }

    // Perturbation large enough that even single-path (window edge)
    // contributions are representable next to the all-ones baseline, whose
    // magnitude grows with depth under unit weights.
    let base_mag = base.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let eps = base_mag * 1e-5;
    let threshold = base_mag * 1e-12;

    let stride = total_stride(spec);
    let mut start = (input_length / 2 / stride) * stride;
    if start + stride > input_length {
        start = input_length.saturating_sub(stride);
    }

    let mut total = 0usize;
    for r in 0..stride {
        let pos = start + r;
        let mut perturbed = x.clone();
        for lead in 0..crate::resnet::INPUT_LEADS {
            let idx = perturbed.idx3(0, lead, pos);
            perturbed.data_mut()[idx] += eps;
        }
        let (out, _) = model.forward_features(&perturbed, BnMode::Inference)?;

        let mut lo = usize::MAX;
        let mut hi = 0usize;
        let mut count = 0usize;
        for t in 0..out_len {
            let mut changed = false;
            for c in 0..channels {
                let i = out.idx3(0, c, t);
                if (out.data()[i] - base.data()[i]).abs() > threshold {
                    changed = true;
                    break;
                }
            }
            if changed {
                count += 1;
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if count == 0 {
            return Err(Error::InvalidInput("perturbation produced no output change".into()));
        }
        if lo == 0 || hi == out_len - 1 {
            return Err(Error::InvalidInput(format!(
                "input length {input_length} too small: probed window touches the feature-map boundary"
            )));
        }
        if hi - lo + 1 != count {
            return Err(Error::InvalidInput("affected output set is not contiguous".into()));
        }
        total += count;
    }
    Ok(total)
}
