//! Binary cross-entropy on logits, reduced by mean over batch and labels.
//!
//! Targets are multi-hot vectors; soft values in [0,1] are accepted so the
//! same loss serves Mixup-blended labels.

use crate::error::{Error, Result};
use crate::ops::activation::stable_sigmoid;
use crate::tensor::Tensor;

/// `mean( max(z,0) - z*t + ln(1 + exp(-|z|)) )`, the stable form of
/// `-t*ln(sigmoid(z)) - (1-t)*ln(1-sigmoid(z))`.
pub fn bce_with_logits_loss(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    check_pair(logits, targets)?;
    let n = logits.len() as f64;
    let mut total = 0.0;
    for (z, t) in logits.data().iter().zip(targets.data()) {
        total += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
    }
    Ok(total / n)
}

/// Gradient of the mean-reduced loss: `(sigmoid(z) - t) / N`.
pub fn bce_with_logits_backward(logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    check_pair(logits, targets)?;
    let n = logits.len() as f64;
    let mut grad = logits.clone();
    for (g, t) in grad.data_mut().iter_mut().zip(targets.data()) {
        *g = (stable_sigmoid(*g) - t) / n;
    }
    Ok(grad)
}

fn check_pair(logits: &Tensor, targets: &Tensor) -> Result<()> {
    if logits.shape() != targets.shape() {
        return Err(Error::ShapeMismatch {
            op: "bce_with_logits",
            axis: "targets",
            expected: logits.len(),
            actual: targets.len(),
        });
    }
    if logits.is_empty() {
        return Err(Error::InvalidInput("empty prediction set".into()));
    }
    for t in targets.data() {
        if !(0.0..=1.0).contains(t) {
            return Err(Error::InvalidInput(format!("target value {t} outside [0, 1]")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::gradcheck::{max_rel_error, numeric_gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_logit_true_target_costs_ln2() {
        let z = Tensor::new(vec![1, 1], vec![0.0]).unwrap();
        let t = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let loss = bce_with_logits_loss(&z, &t).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn target_outside_unit_interval_is_rejected() {
        let z = Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap();
        let t = Tensor::new(vec![1, 2], vec![0.5, 1.5]).unwrap();
        assert!(bce_with_logits_loss(&z, &t).is_err());
        let t2 = Tensor::new(vec![1, 2], vec![-0.1, 1.0]).unwrap();
        assert!(bce_with_logits_loss(&z, &t2).is_err());
    }

    #[test]
    fn soft_targets_are_accepted() {
        let z = Tensor::new(vec![1, 2], vec![0.3, -0.7]).unwrap();
        let t = Tensor::new(vec![1, 2], vec![0.3, 0.7]).unwrap();
        assert!(bce_with_logits_loss(&z, &t).is_ok());
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let z = Tensor::new(vec![1, 2], vec![-500.0, 500.0]).unwrap();
        let t = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let loss = bce_with_logits_loss(&z, &t).unwrap();
        assert!(loss.is_finite());
        let g = bce_with_logits_backward(&z, &t).unwrap();
        assert!(g.check_finite("bce grad").is_ok());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let z = Tensor::randn(&[4, 3], 2.0, &mut rng);
        let t = Tensor::new(
            vec![4, 3],
            (0..12).map(|i| if i % 3 == 0 { 1.0 } else { 0.25 * (i % 4) as f64 }).collect(),
        )
        .unwrap();
        let g = bce_with_logits_backward(&z, &t).unwrap();
        let n = numeric_gradient(
            |v| {
                let zt = Tensor::new(vec![4, 3], v.to_vec()).unwrap();
                bce_with_logits_loss(&zt, &t).unwrap()
            },
            z.data(),
            1e-6,
        );
        assert!(max_rel_error(g.data(), &n) < 1e-6);
    }
}
