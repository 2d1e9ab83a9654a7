//! Central finite-difference gradient checking.
//!
//! The numeric side lives here so that both unit tests and the model-level
//! check can share it; it never calls into the analytic backward path it is
//! used to verify.

/// Central-difference gradient of a scalar function at `x`.
pub fn numeric_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Worst relative discrepancy between analytic and numeric gradients.
///
/// The denominator is floored at 1e-6 so that near-zero pairs do not blow
/// up the ratio on finite-difference noise.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// One row of a gradient-check report.
#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    /// Parameter tensor name (e.g. `blocks.2.layers.0.conv1.weight`).
    pub name: String,
    /// Layer kind the tensor belongs to (`conv`, `batchnorm`, `fc`).
    pub kind: String,
    pub max_rel_error: f64,
}

/// Result of checking every parameter of a fragment or model.
#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    /// Max relative error per layer kind.
    pub fn by_kind(&self) -> Vec<(String, f64)> {
        let mut kinds: Vec<(String, f64)> = Vec::new();
        for e in &self.entries {
            match kinds.iter_mut().find(|(k, _)| *k == e.kind) {
                Some((_, v)) => *v = v.max(e.max_rel_error),
                None => kinds.push((e.kind.clone(), e.max_rel_error)),
            }
        }
        kinds
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst() < tolerance
    }
}
