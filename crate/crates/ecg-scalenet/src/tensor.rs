//! Dense row-major f64 tensor.
//!
//! All kernels in this crate operate on contiguous `f64` buffers with an
//! explicit shape vector. There is no stride/view machinery: every tensor
//! owns its storage, and layout is always row-major (last axis contiguous).

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Dense N-dimensional array of 64-bit floats, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and a flat row-major buffer.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                axis: "flat length",
                expected,
                actual: data.len(),
            });
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput("tensor axes must be positive".into()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; n] }
    }

    /// Normal(0, std) entries drawn from `rng` in flat order.
    pub fn randn<R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std).expect("std must be finite and positive");
        let data = (0..n).map(|_| dist.sample(rng)).collect();
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn from_slice_1d(values: &[f64]) -> Self {
        Tensor { shape: vec![values.len()], data: values.to_vec() }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of axis `i`.
    #[inline]
    pub fn dim(&self, i: usize) -> usize {
        self.shape[i]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the buffer under a new shape of equal volume.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "Tensor::reshaped",
                axis: "flat length",
                expected,
                actual: self.data.len(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Flat offset of `[b, c, t]` in a rank-3 tensor.
    #[inline]
    pub fn idx3(&self, b: usize, c: usize, t: usize) -> usize {
        debug_assert_eq!(self.rank(), 3);
        (b * self.shape[1] + c) * self.shape[2] + t
    }

    /// Flat offset of `[r, c]` in a rank-2 tensor.
    #[inline]
    pub fn idx2(&self, r: usize, c: usize) -> usize {
        debug_assert_eq!(self.rank(), 2);
        r * self.shape[1] + c
    }

    /// Errors if any entry is NaN or infinite.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { context: context.to_string() })
        }
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// `self += alpha * other`, shapes must match exactly.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "Tensor::axpy",
                axis: "flat length",
                expected: self.len(),
                actual: other.len(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_length_mismatch() {
        let err = Tensor::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { expected: 6, actual: 5, .. }));
    }

    #[test]
    fn idx3_is_row_major() {
        let t = Tensor::zeros(&[2, 3, 4]);
        assert_eq!(t.idx3(0, 0, 0), 0);
        assert_eq!(t.idx3(0, 0, 3), 3);
        assert_eq!(t.idx3(0, 1, 0), 4);
        assert_eq!(t.idx3(1, 0, 0), 12);
        assert_eq!(t.idx3(1, 2, 3), 23);
    }

    #[test]
    fn check_finite_flags_nan() {
        let mut t = Tensor::zeros(&[2, 2]);
        t.data_mut()[3] = f64::NAN;
        assert!(t.check_finite("test").is_err());
    }

    #[test]
    fn randn_is_deterministic_under_seed() {
        use rand::SeedableRng;
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ta = Tensor::randn(&[4, 4], 0.5, &mut a);
        let tb = Tensor::randn(&[4, 4], 0.5, &mut b);
        assert_eq!(ta.data(), tb.data());
    }
}
