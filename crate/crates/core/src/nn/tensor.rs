use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// `channels x length` buffer, row-major by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor1D<T> {
    channels: usize,
    length: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor1D<T> {
    pub fn new(channels: usize, length: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::domain(format!(
                "tensor must be at least 1x1, got {channels}x{length}"
            )));
        }
        if data.len() != channels * length {
            return Err(Error::domain(format!(
                "tensor {channels}x{length} needs {} elements, got {}",
                channels * length,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite tensor element {bad:?}")));
        }
        Ok(Tensor1D { channels, length, data })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Tensor1D {
            channels,
            length,
            data: vec![T::zero(); channels * length],
        }
    }

    /// Single-channel tensor.
    pub fn from_signal(samples: Vec<T>) -> Result<Self> {
        let len = samples.len();
        Tensor1D::new(1, len, samples)
    }

    /// Converts every element with `U::from_f32(x.to_f32())`.
    pub fn cast<U: Scalar>(&self) -> Tensor1D<U> {
        Tensor1D {
            channels: self.channels,
            length: self.length,
            data: self.data.iter().map(|v| U::from_f32(v.to_f32())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor1D {
            channels: self.channels,
            length: self.length,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T> Tensor1D<T> {
    pub(crate) fn from_parts_unchecked(channels: usize, length: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), channels * length);
        Tensor1D { channels, length, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.length..(c + 1) * self.length]
    }

    #[inline]
    pub fn get(&self, channel: usize, pos: usize) -> &T {
        &self.data[channel * self.length + pos]
    }
}
