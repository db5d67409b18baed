//! Minimal planar CHW tensor used by the colorizer networks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{GrayscaleImage, RgbImage};
use crate::math::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::ZERO; channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    pub fn from_gray(img: &GrayscaleImage) -> Self {
        Self {
            channels: 1,
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| T::from_f32(v)).collect(),
        }
    }

    /// Interprets a 3-channel tensor as an RGB image, clamping into `[0, 1]`.
    pub fn to_rgb(&self) -> Result<RgbImage> {
        if self.channels != 3 {
            return Err(Error::InvalidArgument("tensor must have 3 channels"));
        }
        let p = self.plane();
        let mut out = Vec::with_capacity(p * 3);
        for i in 0..p {
            for c in 0..3 {
                out.push(self.data[c * p + i].to_f64() as f32);
            }
        }
        RgbImage::from_raw_clamped(self.height, self.width, out)
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.to_f64()).collect(),
        }
    }
}
