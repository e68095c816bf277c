//! Dense `C x H x W` image tensors and the numeric primitives of the network.
//!
//! Convolutions are valid (unpadded, stride 1) cross-correlations without a
//! bias term: output `(y, x)` is `sum_{c, dy, dx} in[c][y + dy][x + dx] * w[c][dy][dx]`,
//! the kernel is never flipped. Sums are accumulated in `f64` in channel, row,
//! column order and stored as `f32`.
//!
//! The functions here are the optimized paths. [`naive`] holds direct loop
//! versions of the same operations that serve as reference oracles.

pub mod kernels;
pub mod naive;

use crate::error::{Error, Result};

/// One image at any pipeline stage, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "tensor dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "tensor data length",
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(ImageTensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    /// Builds a tensor from `f(c, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub(crate) fn from_parts_unchecked(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        ImageTensor {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// A square `k x k` kernel spanning `in_channels` input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    in_channels: usize,
    size: usize,
    weights: Vec<f32>,
}

impl Kernel {
    pub fn new(in_channels: usize, size: usize, weights: Vec<f32>) -> Result<Self> {
        if in_channels == 0 || size == 0 {
            return Err(Error::invalid(format!(
                "kernel dimensions must be positive, got {in_channels} channels of {size}x{size}"
            )));
        }
        let expected = in_channels * size * size;
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "kernel weight count",
                expected,
                actual: weights.len(),
            });
        }
        if let Some(index) = weights.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Kernel {
            in_channels,
            size,
            weights,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.size * self.size;
        &self.weights[c * plane..(c + 1) * plane]
    }
}

fn check_window(op: &'static str, k: usize, height: usize, width: usize) -> Result<()> {
    if k > height.min(width) {
        return Err(Error::SpatialTooSmall {
            op,
            min: k,
            height,
            width,
        });
    }
    Ok(())
}

/// Valid cross-correlation of all input channels with `kernel`, producing one channel.
pub fn conv_valid(input: &ImageTensor, kernel: &Kernel) -> Result<ImageTensor> {
    if kernel.in_channels != input.channels {
        return Err(Error::DimensionMismatch {
            what: "kernel input channels",
            expected: input.channels,
            actual: kernel.in_channels,
        });
    }
    let k = kernel.size;
    check_window("conv_valid", k, input.height, input.width)?;
    let (oh, ow) = (input.height - k + 1, input.width - k + 1);
    let mut acc = vec![0.0f64; oh * ow];
    for c in 0..input.channels {
        kernels::correlate_accumulate(
            input.channel(c),
            input.height,
            input.width,
            kernel.channel(c),
            k,
            &mut acc,
        );
    }
    Ok(ImageTensor::from_parts_unchecked(
        1,
        oh,
        ow,
        acc.into_iter().map(|v| v as f32).collect(),
    ))
}

/// Depthwise convolution: output channel `i` sees only input channel `i` and `kernels[i]`.
pub fn conv_depthwise(input: &ImageTensor, kernels: &[Kernel]) -> Result<ImageTensor> {
    if kernels.len() != input.channels {
        return Err(Error::DimensionMismatch {
            what: "depthwise kernel count",
            expected: input.channels,
            actual: kernels.len(),
        });
    }
    let k = kernels.first().map(Kernel::size).unwrap_or(0);
    for kernel in kernels {
        if kernel.in_channels != 1 {
            return Err(Error::DimensionMismatch {
                what: "depthwise kernel input channels",
                expected: 1,
                actual: kernel.in_channels,
            });
        }
        if kernel.size != k {
            return Err(Error::DimensionMismatch {
                what: "depthwise kernel size",
                expected: k,
                actual: kernel.size,
            });
        }
    }
    check_window("conv_depthwise", k, input.height, input.width)?;
    let (oh, ow) = (input.height - k + 1, input.width - k + 1);
    let mut data = Vec::with_capacity(input.channels * oh * ow);
    let mut acc = vec![0.0f64; oh * ow];
    for (c, kernel) in kernels.iter().enumerate() {
        acc.fill(0.0);
        kernels::correlate_accumulate(
            input.channel(c),
            input.height,
            input.width,
            kernel.weights(),
            k,
            &mut acc,
        );
        data.extend(acc.iter().map(|&v| v as f32));
    }
    Ok(ImageTensor::from_parts_unchecked(input.channels, oh, ow, data))
}

/// Elementwise sign with `sign(0) = +1`.
pub fn sign_activate(input: &ImageTensor) -> Result<ImageTensor> {
    let mut out = vec![0.0f32; input.data.len()];
    kernels::sign_checked(&input.data, &mut out)?;
    Ok(ImageTensor::from_parts_unchecked(
        input.channels,
        input.height,
        input.width,
        out,
    ))
}

/// 2x2 average pooling with stride 2. A trailing odd row or column is dropped.
pub fn avg_pool_2x2(input: &ImageTensor) -> Result<ImageTensor> {
    if input.height < 2 || input.width < 2 {
        return Err(Error::SpatialTooSmall {
            op: "avg_pool_2x2",
            min: 2,
            height: input.height,
            width: input.width,
        });
    }
    let (oh, ow) = (input.height / 2, input.width / 2);
    let mut data = vec![0.0f32; input.channels * oh * ow];
    for (c, out) in data.chunks_exact_mut(oh * ow).enumerate() {
        kernels::avg_pool_2x2_into(input.channel(c), input.height, input.width, out);
    }
    Ok(ImageTensor::from_parts_unchecked(input.channels, oh, ow, data))
}

/// Mean of each channel over all spatial positions.
pub fn global_avg_pool(input: &ImageTensor) -> Vec<f64> {
    (0..input.channels)
        .map(|c| kernels::mean(input.channel(c)))
        .collect()
}
