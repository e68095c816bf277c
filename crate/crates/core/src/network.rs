//! The random depthwise signed convolutional network.
//!
//! Feature `j` of an image is produced by its own chain of blocks. The first
//! block correlates all input channels with a `C x k x k` kernel; every later
//! block correlates the single resulting channel with a `k x k` kernel. Each
//! block is conv -> sign -> 2x2 average pool, and the final map is globally
//! averaged into one value in `[-1, 1]`. Running `m` such chains side by side
//! is the same computation as a width-`m` depthwise network.
//!
//! Kernel weights are i.i.d. standard normal. Stack `j` is drawn from
//! [`rng::Stream::new(seed, j)`](crate::rng::Stream::new) in this order: the
//! input kernel (channel, row, column), then each depthwise kernel (row,
//! column), then, only if biases are enabled, one bias per block.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::persistence::FeatureFileWriter;
use crate::rng::Stream;
use crate::tensor::{self, kernels, ImageTensor, Kernel};

/// Kernels processed together by one matrix product.
pub const KERNEL_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Raw values.
    None,
    /// `v / 255`, mapping 8-bit pixels to `[0, 1]`.
    #[default]
    Unit,
    /// `v / 127.5 - 1`, mapping 8-bit pixels to `[-1, 1]`.
    Symmetric,
}

impl Normalization {
    pub fn apply(self, v: f32) -> f32 {
        match self {
            Normalization::None => v,
            Normalization::Unit => v / 255.0,
            Normalization::Symmetric => v / 127.5 - 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Unit => "unit",
            Normalization::Symmetric => "symmetric",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "unit" => Ok(Normalization::Unit),
            "symmetric" => Ok(Normalization::Symmetric),
            other => Err(Error::invalid(format!(
                "unknown normalization {other:?} (expected none, unit or symmetric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Odd kernel side `k`.
    pub kernel_size: usize,
    /// Number of conv -> sign -> pool blocks `b`.
    pub blocks: usize,
    /// Number of kernel chains `m`, i.e. output features.
    pub num_kernels: usize,
    pub seed: u64,
    pub input_channels: usize,
    pub normalization: Normalization,
    /// Adds one N(0, 1) bias per block before the sign.
    pub bias_enabled: bool,
}

impl NetworkConfig {
    pub fn new(kernel_size: usize, blocks: usize, num_kernels: usize, input_channels: usize) -> Self {
        NetworkConfig {
            kernel_size,
            blocks,
            num_kernels,
            seed: 0,
            input_channels,
            normalization: Normalization::Unit,
            bias_enabled: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_bias(mut self, enabled: bool) -> Self {
        self.bias_enabled = enabled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel size must be a positive odd integer, got {}",
                self.kernel_size
            )));
        }
        if self.blocks == 0 {
            return Err(Error::invalid("at least one block is required"));
        }
        if self.num_kernels == 0 {
            return Err(Error::invalid("at least one kernel is required"));
        }
        if self.input_channels == 0 {
            return Err(Error::invalid("input must have at least one channel"));
        }
        Ok(())
    }

    /// Spatial size after one block, if the block fits.
    fn block_output(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let k = self.kernel_size;
        if h < k + 1 || w < k + 1 {
            return None;
        }
        Some(((h - k).div_ceil(2), (w - k).div_ceil(2)))
    }

    /// Largest block count an `h x w` input survives.
    pub fn max_blocks(&self, h: usize, w: usize) -> usize {
        let mut dims = (h, w);
        let mut count = 0;
        while let Some(next) = self.block_output(dims.0, dims.1) {
            count += 1;
            dims = next;
        }
        count
    }

    /// Spatial size of the final map for an `h x w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let mut dims = (h, w);
        for _ in 0..self.blocks {
            dims = self.block_output(dims.0, dims.1).ok_or(Error::ImageTooSmall {
                height: h,
                width: w,
                kernel_size: self.kernel_size,
                blocks: self.blocks,
                max_blocks: self.max_blocks(h, w),
            })?;
        }
        Ok(dims)
    }
}

/// The random weights behind one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStack {
    input_kernel: Kernel,
    depthwise_kernels: Vec<Kernel>,
    biases: Option<Vec<f32>>,
}

impl KernelStack {
    pub fn new(
        input_kernel: Kernel,
        depthwise_kernels: Vec<Kernel>,
        biases: Option<Vec<f32>>,
    ) -> Result<Self> {
        let k = input_kernel.size();
        for kernel in &depthwise_kernels {
            if kernel.in_channels() != 1 || kernel.size() != k {
                return Err(Error::invalid(format!(
                    "depthwise kernels must be single-channel {k}x{k}, got {} channels of {}x{}",
                    kernel.in_channels(),
                    kernel.size(),
                    kernel.size()
                )));
            }
        }
        if let Some(b) = &biases {
            if b.len() != depthwise_kernels.len() + 1 {
                return Err(Error::DimensionMismatch {
                    what: "bias count",
                    expected: depthwise_kernels.len() + 1,
                    actual: b.len(),
                });
            }
        }
        Ok(KernelStack {
            input_kernel,
            depthwise_kernels,
            biases,
        })
    }

    /// Draws stack `index` for `config`.
    pub fn generate(config: &NetworkConfig, index: usize) -> Self {
        let k = config.kernel_size;
        let mut stream = Stream::new(config.seed, index as u64);
        let mut draw = |n: usize| -> Vec<f32> {
            (0..n).map(|_| stream.standard_normal() as f32).collect()
        };
        let input = draw(config.input_channels * k * k);
        let depthwise: Vec<Vec<f32>> = (1..config.blocks).map(|_| draw(k * k)).collect();
        let biases = config.bias_enabled.then(|| draw(config.blocks));
        KernelStack {
            input_kernel: Kernel::new(config.input_channels, k, input).expect("finite normals"),
            depthwise_kernels: depthwise
                .into_iter()
                .map(|w| Kernel::new(1, k, w).expect("finite normals"))
                .collect(),
            biases,
        }
    }

    pub fn input_kernel(&self) -> &Kernel {
        &self.input_kernel
    }

    pub fn depthwise_kernels(&self) -> &[Kernel] {
        &self.depthwise_kernels
    }

    pub fn biases(&self) -> Option<&[f32]> {
        self.biases.as_deref()
    }

    pub fn blocks(&self) -> usize {
        self.depthwise_kernels.len() + 1
    }

    fn bias(&self, block: usize) -> f64 {
        self.biases.as_ref().map_or(0.0, |b| b[block] as f64)
    }

    /// Every weight in generation order.
    pub fn all_weights(&self) -> impl Iterator<Item = f32> + '_ {
        self.input_kernel
            .weights()
            .iter()
            .chain(self.depthwise_kernels.iter().flat_map(|k| k.weights()))
            .copied()
    }
}

/// All `m` kernel stacks of `config`. Stack `j` depends only on `(seed, j)`.
pub fn generate_kernel_stacks(config: &NetworkConfig) -> Result<Vec<KernelStack>> {
    config.validate()?;
    Ok((0..config.num_kernels)
        .into_par_iter()
        .map(|j| KernelStack::generate(config, j))
        .collect())
}

/// An image normalized and unrolled into patch rows for the input layer.
struct Patches {
    /// `positions x (channels * k * k)`, row-major, tap order (channel, row, column).
    rows: Vec<f64>,
    out_h: usize,
    out_w: usize,
}

/// Batched feature computation for a fixed set of stacks.
///
/// The input layer of [`KERNEL_BLOCK`] chains at a time is one matrix product
/// of image patches against stacked kernel weights; later blocks run the
/// single-channel primitives from [`tensor::kernels`]. Each output value
/// depends only on its image and its stack, never on batching or threads.
pub struct FeatureExtractor<'a> {
    config: &'a NetworkConfig,
    stacks: &'a [KernelStack],
    /// `m x taps`, kernel-major.
    input_weights: Vec<f64>,
    taps: usize,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(config: &'a NetworkConfig, stacks: &'a [KernelStack]) -> Result<Self> {
        config.validate()?;
        let k = config.kernel_size;
        for stack in stacks {
            let kernel = stack.input_kernel();
            if kernel.in_channels() != config.input_channels || kernel.size() != k {
                return Err(Error::invalid(format!(
                    "stack input kernel is {}x{k}x{k}-incompatible: {} channels of size {}",
                    config.input_channels,
                    kernel.in_channels(),
                    kernel.size()
                )));
            }
            if stack.blocks() != config.blocks {
                return Err(Error::DimensionMismatch {
                    what: "stack block count",
                    expected: config.blocks,
                    actual: stack.blocks(),
                });
            }
        }
        let taps = config.input_channels * k * k;
        let input_weights = stacks
            .iter()
            .flat_map(|s| s.input_kernel().weights().iter().map(|&w| w as f64))
            .collect();
        Ok(FeatureExtractor {
            config,
            stacks,
            input_weights,
            taps,
        })
    }

    pub fn num_features(&self) -> usize {
        self.stacks.len()
    }

    fn check_image(&self, image: &ImageTensor) -> Result<()> {
        if image.channels() != self.config.input_channels {
            return Err(Error::DimensionMismatch {
                what: "image channels",
                expected: self.config.input_channels,
                actual: image.channels(),
            });
        }
        self.config.output_size(image.height(), image.width())?;
        Ok(())
    }

    fn patches(&self, image: &ImageTensor) -> Patches {
        let (c, h, w) = image.shape();
        let k = self.config.kernel_size;
        let (oh, ow) = (h - k + 1, w - k + 1);
        let norm = self.config.normalization;
        let plane: Vec<f64> = image.data().iter().map(|&v| norm.apply(v) as f64).collect();
        let mut rows = Vec::with_capacity(oh * ow * self.taps);
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    for dy in 0..k {
                        let start = (ch * h + oy + dy) * w + ox;
                        rows.extend_from_slice(&plane[start..start + k]);
                    }
                }
            }
        }
        Patches {
            rows,
            out_h: oh,
            out_w: ow,
        }
    }

    /// Features `first..first + out.len()` of one prepared image.
    fn extract_block(&self, patches: &Patches, first: usize, out: &mut [f32]) {
        let n = out.len();
        let positions = patches.out_h * patches.out_w;
        let mut conv = vec![0.0f64; positions * n];
        let weights = &self.input_weights[first * self.taps..(first + n) * self.taps];
        // conv[j * positions + p] = sum_t rows[p * taps + t] * weights[j * taps + t]
        unsafe {
            matrixmultiply::dgemm(
                positions,
                self.taps,
                n,
                1.0,
                patches.rows.as_ptr(),
                self.taps as isize,
                1,
                weights.as_ptr(),
                1,
                self.taps as isize,
                0.0,
                conv.as_mut_ptr(),
                1,
                positions as isize,
            );
        }

        let k = self.config.kernel_size;
        let mut signs = vec![0.0f32; positions];
        let mut pooled = vec![0.0f32; positions / 4 + 1];
        let mut acc = vec![0.0f64; positions];
        for (j, value) in out.iter_mut().enumerate() {
            let stack = &self.stacks[first + j];
            let map = &mut conv[j * positions..(j + 1) * positions];
            let bias = stack.bias(0);
            if bias != 0.0 {
                map.iter_mut().for_each(|v| *v += bias);
            }
            let (mut h, mut w) = (patches.out_h, patches.out_w);
            kernels::sign_into(map, &mut signs[..h * w]);
            kernels::avg_pool_2x2_into(&signs[..h * w], h, w, &mut pooled[..(h / 2) * (w / 2)]);
            (h, w) = (h / 2, w / 2);

            for (block, kernel) in stack.depthwise_kernels().iter().enumerate() {
                let (ch, cw) = (h - k + 1, w - k + 1);
                let acc = &mut acc[..ch * cw];
                acc.fill(0.0);
                kernels::correlate_accumulate(&pooled[..h * w], h, w, kernel.weights(), k, acc);
                let bias = stack.bias(block + 1);
                if bias != 0.0 {
                    acc.iter_mut().for_each(|v| *v += bias);
                }
                kernels::sign_into(acc, &mut signs[..ch * cw]);
                kernels::avg_pool_2x2_into(&signs[..ch * cw], ch, cw, &mut pooled[..(ch / 2) * (cw / 2)]);
                (h, w) = (ch / 2, cw / 2);
            }
            *value = kernels::mean(&pooled[..h * w]) as f32;
        }
    }

    /// Features `first..first + out.len()` of `image`.
    pub fn extract_range(&self, image: &ImageTensor, first: usize, out: &mut [f32]) -> Result<()> {
        self.check_image(image)?;
        if first + out.len() > self.stacks.len() {
            return Err(Error::invalid(format!(
                "feature range {first}..{} exceeds {} stacks",
                first + out.len(),
                self.stacks.len()
            )));
        }
        let patches = self.patches(image);
        out.par_chunks_mut(KERNEL_BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| self.extract_block(&patches, first + b * KERNEL_BLOCK, chunk));
        Ok(())
    }

    /// All features of `image` into `out`.
    pub fn extract_row(&self, image: &ImageTensor, out: &mut [f32]) -> Result<()> {
        if out.len() != self.stacks.len() {
            return Err(Error::DimensionMismatch {
                what: "feature row length",
                expected: self.stacks.len(),
                actual: out.len(),
            });
        }
        self.extract_range(image, 0, out)
    }

    /// Features `first..first + width` for every image, row-major.
    pub fn extract_columns(
        &self,
        images: &[ImageTensor],
        first: usize,
        width: usize,
    ) -> Result<Vec<f32>> {
        check_uniform_shapes(images)?;
        if let Some(image) = images.first() {
            self.check_image(image)?;
        }
        let mut values = vec![0.0f32; images.len() * width];
        if width == 0 {
            return Ok(values);
        }
        values
            .par_chunks_mut(width)
            .zip(images.par_iter())
            .try_for_each(|(row, image)| self.extract_range(image, first, row))?;
        Ok(values)
    }
}

fn check_uniform_shapes(images: &[ImageTensor]) -> Result<()> {
    let Some(first) = images.first() else {
        return Ok(());
    };
    match images.iter().position(|img| img.shape() != first.shape()) {
        None => Ok(()),
        Some(i) => Err(Error::invalid(format!(
            "image {i} has shape {:?} but image 0 has shape {:?}",
            images[i].shape(),
            first.shape()
        ))),
    }
}

/// One feature: `image` pushed through `stack`.
pub fn extract_feature(image: &ImageTensor, stack: &KernelStack, config: &NetworkConfig) -> Result<f32> {
    let stacks = std::slice::from_ref(stack);
    let extractor = FeatureExtractor::new(config, stacks)?;
    let mut out = [0.0f32];
    extractor.extract_row(image, &mut out)?;
    Ok(out[0])
}

/// Feature matrix with row `i`, column `j` = image `i` through stack `j`.
pub fn extract_features(
    images: &[ImageTensor],
    labels: Option<&[u32]>,
    config: &NetworkConfig,
) -> Result<FeatureMatrix> {
    let stacks = generate_kernel_stacks(config)?;
    extract_features_with_stacks(images, labels, config, &stacks)
}

pub fn extract_features_with_stacks(
    images: &[ImageTensor],
    labels: Option<&[u32]>,
    config: &NetworkConfig,
    stacks: &[KernelStack],
) -> Result<FeatureMatrix> {
    let extractor = FeatureExtractor::new(config, stacks)?;
    let values = extractor.extract_columns(images, 0, stacks.len())?;
    FeatureMatrix::new(images.len(), stacks.len(), values, labels.map(<[u32]>::to_vec))
}

/// Extracts straight to an RDCF file, holding at most about `budget_bytes` of
/// features in memory by computing column blocks. Returns the smallest and
/// largest value written, or `None` when there are no images.
pub fn extract_features_to_file(
    images: &[ImageTensor],
    labels: Option<&[u32]>,
    config: &NetworkConfig,
    path: &Path,
    budget_bytes: usize,
) -> Result<Option<(f32, f32)>> {
    let stacks = generate_kernel_stacks(config)?;
    let extractor = FeatureExtractor::new(config, &stacks)?;
    let m = stacks.len();
    let mut writer = FeatureFileWriter::create(path, images.len(), m, labels)?;
    let per_column = images.len().max(1) * 4;
    let mut width = (budget_bytes / per_column).max(1);
    if width >= KERNEL_BLOCK {
        width -= width % KERNEL_BLOCK;
    }
    let mut first = 0;
    let mut range: Option<(f32, f32)> = None;
    while first < m {
        let w = width.min(m - first);
        let block = extractor.extract_columns(images, first, w)?;
        for &v in &block {
            range = Some(range.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))));
        }
        writer.write_columns(first, w, &block)?;
        first += w;
    }
    writer.finish()?;
    Ok(range)
}

/// One named intermediate map of a traced feature.
#[derive(Debug, Clone)]
pub struct Stage {
    pub name: String,
    pub map: ImageTensor,
}

/// Runs one chain through the tensor-level operations, keeping every
/// intermediate map. Intended for inspection and visualization.
pub fn trace_feature(
    image: &ImageTensor,
    stack: &KernelStack,
    config: &NetworkConfig,
) -> Result<(Vec<Stage>, f64)> {
    config.validate()?;
    config.output_size(image.height(), image.width())?;
    let normalized = ImageTensor::new(
        image.channels(),
        image.height(),
        image.width(),
        image.data().iter().map(|&v| config.normalization.apply(v)).collect(),
    )?;
    let mut stages = Vec::new();
    let mut current = normalized;
    for block in 0..stack.blocks() {
        let mut conv = if block == 0 {
            tensor::conv_valid(&current, stack.input_kernel())?
        } else {
            tensor::conv_depthwise(&current, &stack.depthwise_kernels()[block - 1..block])?
        };
        let bias = stack.bias(block) as f32;
        if bias != 0.0 {
            let (c, h, w) = conv.shape();
            conv = ImageTensor::new(c, h, w, conv.data().iter().map(|v| v + bias).collect())?;
        }
        let signed = tensor::sign_activate(&conv)?;
        let pooled = tensor::avg_pool_2x2(&signed)?;
        stages.push(Stage { name: format!("block {} conv", block + 1), map: conv });
        stages.push(Stage { name: format!("block {} sign", block + 1), map: signed });
        stages.push(Stage { name: format!("block {} pool", block + 1), map: pooled.clone() });
        current = pooled;
    }
    let value = tensor::global_avg_pool(&current)[0];
    Ok((stages, value))
}
