use rdcnn::analysis::{augmentation_cosine_distribution, grouped_pairing, image_histogram, FEATURE_RANGE, PIXEL_RANGE};
use rdcnn::data::augment_images;
use rdcnn::network::trace_feature;
use rdcnn::{extract_features, Error, ImageTensor, KernelStack, NetworkConfig, Result};
use wasm_bindgen::prelude::*;

pub fn image(pixels: &[u8], width: usize, height: usize) -> Result<ImageTensor> {
    ImageTensor::new(1, height, width, pixels.iter().map(|&p| p as f32).collect())
}

fn network(kernel_size: usize, blocks: usize, num_kernels: usize, seed: u32) -> Result<NetworkConfig> {
    let config = NetworkConfig::new(kernel_size, blocks, num_kernels, 1).with_seed(seed as u64);
    config.validate()?;
    Ok(config)
}

/// Named maps from one traced feature, input first.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Trace {
    names: Vec<String>,
    maps: Vec<ImageTensor>,
    feature: f64,
}

#[wasm_bindgen]
impl Trace {
    /// Number of stored maps.
    pub fn count(&self) -> usize {
        self.maps.len()
    }

    pub fn name(&self, i: usize) -> String {
        self.names[i].clone()
    }

    pub fn width(&self, i: usize) -> usize {
        self.maps[i].width()
    }

    pub fn height(&self, i: usize) -> usize {
        self.maps[i].height()
    }

    /// Row-major values of map `i`.
    pub fn data(&self, i: usize) -> Vec<f32> {
        self.maps[i].data().to_vec()
    }

    /// The final pooled value.
    pub fn feature(&self) -> f64 {
        self.feature
    }
}

pub fn trace(
    pixels: &[u8],
    width: usize,
    height: usize,
    kernel_size: usize,
    blocks: usize,
    seed: u32,
    index: usize,
) -> Result<Trace> {
    let img = image(pixels, width, height)?;
    let config = network(kernel_size, blocks, index + 1, seed)?;
    let stack = KernelStack::generate(&config, index);
    let (stages, feature) = trace_feature(&img, &stack, &config)?;
    let mut names = vec!["input".to_string()];
    let mut maps = vec![img];
    for s in stages {
        names.push(s.name);
        maps.push(s.map);
    }
    Ok(Trace { names, maps, feature })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct HistogramPair {
    pixel: Vec<f64>,
    feature: Vec<f64>,
}

#[wasm_bindgen]
impl HistogramPair {
    /// Bin masses over [0, 1] after scaling pixels by 1/255.
    pub fn pixel(&self) -> Vec<f64> {
        self.pixel.clone()
    }

    /// Bin masses over [-1, 1].
    pub fn feature(&self) -> Vec<f64> {
        self.feature.clone()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn histograms(
    pixels: &[u8],
    width: usize,
    height: usize,
    kernel_size: usize,
    blocks: usize,
    num_kernels: usize,
    seed: u32,
    bins: usize,
) -> Result<HistogramPair> {
    let img = image(pixels, width, height)?;
    let config = network(kernel_size, blocks, num_kernels, seed)?;
    let scaled: Vec<f32> = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    let pixel = image_histogram(&scaled, bins, PIXEL_RANGE, 0.0)?;
    let fm = extract_features(&[img], None, &config)?;
    let feature = image_histogram(fm.row(0), bins, FEATURE_RANGE, 0.0)?;
    Ok(HistogramPair {
        pixel: pixel.masses().to_vec(),
        feature: feature.masses().to_vec(),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn augmentation_cosines(
    pixels: &[u8],
    width: usize,
    height: usize,
    kernel_size: usize,
    blocks: usize,
    num_kernels: usize,
    seed: u32,
    count: usize,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let img = image(pixels, width, height)?;
    let config = network(kernel_size, blocks, num_kernels, seed)?;
    let augmented = augment_images(std::slice::from_ref(&img), count, seed as u64)?;
    let original = extract_features(&[img], None, &config)?;
    let features = extract_features(&augmented, None, &config)?;
    let pairing = grouped_pairing(1, count)?;
    augmentation_cosine_distribution(&original, &features, &pairing)
}
