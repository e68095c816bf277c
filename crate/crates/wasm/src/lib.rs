//! Browser bindings for the demo page in `www/`.
//!
//! Every operation takes a grayscale image as row-major bytes. The plain Rust
//! functions in [`demo`] do the work; the exported wrappers only convert
//! errors for JavaScript.

use wasm_bindgen::prelude::*;

pub mod demo;

pub use demo::{HistogramPair, Trace};

fn js(e: rdcnn::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Intermediate maps of feature `index` for the given network.
#[wasm_bindgen(js_name = traceFeature)]
pub fn trace_feature(
    pixels: &[u8],
    width: usize,
    height: usize,
    kernel_size: usize,
    blocks: usize,
    seed: u32,
    index: usize,
) -> Result<Trace, JsError> {
    demo::trace(pixels, width, height, kernel_size, blocks, seed, index).map_err(js)
}

/// Value distributions of the pixels and of the extracted features.
#[wasm_bindgen]
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
) -> Result<HistogramPair, JsError> {
    demo::histograms(pixels, width, height, kernel_size, blocks, num_kernels, seed, bins).map_err(js)
}

/// Cosine similarity of each random flip/rotation of the image to the
/// original, in feature space.
#[wasm_bindgen(js_name = augmentationCosines)]
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
) -> Result<Vec<f64>, JsError> {
    demo::augmentation_cosines(pixels, width, height, kernel_size, blocks, num_kernels, seed, count).map_err(js)
}
