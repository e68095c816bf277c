//! Direct loop implementations used as reference oracles.
//!
//! These index every element explicitly and skip all validation beyond what
//! the loops need. They are slow on purpose.

use super::{ImageTensor, Kernel};

pub fn conv_valid(input: &ImageTensor, kernel: &Kernel) -> ImageTensor {
    let (c, h, w) = input.shape();
    let k = kernel.size();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        for ox in 0..ow {
            let mut sum = 0.0f64;
            for ch in 0..c {
                for dy in 0..k {
                    for dx in 0..k {
                        let wv = kernel.weights()[(ch * k + dy) * k + dx] as f64;
                        sum += wv * input.get(ch, oy + dy, ox + dx) as f64;
                    }
                }
            }
            out.push(sum as f32);
        }
    }
    ImageTensor::from_parts_unchecked(1, oh, ow, out)
}

pub fn conv_depthwise(input: &ImageTensor, kernels: &[Kernel]) -> ImageTensor {
    let (c, h, w) = input.shape();
    let k = kernels[0].size();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = Vec::with_capacity(c * oh * ow);
    for (ch, kernel) in kernels.iter().enumerate().take(c) {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut sum = 0.0f64;
                for dy in 0..k {
                    for dx in 0..k {
                        let wv = kernel.weights()[dy * k + dx] as f64;
                        sum += wv * input.get(ch, oy + dy, ox + dx) as f64;
                    }
                }
                out.push(sum as f32);
            }
        }
    }
    ImageTensor::from_parts_unchecked(c, oh, ow, out)
}

pub fn sign_activate(input: &ImageTensor) -> ImageTensor {
    let data = input
        .data()
        .iter()
        .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let (c, h, w) = input.shape();
    ImageTensor::from_parts_unchecked(c, h, w, data)
}

pub fn avg_pool_2x2(input: &ImageTensor) -> ImageTensor {
    let (c, h, w) = input.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut sum = 0.0f64;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    sum += input.get(ch, 2 * oy + dy, 2 * ox + dx) as f64;
                }
                out.push((sum / 4.0) as f32);
            }
        }
    }
    ImageTensor::from_parts_unchecked(c, oh, ow, out)
}

pub fn global_avg_pool(input: &ImageTensor) -> Vec<f64> {
    let (c, h, w) = input.shape();
    (0..c)
        .map(|ch| {
            let mut sum = 0.0f64;
            for y in 0..h {
                for x in 0..w {
                    sum += input.get(ch, y, x) as f64;
                }
            }
            sum / (h * w) as f64
        })
        .collect()
}
