//! Slice-level primitives shared by the tensor API and the feature extractor.
//!
//! All planes are row-major. None of these allocate.

use crate::error::{Error, Result};

/// Adds the valid cross-correlation of one `h x w` plane with a `k x k` kernel
/// plane into `acc`, which holds `(h - k + 1) x (w - k + 1)` values.
///
/// Each output accumulates taps in row-major kernel order, so calling this once
/// per channel reproduces the channel, row, column summation order exactly.
pub fn correlate_accumulate(
    plane: &[f32],
    h: usize,
    w: usize,
    kernel: &[f32],
    k: usize,
    acc: &mut [f64],
) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    debug_assert_eq!(plane.len(), h * w);
    debug_assert_eq!(kernel.len(), k * k);
    debug_assert_eq!(acc.len(), oh * ow);
    for oy in 0..oh {
        let acc_row = &mut acc[oy * ow..(oy + 1) * ow];
        for ky in 0..k {
            let src_row = &plane[(oy + ky) * w..(oy + ky + 1) * w];
            for kx in 0..k {
                let weight = kernel[ky * k + kx] as f64;
                for (a, &x) in acc_row.iter_mut().zip(&src_row[kx..kx + ow]) {
                    *a += weight * x as f64;
                }
            }
        }
    }
}

#[inline]
pub fn sign(x: f64) -> f32 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of accumulator values; the accumulators come from finite data.
pub fn sign_into(src: &[f64], dst: &mut [f32]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = sign(s);
    }
}

/// Sign of stored values, rejecting NaN.
pub fn sign_checked(src: &[f32], dst: &mut [f32]) -> Result<()> {
    for (i, (d, &s)) in dst.iter_mut().zip(src).enumerate() {
        if s.is_nan() {
            return Err(Error::NonFinite { index: i });
        }
        *d = sign(s as f64);
    }
    Ok(())
}

/// 2x2 stride-2 average pooling of one `h x w` plane into `(h / 2) x (w / 2)`.
pub fn avg_pool_2x2_into(src: &[f32], h: usize, w: usize, dst: &mut [f32]) {
    let (oh, ow) = (h / 2, w / 2);
    debug_assert_eq!(dst.len(), oh * ow);
    for oy in 0..oh {
        let top = &src[2 * oy * w..2 * oy * w + 2 * ow];
        let bottom = &src[(2 * oy + 1) * w..(2 * oy + 1) * w + 2 * ow];
        let out = &mut dst[oy * ow..(oy + 1) * ow];
        for ((o, t), b) in out
            .iter_mut()
            .zip(top.chunks_exact(2))
            .zip(bottom.chunks_exact(2))
        {
            let sum = t[0] as f64 + t[1] as f64 + b[0] as f64 + b[1] as f64;
            *o = (sum / 4.0) as f32;
        }
    }
}

pub fn mean(values: &[f32]) -> f64 {
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}

/// `sum_i x[i] * y[i]` accumulated in `f64` over eight interleaved lanes.
///
/// The lane layout is fixed, so the result depends only on the inputs.
pub fn dot_f32_f64(x: &[f32], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut lanes = [0.0f64; 8];
    let xs = x.chunks_exact(8);
    let ys = y.chunks_exact(8);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (a, b) in xs.zip(ys) {
        for l in 0..8 {
            lanes[l] += a[l] as f64 * b[l];
        }
    }
    let mut tail = 0.0;
    for (&a, &b) in xr.iter().zip(yr) {
        tail += a as f64 * b;
    }
    ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5]))
        + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]))
        + tail
}

/// `y += alpha * x`.
pub fn axpy_f32_f64(alpha: f64, x: &[f32], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (b, &a) in y.iter_mut().zip(x) {
        *b += alpha * a as f64;
    }
}
