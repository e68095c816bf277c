//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rdcnn::tensor::naive;
use rdcnn::{FeatureMatrix, ImageTensor, KernelStack, NetworkConfig};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut StdRng, c: usize, h: usize, w: usize) -> ImageTensor {
    let data = (0..c * h * w).map(|_| rng.random_range(0..=255u8) as f32).collect();
    ImageTensor::new(c, h, w, data).unwrap()
}

/// Feature value through the direct-loop tensor operations.
pub fn naive_feature(image: &ImageTensor, stack: &KernelStack, config: &NetworkConfig) -> f64 {
    let (c, h, w) = image.shape();
    let data = image.data().iter().map(|&v| config.normalization.apply(v)).collect();
    let mut current = ImageTensor::new(c, h, w, data).unwrap();
    let biases = stack.biases();
    for block in 0..stack.blocks() {
        let mut conv = if block == 0 {
            naive::conv_valid(&current, stack.input_kernel())
        } else {
            naive::conv_depthwise(&current, &stack.depthwise_kernels()[block - 1..block])
        };
        if let Some(b) = biases {
            let (c, h, w) = conv.shape();
            let shifted = conv.data().iter().map(|&v| v + b[block]).collect();
            conv = ImageTensor::new(c, h, w, shifted).unwrap();
        }
        current = naive::avg_pool_2x2(&naive::sign_activate(&conv));
    }
    naive::global_avg_pool(&current)[0]
}

/// liblinear-style L2-loss primal objective with the bias as an extra feature.
pub fn svm_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let margin = yi * xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            (1.0 - margin).max(0.0).powi(2)
        })
        .sum();
    reg + c * loss
}

#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Exact minimizer of the L2-loss SVM objective by enumerating active sets.
///
/// For a fixed set `S` of margin violators the objective is quadratic with
/// minimizer `(I + 2C sum_S x x^T) w = 2C sum_S y x`; the true optimum is the
/// one whose violators are exactly `S`.
pub fn brute_force_svm(x: &[Vec<f64>], y: &[f64], c: f64) -> Vec<f64> {
    let n = x.len();
    let d = x[0].len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << n) {
        let mut a = vec![vec![0.0; d]; d];
        let mut b = vec![0.0; d];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for s in (0..n).filter(|s| mask & (1 << s) != 0) {
            for i in 0..d {
                b[i] += 2.0 * c * y[s] * x[s][i];
                for j in 0..d {
                    a[i][j] += 2.0 * c * x[s][i] * x[s][j];
                }
            }
        }
        let w = solve(a, b);
        let consistent = (0..n).all(|s| {
            let margin = y[s] * x[s].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let active = mask & (1 << s) != 0;
            if active {
                margin <= 1.0 + 1e-9
            } else {
                margin >= 1.0 - 1e-9
            }
        });
        if consistent {
            let f = svm_objective(x, y, &w, c);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, w));
            }
        }
    }
    best.expect("some active set is consistent").1
}

/// Full sort of every gallery row by cosine similarity, ties by id.
pub fn exhaustive_knn(gallery: &FeatureMatrix, ids: &[String], query: &[f32], k: usize) -> Vec<(String, f64)> {
    let qq: f64 = query.iter().map(|&v| v as f64 * v as f64).sum();
    let mut all: Vec<(String, f64)> = gallery
        .rows()
        .zip(ids)
        .map(|(row, id)| {
            let dot: f64 = row.iter().zip(query).map(|(&a, &b)| a as f64 * b as f64).sum();
            let rr: f64 = row.iter().map(|&v| v as f64 * v as f64).sum();
            (id.clone(), (dot / (qq * rr).sqrt()).clamp(-1.0, 1.0))
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Dataset root: `RDCNN_DATA_DIR`, else `data/` at the workspace root.
pub fn data_dir() -> PathBuf {
    std::env::var_os("RDCNN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
            dir.canonicalize().unwrap_or(dir)
        })
}
