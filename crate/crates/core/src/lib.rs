//! Training-free image features from random depthwise networks with sign
//! activations, plus the linear SVM, retrieval and divergence tooling used to
//! evaluate them.
//!
//! Each feature comes from its own chain: a random `k x k` kernel over all
//! input channels, then `blocks - 1` random depthwise kernels, each followed
//! by `sign` and 2x2 average pooling, and finally a global average.
//!
//! ```
//! use rdcnn::{extract_features, ImageTensor, NetworkConfig};
//!
//! let image = ImageTensor::from_fn(1, 12, 12, |_, y, x| ((x * y) % 255) as f32).unwrap();
//! let config = NetworkConfig::new(3, 1, 16, 1).with_seed(7);
//! let features = extract_features(&[image], None, &config).unwrap();
//! assert_eq!(features.n_features(), 16);
//! assert!(features.row(0).iter().all(|v| (-1.0..=1.0).contains(v)));
//! ```

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod features;
pub mod network;
pub mod persistence;
pub mod retrieval;
pub mod rng;
pub mod svm;
pub mod tensor;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use network::{
    extract_feature, extract_features, extract_features_to_file, extract_features_with_stacks,
    generate_kernel_stacks, FeatureExtractor, KernelStack, NetworkConfig, Normalization,
};
pub use svm::{train, SvmConfig, SvmModel};
pub use tensor::{ImageTensor, Kernel};
