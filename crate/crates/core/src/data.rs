//! Loaders for IDX (MNIST), CIFAR and STL-10 binaries and RDIM files, plus
//! image augmentation.
//!
//! Loaded images keep raw pixel values in `[0, 255]`; scaling happens in the
//! network according to its [`Normalization`](crate::network::Normalization).

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::persistence::{read_raw_images, RawImages};
use crate::rng::Stream;
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}, expected train or test"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

/// Decoded images with labels.
///
/// `labels` is `None` only for unlabeled RDIM files, in which case
/// `class_count` is 0.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub images: Vec<ImageTensor>,
    pub labels: Option<Vec<u32>>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        images: Vec<ImageTensor>,
        labels: Option<Vec<u32>>,
        class_count: usize,
    ) -> Result<Self> {
        if let Some(first) = images.first() {
            if let Some(bad) = images.iter().position(|im| im.shape() != first.shape()) {
                return Err(Error::invalid(format!(
                    "image {bad} has shape {:?}, image 0 has {:?}",
                    images[bad].shape(),
                    first.shape()
                )));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != images.len() {
                return Err(Error::DimensionMismatch {
                    what: "dataset labels",
                    expected: images.len(),
                    actual: labels.len(),
                });
            }
            if class_count == 0 {
                return Err(Error::invalid("labeled dataset needs a positive class count"));
            }
            if let Some(&l) = labels.iter().find(|&&l| l as usize >= class_count) {
                return Err(Error::invalid(format!("label {l} out of range for {class_count} classes")));
            }
        }
        Ok(Dataset {
            name: name.into(),
            images,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `(channels, height, width)` of every image, or `None` when empty.
    pub fn shape(&self) -> Option<(usize, usize, usize)> {
        self.images.first().map(ImageTensor::shape)
    }

    /// Keeps only the first `n` images.
    pub fn truncate(&mut self, n: usize) {
        self.images.truncate(n);
        if let Some(labels) = &mut self.labels {
            labels.truncate(n);
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn decode_err(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| decode_err(path, bytes.len(), "file ends inside the header"))
}

fn check_idx_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(path, bytes, 0)?;
    if magic != expected {
        return Err(decode_err(
            path,
            0,
            format!("bad magic {magic:#010x}, expected {expected:#010x}"),
        ));
    }
    Ok(())
}

fn pixels_to_image(pixels: &[u8], channels: usize, height: usize, width: usize) -> ImageTensor {
    let data = pixels.iter().map(|&p| p as f32).collect();
    ImageTensor::from_parts_unchecked(channels, height, width, data)
}

fn class_count_of(labels: &[u32]) -> usize {
    labels.iter().max().map_or(1, |&m| m as usize + 1)
}

/// Loads an IDX image file and its label file. With `pad_to_32`, 28x28
/// images are zero-padded by 2 pixels on every side.
pub fn load_idx(images_path: &Path, labels_path: &Path, pad_to_32: bool) -> Result<Dataset> {
    let img = read_file(images_path)?;
    let lab = read_file(labels_path)?;
    check_idx_magic(images_path, &img, 0x0000_0803)?;
    check_idx_magic(labels_path, &lab, 0x0000_0801)?;
    let n = be_u32(images_path, &img, 4)? as usize;
    let rows = be_u32(images_path, &img, 8)? as usize;
    let cols = be_u32(images_path, &img, 12)? as usize;
    let n_labels = be_u32(labels_path, &lab, 4)? as usize;
    if rows == 0 || cols == 0 {
        return Err(decode_err(images_path, 8, format!("empty image size {rows}x{cols}")));
    }
    if n != n_labels {
        return Err(decode_err(
            labels_path,
            4,
            format!("{n_labels} labels for {n} images"),
        ));
    }
    let image_len = rows * cols;
    let expected = 16 + n * image_len;
    if img.len() != expected {
        return Err(decode_err(
            images_path,
            img.len().min(expected),
            format!("{n} images of {rows}x{cols} need {expected} bytes, file has {}", img.len()),
        ));
    }
    if lab.len() != 8 + n {
        return Err(decode_err(
            labels_path,
            lab.len().min(8 + n),
            format!("{n} labels need {} bytes, file has {}", 8 + n, lab.len()),
        ));
    }
    let labels: Vec<u32> = lab[8..].iter().map(|&l| l as u32).collect();
    let pad = if pad_to_32 {
        if rows > 32 || cols > 32 {
            return Err(Error::invalid(format!("cannot pad {rows}x{cols} images to 32x32")));
        }
        Some(((32 - rows) / 2, (32 - cols) / 2))
    } else {
        None
    };
    let images = img[16..]
        .par_chunks_exact(image_len)
        .map(|px| match pad {
            None => pixels_to_image(px, 1, rows, cols),
            Some((top, left)) => {
                let mut data = vec![0.0f32; 32 * 32];
                for y in 0..rows {
                    for x in 0..cols {
                        data[(y + top) * 32 + x + left] = px[y * cols + x] as f32;
                    }
                }
                ImageTensor::from_parts_unchecked(1, 32, 32, data)
            }
        })
        .collect();
    let class_count = class_count_of(&labels);
    Dataset::new("idx", images, Some(labels), class_count)
}

/// First existing directory among `dir` and `dir/<sub>` holding `probe`.
fn locate(dir: &Path, subdirs: &[&str], probe: &str) -> PathBuf {
    if dir.join(probe).exists() {
        return dir.to_path_buf();
    }
    subdirs
        .iter()
        .map(|s| dir.join(s))
        .find(|d| d.join(probe).exists())
        .unwrap_or_else(|| dir.to_path_buf())
}

/// Loads MNIST from a directory of the four standard IDX files.
pub fn load_mnist(dir: &Path, split: Split, pad_to_32: bool) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = format!("{prefix}-images-idx3-ubyte");
    let dir = locate(dir, &["mnist"], &images);
    let mut ds = load_idx(
        &dir.join(&images),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        pad_to_32,
    )?;
    ds.name = "mnist".into();
    ds.class_count = ds.class_count.max(10);
    Ok(ds)
}

const CIFAR_PIXELS: usize = 3 * 32 * 32;

/// Decodes one CIFAR binary batch file.
pub fn decode_cifar_batch(path: &Path, bytes: &[u8], variant: CifarVariant) -> Result<(Vec<ImageTensor>, Vec<u32>)> {
    let label_bytes = match variant {
        CifarVariant::Cifar10 => 1,
        CifarVariant::Cifar100 => 2,
    };
    let record = label_bytes + CIFAR_PIXELS;
    if bytes.is_empty() || !bytes.len().is_multiple_of(record) {
        return Err(decode_err(
            path,
            bytes.len() - bytes.len() % record,
            format!(
                "{} bytes is not a whole number of {record}-byte records (expected {} records)",
                bytes.len(),
                bytes.len() / record + 1
            ),
        ));
    }
    let (images, labels) = bytes
        .par_chunks_exact(record)
        .map(|rec| {
            // CIFAR-100 records start with the coarse label, then the fine one
            let label = rec[label_bytes - 1] as u32;
            (pixels_to_image(&rec[label_bytes..], 3, 32, 32), label)
        })
        .unzip();
    Ok((images, labels))
}

fn load_cifar_files(files: &[(PathBuf, usize)], variant: CifarVariant) -> Result<(Vec<ImageTensor>, Vec<u32>)> {
    let parts: Vec<(Vec<ImageTensor>, Vec<u32>)> = files
        .par_iter()
        .map(|(path, records)| {
            let bytes = read_file(path)?;
            let record = CIFAR_PIXELS + if variant == CifarVariant::Cifar10 { 1 } else { 2 };
            if bytes.len() != records * record {
                return Err(decode_err(
                    path,
                    bytes.len().min(records * record),
                    format!(
                        "expected {records} records of {record} bytes ({} bytes), file has {}",
                        records * record,
                        bytes.len()
                    ),
                ));
            }
            decode_cifar_batch(path, &bytes, variant)
        })
        .collect::<Result<_>>()?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (im, la) in parts {
        images.extend(im);
        labels.extend(la);
    }
    Ok((images, labels))
}

/// Loads CIFAR-10 (`data_batch_1..5.bin`, `test_batch.bin`) or CIFAR-100
/// (`train.bin`, `test.bin`, fine labels) from `dir` or its standard
/// extracted subdirectory.
pub fn load_cifar(dir: &Path, variant: CifarVariant, split: Split) -> Result<Dataset> {
    let (files, name, classes): (Vec<(String, usize)>, &str, usize) = match (variant, split) {
        (CifarVariant::Cifar10, Split::Train) => (
            (1..=5).map(|i| (format!("data_batch_{i}.bin"), 10_000)).collect(),
            "cifar10",
            10,
        ),
        (CifarVariant::Cifar10, Split::Test) => (vec![("test_batch.bin".into(), 10_000)], "cifar10", 10),
        (CifarVariant::Cifar100, Split::Train) => (vec![("train.bin".into(), 50_000)], "cifar100", 100),
        (CifarVariant::Cifar100, Split::Test) => (vec![("test.bin".into(), 10_000)], "cifar100", 100),
    };
    let dir = locate(dir, &["cifar-10-batches-bin", "cifar-100-binary", name], &files[0].0);
    let paths: Vec<(PathBuf, usize)> = files.into_iter().map(|(f, n)| (dir.join(f), n)).collect();
    let (images, labels) = load_cifar_files(&paths, variant)?;
    Dataset::new(name, images, Some(labels), classes)
}

const STL_SIDE: usize = 96;
const STL_PIXELS: usize = 3 * STL_SIDE * STL_SIDE;

/// Decodes STL-10 images, stored column-major per channel, and 1-based labels.
pub fn decode_stl10(
    images_path: &Path,
    image_bytes: &[u8],
    labels_path: &Path,
    label_bytes: &[u8],
) -> Result<(Vec<ImageTensor>, Vec<u32>)> {
    if !image_bytes.len().is_multiple_of(STL_PIXELS) {
        return Err(decode_err(
            images_path,
            image_bytes.len() - image_bytes.len() % STL_PIXELS,
            format!(
                "{} bytes is not a whole number of {STL_PIXELS}-byte images (expected {} records)",
                image_bytes.len(),
                image_bytes.len() / STL_PIXELS + 1
            ),
        ));
    }
    let n = image_bytes.len() / STL_PIXELS;
    if label_bytes.len() != n {
        return Err(decode_err(
            labels_path,
            label_bytes.len().min(n),
            format!("expected {n} records, label file has {}", label_bytes.len()),
        ));
    }
    if let Some(i) = label_bytes.iter().position(|&l| l == 0) {
        return Err(decode_err(labels_path, i, "label 0 in a 1-based label file"));
    }
    let labels = label_bytes.iter().map(|&l| l as u32 - 1).collect();
    let images = image_bytes
        .par_chunks_exact(STL_PIXELS)
        .map(|px| {
            let mut data = vec![0.0f32; STL_PIXELS];
            for c in 0..3 {
                let plane = c * STL_SIDE * STL_SIDE;
                for col in 0..STL_SIDE {
                    for row in 0..STL_SIDE {
                        data[plane + row * STL_SIDE + col] = px[plane + col * STL_SIDE + row] as f32;
                    }
                }
            }
            ImageTensor::from_parts_unchecked(3, STL_SIDE, STL_SIDE, data)
        })
        .collect();
    Ok((images, labels))
}

/// Loads the labeled STL-10 split (`{train,test}_X.bin`, `{train,test}_y.bin`).
pub fn load_stl10(dir: &Path, split: Split) -> Result<Dataset> {
    let (prefix, expected) = match split {
        Split::Train => ("train", 5_000),
        Split::Test => ("test", 8_000),
    };
    let x_name = format!("{prefix}_X.bin");
    let dir = locate(dir, &["stl10_binary", "stl10"], &x_name);
    let x_path = dir.join(&x_name);
    let y_path = dir.join(format!("{prefix}_y.bin"));
    let (x, y) = rayon::join(|| read_file(&x_path), || read_file(&y_path));
    let (x, y) = (x?, y?);
    if x.len() != expected * STL_PIXELS {
        return Err(decode_err(
            &x_path,
            x.len().min(expected * STL_PIXELS),
            format!("expected {expected} records ({} bytes), file has {}", expected * STL_PIXELS, x.len()),
        ));
    }
    let (images, labels) = decode_stl10(&x_path, &x, &y_path, &y)?;
    Dataset::new("stl10", images, Some(labels), 10)
}

/// Converts decoded RDIM contents into a dataset.
pub fn raw_to_dataset(raw: RawImages, name: impl Into<String>) -> Result<Dataset> {
    let len = raw.image_len();
    if len == 0 {
        return Err(Error::invalid("raw images have an empty shape"));
    }
    let images = raw
        .pixels
        .par_chunks_exact(len)
        .map(|px| pixels_to_image(px, raw.channels, raw.height, raw.width))
        .collect();
    let class_count = raw.labels.as_deref().map_or(0, class_count_of);
    Dataset::new(name, images, raw.labels, class_count)
}

pub fn load_raw(path: &Path) -> Result<Dataset> {
    raw_to_dataset(read_raw_images(path)?, "raw")
}

/// Pixels of `images` as `u8`, rounding and clamping to `[0, 255]`.
pub fn dataset_to_raw(ds: &Dataset) -> Result<RawImages> {
    let (channels, height, width) = ds
        .shape()
        .ok_or_else(|| Error::invalid("cannot store an empty dataset"))?;
    let pixels = ds
        .images
        .iter()
        .flat_map(|im| im.data().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8))
        .collect();
    Ok(RawImages {
        channels,
        height,
        width,
        pixels,
        labels: ds.labels.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Augmentation {
    HFlip,
    /// Counter-clockwise rotation in degrees.
    Rotate(f64),
    /// Zeroes a `size x size` square placed uniformly from `seed`.
    Cutout { size: usize, seed: u64 },
}

pub const AUGMENTS_PER_IMAGE: usize = 10;
pub const MAX_ROTATION_DEGREES: f64 = 15.0;

pub fn augment(image: &ImageTensor, op: Augmentation) -> Result<ImageTensor> {
    let (c, h, w) = image.shape();
    let src = image.data();
    let mut out = vec![0.0f32; src.len()];
    match op {
        Augmentation::HFlip => {
            for (dst_row, src_row) in out.chunks_exact_mut(w).zip(src.chunks_exact(w)) {
                for (d, s) in dst_row.iter_mut().zip(src_row.iter().rev()) {
                    *d = *s;
                }
            }
        }
        Augmentation::Rotate(degrees) => {
            if !degrees.is_finite() {
                return Err(Error::invalid("rotation angle must be finite"));
            }
            let (sin, cos) = exact_sin_cos(degrees);
            let cy = (h as f64 - 1.0) / 2.0;
            let cx = (w as f64 - 1.0) / 2.0;
            for y in 0..h {
                for x in 0..w {
                    let dx = x as f64 - cx;
                    let dy = y as f64 - cy;
                    let sx = (cx + cos * dx - sin * dy).round();
                    let sy = (cy + sin * dx + cos * dy).round();
                    if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
                        continue;
                    }
                    let (sx, sy) = (sx as usize, sy as usize);
                    for ch in 0..c {
                        out[ch * h * w + y * w + x] = src[ch * h * w + sy * w + sx];
                    }
                }
            }
        }
        Augmentation::Cutout { size, seed } => {
            if size == 0 || size > h.min(w) {
                return Err(Error::invalid(format!(
                    "cutout size {size} must be in 1..={}",
                    h.min(w)
                )));
            }
            out.copy_from_slice(src);
            let mut stream = Stream::new(seed, 0);
            let top = stream.below((h - size + 1) as u64) as usize;
            let left = stream.below((w - size + 1) as u64) as usize;
            for ch in 0..c {
                for y in top..top + size {
                    let row = ch * h * w + y * w;
                    out[row + left..row + left + size].fill(0.0);
                }
            }
        }
    }
    Ok(ImageTensor::from_parts_unchecked(c, h, w, out))
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90.
fn exact_sin_cos(degrees: f64) -> (f64, f64) {
    let d = degrees.rem_euclid(360.0);
    match d {
        0.0 => (0.0, 1.0),
        90.0 => (1.0, 0.0),
        180.0 => (0.0, -1.0),
        270.0 => (-1.0, 0.0),
        _ => d.to_radians().sin_cos(),
    }
}

/// Random flip plus a rotation uniform in `[-15, 15]` degrees, drawn from
/// stream `index` of `seed`.
pub fn random_augmentation(image: &ImageTensor, seed: u64, index: u64) -> Result<ImageTensor> {
    let mut stream = Stream::new(seed, index);
    let flip = stream.uniform() < 0.5;
    let angle = MAX_ROTATION_DEGREES * (2.0 * stream.uniform() - 1.0);
    let base = if flip {
        augment(image, Augmentation::HFlip)?
    } else {
        image.clone()
    };
    augment(&base, Augmentation::Rotate(angle))
}

/// `per_image` random augmentations of every image, grouped by original:
/// output `i * per_image + j` is augmentation `j` of image `i`.
pub fn augment_images(images: &[ImageTensor], per_image: usize, seed: u64) -> Result<Vec<ImageTensor>> {
    (0..images.len() * per_image)
        .into_par_iter()
        .map(|k| random_augmentation(&images[k / per_image], seed, k as u64))
        .collect()
}
