//! Fixed-layout little-endian binary formats.
//!
//! Feature matrix (`RDCF`), 32-byte header:
//!
//! | offset | size | field                               |
//! |-------:|-----:|-------------------------------------|
//! | 0      | 4    | magic `RDCF`                        |
//! | 4      | 4    | version, u32 = 1                    |
//! | 8      | 8    | n_samples, u64                      |
//! | 16     | 8    | n_features, u64                     |
//! | 24     | 1    | dtype, 1 = binary32                 |
//! | 25     | 1    | has_labels, 0 or 1                  |
//! | 26     | 6    | reserved, zero                      |
//!
//! followed by `n_samples * n_features` f32 values row-major and, when
//! `has_labels = 1`, `n_samples` i32 labels.
//!
//! SVM model (`RDSM`), 32-byte header: magic, u32 version = 1, u64
//! class_count, u64 n_features, f64 bias value `B`; then `class_count` i32
//! class labels and `class_count * (n_features + 1)` f64 weights, one row per
//! class with the bias weight last.
//!
//! Raw images (`RDIM`), 29-byte header: magic, u32 version = 1, u64 count,
//! u32 channels, u32 height, u32 width, u8 has_labels; then `count` images
//! of planar u8 pixels (channel, row, column) and, when present, `count` i32
//! labels after the last image.
//!
//! Readers validate the header and compare the size it implies with the
//! actual file length before allocating anything.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::svm::SvmModel;

pub const FEATURE_MAGIC: &[u8; 4] = b"RDCF";
pub const MODEL_MAGIC: &[u8; 4] = b"RDSM";
pub const IMAGE_MAGIC: &[u8; 4] = b"RDIM";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;

pub const FEATURE_HEADER_LEN: u64 = 32;
pub const MODEL_HEADER_LEN: u64 = 32;
pub const IMAGE_HEADER_LEN: u64 = 29;

const IO_CHUNK: usize = 1 << 20;

fn open(path: &Path) -> Result<(File, u64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    Ok((file, len))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads a fixed header, reporting a short file as a corrupt header.
fn read_header<const N: usize>(path: &Path, file: &mut File, len: u64) -> Result<[u8; N]> {
    if len < N as u64 {
        return Err(corrupt(path, format!("file is {len} bytes, header needs {N}")));
    }
    let mut buf = [0u8; N];
    file.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn check_magic_version(path: &Path, header: &[u8], magic: &[u8; 4]) -> Result<()> {
    if &header[..4] != magic {
        return Err(corrupt(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&header[..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    Ok(())
}

fn u64_at(header: &[u8], offset: usize) -> u64 {
    u64::from_le_bytes(header[offset..offset + 8].try_into().unwrap())
}

fn u32_at(header: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(header[offset..offset + 4].try_into().unwrap())
}

fn expect_len(path: &Path, expected: Option<u64>, actual: u64) -> Result<()> {
    let expected = expected.ok_or_else(|| corrupt(path, "header sizes overflow"))?;
    if expected != actual {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual,
        });
    }
    Ok(())
}

fn to_usize(path: &Path, v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| corrupt(path, format!("count {v} does not fit in memory")))
}

/// Reads `count` little-endian items of `SIZE` bytes each.
fn read_items<R: Read, T, const SIZE: usize>(
    path: &Path,
    reader: &mut R,
    count: usize,
    decode: impl Fn([u8; SIZE]) -> T,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0u8; IO_CHUNK - IO_CHUNK % SIZE];
    let mut remaining = count * SIZE;
    while remaining > 0 {
        let n = remaining.min(buf.len());
        reader
            .read_exact(&mut buf[..n])
            .map_err(|e| Error::io(path, e))?;
        out.extend(
            buf[..n]
                .chunks_exact(SIZE)
                .map(|c| decode(c.try_into().unwrap())),
        );
        remaining -= n;
    }
    Ok(out)
}

fn read_labels<R: Read>(path: &Path, reader: &mut R, count: usize, offset: u64) -> Result<Vec<u32>> {
    let raw = read_items(path, reader, count, i32::from_le_bytes)?;
    raw.iter()
        .enumerate()
        .map(|(i, &l)| {
            u32::try_from(l).map_err(|_| Error::Decode {
                path: path.to_path_buf(),
                offset: offset + 4 * i as u64,
                reason: format!("negative label {l}"),
            })
        })
        .collect()
}

fn label_bytes(path: &Path, labels: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(labels.len() * 4);
    for &l in labels {
        let v = i32::try_from(l)
            .map_err(|_| Error::invalid(format!("{}: label {l} exceeds i32", path.display())))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn feature_header(n_samples: usize, n_features: usize, has_labels: bool) -> [u8; 32] {
    let mut h = [0u8; 32];
    h[..4].copy_from_slice(FEATURE_MAGIC);
    h[4..8].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    h[8..16].copy_from_slice(&(n_samples as u64).to_le_bytes());
    h[16..24].copy_from_slice(&(n_features as u64).to_le_bytes());
    h[24] = DTYPE_F32;
    h[25] = has_labels as u8;
    h
}

pub fn write_features(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = create(path)?;
    let mut w = BufWriter::with_capacity(IO_CHUNK, file);
    let io = |e| Error::io(path, e);
    w.write_all(&feature_header(
        matrix.n_samples(),
        matrix.n_features(),
        matrix.labels().is_some(),
    ))
    .map_err(io)?;
    for chunk in matrix.values().chunks(IO_CHUNK / 4) {
        let bytes: Vec<u8> = chunk.iter().flat_map(|v| v.to_le_bytes()).collect();
        w.write_all(&bytes).map_err(io)?;
    }
    if let Some(labels) = matrix.labels() {
        w.write_all(&label_bytes(path, labels)?).map_err(io)?;
    }
    let file = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    file.sync_all().map_err(io)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let (mut file, len) = open(path)?;
    let header: [u8; 32] = read_header(path, &mut file, len)?;
    check_magic_version(path, &header, FEATURE_MAGIC)?;
    let n_samples = u64_at(&header, 8);
    let n_features = u64_at(&header, 16);
    if header[24] != DTYPE_F32 {
        return Err(corrupt(path, format!("unsupported dtype {}", header[24])));
    }
    let has_labels = match header[25] {
        0 => false,
        1 => true,
        v => return Err(corrupt(path, format!("has_labels must be 0 or 1, got {v}"))),
    };
    if header[26..].iter().any(|&b| b != 0) {
        return Err(corrupt(path, "reserved bytes are not zero"));
    }
    if n_features == 0 {
        return Err(corrupt(path, "n_features is zero"));
    }
    let values_len = n_samples.checked_mul(n_features).and_then(|v| v.checked_mul(4));
    let labels_len = if has_labels { n_samples.checked_mul(4) } else { Some(0) };
    let expected = values_len
        .zip(labels_len)
        .and_then(|(a, b)| a.checked_add(b))
        .and_then(|v| v.checked_add(FEATURE_HEADER_LEN));
    expect_len(path, expected, len)?;

    let (n, m) = (to_usize(path, n_samples)?, to_usize(path, n_features)?);
    let mut reader = BufReader::with_capacity(IO_CHUNK, file);
    let values = read_items(path, &mut reader, n * m, f32::from_le_bytes)?;
    let labels = if has_labels {
        let offset = FEATURE_HEADER_LEN + 4 * (n * m) as u64;
        Some(read_labels(path, &mut reader, n, offset)?)
    } else {
        None
    };
    FeatureMatrix::new(n, m, values, labels).map_err(|e| corrupt(path, e.to_string()))
}

/// Writes an RDCF file in column blocks, for matrices too large to hold at once.
pub struct FeatureFileWriter {
    path: PathBuf,
    file: File,
    n_samples: usize,
    n_features: usize,
}

impl FeatureFileWriter {
    pub fn create(
        path: &Path,
        n_samples: usize,
        n_features: usize,
        labels: Option<&[u32]>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::invalid("feature file needs at least one feature"));
        }
        if let Some(l) = labels {
            if l.len() != n_samples {
                return Err(Error::DimensionMismatch {
                    what: "feature file labels",
                    expected: n_samples,
                    actual: l.len(),
                });
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let io = |e| Error::io(path, e);
        let payload = (n_samples * n_features * 4) as u64;
        file.write_all(&feature_header(n_samples, n_features, labels.is_some()))
            .map_err(io)?;
        file.set_len(FEATURE_HEADER_LEN + payload).map_err(io)?;
        if let Some(l) = labels {
            file.seek(SeekFrom::Start(FEATURE_HEADER_LEN + payload)).map_err(io)?;
            file.write_all(&label_bytes(path, l)?).map_err(io)?;
        }
        Ok(FeatureFileWriter {
            path: path.to_path_buf(),
            file,
            n_samples,
            n_features,
        })
    }

    /// Stores columns `first..first + width` given row-major as `n_samples x width`.
    pub fn write_columns(&mut self, first: usize, width: usize, block: &[f32]) -> Result<()> {
        if first + width > self.n_features || block.len() != self.n_samples * width {
            return Err(Error::invalid(format!(
                "column block {first}..{} with {} values does not fit {}x{}",
                first + width,
                block.len(),
                self.n_samples,
                self.n_features
            )));
        }
        let path = &self.path;
        let io = |e| Error::io(path, e);
        if width == 0 {
            return Ok(());
        }
        if width == self.n_features {
            self.file.seek(SeekFrom::Start(FEATURE_HEADER_LEN)).map_err(io)?;
            let mut w = BufWriter::with_capacity(IO_CHUNK, &mut self.file);
            for chunk in block.chunks(IO_CHUNK / 4) {
                let bytes: Vec<u8> = chunk.iter().flat_map(|v| v.to_le_bytes()).collect();
                w.write_all(&bytes).map_err(io)?;
            }
            return w.flush().map_err(io);
        }
        let mut bytes = Vec::with_capacity(width * 4);
        for (i, row) in block.chunks_exact(width).enumerate() {
            bytes.clear();
            bytes.extend(row.iter().flat_map(|v| v.to_le_bytes()));
            let offset = FEATURE_HEADER_LEN + ((i * self.n_features + first) * 4) as u64;
            self.file.seek(SeekFrom::Start(offset)).map_err(io)?;
            self.file.write_all(&bytes).map_err(io)?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        self.file.sync_all().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_model(model: &SvmModel, path: &Path) -> Result<()> {
    if model.classes().is_empty() {
        return Err(Error::invalid("refusing to write a model with zero classes"));
    }
    let mut bytes = Vec::with_capacity(32 + model.classes().len() * (4 + 8 * (model.n_features() + 1)));
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(model.classes().len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(model.n_features() as u64).to_le_bytes());
    bytes.extend_from_slice(&model.bias().to_le_bytes());
    bytes.extend(label_bytes(path, model.classes())?);
    bytes.extend(model.weights().iter().flat_map(|w| w.to_le_bytes()));
    let mut file = create(path)?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    file.sync_all().map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<SvmModel> {
    let (mut file, len) = open(path)?;
    let header: [u8; 32] = read_header(path, &mut file, len)?;
    check_magic_version(path, &header, MODEL_MAGIC)?;
    let classes = u64_at(&header, 8);
    let n_features = u64_at(&header, 16);
    let bias = f64::from_le_bytes(header[24..32].try_into().unwrap());
    if classes == 0 {
        return Err(corrupt(path, "class count is zero"));
    }
    let expected = n_features
        .checked_add(1)
        .and_then(|w| w.checked_mul(8))
        .and_then(|w| w.checked_add(4))
        .and_then(|per_class| per_class.checked_mul(classes))
        .and_then(|v| v.checked_add(MODEL_HEADER_LEN));
    expect_len(path, expected, len)?;
    let (c, m) = (to_usize(path, classes)?, to_usize(path, n_features)?);
    let mut reader = BufReader::new(file);
    let labels = read_labels(path, &mut reader, c, MODEL_HEADER_LEN)?;
    let weights = read_items(path, &mut reader, c * (m + 1), f64::from_le_bytes)?;
    SvmModel::new(labels, m, bias, weights).map_err(|e| corrupt(path, e.to_string()))
}

/// Contents of an RDIM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// `count * channels * height * width` planar pixels.
    pub pixels: Vec<u8>,
    pub labels: Option<Vec<u32>>,
}

impl RawImages {
    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn count(&self) -> usize {
        if self.image_len() == 0 {
            0
        } else {
            self.pixels.len() / self.image_len()
        }
    }
}

pub fn write_raw_images(images: &RawImages, path: &Path) -> Result<()> {
    let per = images.image_len();
    if per == 0 || !images.pixels.len().is_multiple_of(per) {
        return Err(Error::invalid(format!(
            "{} pixels do not form whole {}x{}x{} images",
            images.pixels.len(),
            images.channels,
            images.height,
            images.width
        )));
    }
    let count = images.count();
    if let Some(l) = &images.labels {
        if l.len() != count {
            return Err(Error::DimensionMismatch {
                what: "raw image labels",
                expected: count,
                actual: l.len(),
            });
        }
    }
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("image dimension {v} exceeds u32")))
    };
    let mut header = Vec::with_capacity(IMAGE_HEADER_LEN as usize);
    header.extend_from_slice(IMAGE_MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&(count as u64).to_le_bytes());
    header.extend_from_slice(&dim(images.channels)?.to_le_bytes());
    header.extend_from_slice(&dim(images.height)?.to_le_bytes());
    header.extend_from_slice(&dim(images.width)?.to_le_bytes());
    header.push(images.labels.is_some() as u8);
    let file = create(path)?;
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::with_capacity(IO_CHUNK, file);
    w.write_all(&header).map_err(io)?;
    w.write_all(&images.pixels).map_err(io)?;
    if let Some(l) = &images.labels {
        w.write_all(&label_bytes(path, l)?).map_err(io)?;
    }
    let file = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    file.sync_all().map_err(io)
}

pub fn read_raw_images(path: &Path) -> Result<RawImages> {
    let (mut file, len) = open(path)?;
    let header: [u8; 29] = read_header(path, &mut file, len)?;
    check_magic_version(path, &header, IMAGE_MAGIC)?;
    let count = u64_at(&header, 8);
    let (c, h, w) = (u32_at(&header, 16), u32_at(&header, 20), u32_at(&header, 24));
    if c == 0 || h == 0 || w == 0 {
        return Err(corrupt(path, format!("zero image dimension {c}x{h}x{w}")));
    }
    let has_labels = match header[28] {
        0 => false,
        1 => true,
        v => return Err(corrupt(path, format!("has_labels must be 0 or 1, got {v}"))),
    };
    let per = c as u64 * h as u64 * w as u64;
    let expected = count
        .checked_mul(per)
        .zip(if has_labels { count.checked_mul(4) } else { Some(0) })
        .and_then(|(a, b)| a.checked_add(b))
        .and_then(|v| v.checked_add(IMAGE_HEADER_LEN));
    expect_len(path, expected, len)?;
    let n = to_usize(path, count)?;
    let per = to_usize(path, per)?;
    let mut reader = BufReader::with_capacity(IO_CHUNK, file);
    let mut pixels = vec![0u8; n * per];
    reader.read_exact(&mut pixels).map_err(|e| Error::io(path, e))?;
    let labels = if has_labels {
        Some(read_labels(path, &mut reader, n, IMAGE_HEADER_LEN + (n * per) as u64)?)
    } else {
        None
    };
    Ok(RawImages {
        channels: c as usize,
        height: h as usize,
        width: w as usize,
        pixels,
        labels,
    })
}
