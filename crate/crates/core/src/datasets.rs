//! Benchmark ingestion (MNIST IDX, CIFAR-10 binary), the artifact's own
//! feature and label files, and retrieval preprocessing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

pub const MNIST_IMAGE_MAGIC: u32 = 2051;
pub const MNIST_LABEL_MAGIC: u32 = 2049;
pub const CIFAR_RECORD_BYTES: usize = 1 + CIFAR_PIXELS;
pub const CIFAR_PIXELS: usize = 3 * 32 * 32;
pub const NUM_CLASSES: usize = 10;

pub const FEATURE_MAGIC: &[u8; 4] = b"HLFM";
pub const LABEL_MAGIC: &[u8; 4] = b"HLLB";
/// Feature-file version byte for 32-bit payloads.
pub const FEATURE_VERSION_F32: u8 = 1;
/// Same layout with 64-bit payloads; used only inside model containers.
pub const FEATURE_VERSION_F64: u8 = 2;
const LABEL_VERSION: u8 = 1;

pub const DATA_DIR_ENV: &str = "HASHLAB_DATA_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    RawPixels,
    Precomputed,
}

/// Channel-major image geometry of a raw-pixel row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub const MNIST: ImageShape = ImageShape { channels: 1, height: 28, width: 28 };
    pub const CIFAR10: ImageShape = ImageShape { channels: 3, height: 32, width: 32 };

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Geometry implied by a benchmark feature dimension, if any.
    pub fn infer(dim: usize) -> Option<ImageShape> {
        match dim {
            784 => Some(ImageShape::MNIST),
            3072 => Some(ImageShape::CIFAR10),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub kind: FeatureKind,
    pub image_shape: Option<ImageShape>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<u8>, kind: FeatureKind, image_shape: Option<ImageShape>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape(
                "LabeledDataset::new",
                format!("{} feature rows", features.rows()),
                format!("{} labels", labels.len()),
            ));
        }
        if let Some(shape) = image_shape {
            if shape.len() != features.cols() {
                return Err(Error::shape("LabeledDataset::new", format!("{shape:?}"), format!("{} features", features.cols())));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            kind,
            image_shape,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            kind: self.kind,
            image_shape: self.image_shape,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        let features = self.features.vstack(&other.features)?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        LabeledDataset::new(features, labels, self.kind, self.image_shape)
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let classes = self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(NUM_CLASSES);
        let mut hist = vec![0; classes];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Parses an IDX file, returning its dimension sizes and payload.
fn parse_idx<'a>(bytes: &'a [u8], path: &Path, magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(Error::format("IDX", path, "truncated header"));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::format("IDX", path, format!("magic {found}, expected {magic}")));
    }
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::format("IDX", path, "truncated header"));
    }
    let dims: Vec<usize> = (0..ndims).map(|i| be_u32(bytes, 4 + 4 * i) as usize).collect();
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(Error::format(
            "IDX",
            path,
            format!("dims {dims:?} need {expected} bytes, found {}", payload.len()),
        ));
    }
    Ok((dims, payload))
}

/// Pixel byte to [0, 1], rounded through `f32` so the value survives a
/// feature-file round trip unchanged.
#[inline]
fn scale_pixel(b: u8) -> f64 {
    f64::from(f32::from(b) / 255.0)
}

/// Loads an MNIST image/label pair in IDX format.
pub fn load_mnist(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = read(images_path)?;
    let label_bytes = read(labels_path)?;
    let (idims, pixels) = parse_idx(&image_bytes, images_path, MNIST_IMAGE_MAGIC)?;
    let (ldims, labels) = parse_idx(&label_bytes, labels_path, MNIST_LABEL_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(Error::format(
            "IDX",
            labels_path,
            format!("{} labels for {} images in {}", ldims[0], idims[0], images_path.display()),
        ));
    }
    let (n, h, w) = (idims[0], idims[1], idims[2]);
    if let Some(bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(Error::format("IDX", labels_path, format!("label {bad} out of range")));
    }
    let features = Matrix::new(n, h * w, pixels.iter().map(|&b| scale_pixel(b)).collect())?;
    LabeledDataset::new(
        features,
        labels.to_vec(),
        FeatureKind::RawPixels,
        Some(ImageShape { channels: 1, height: h, width: w }),
    )
}

/// Loads and concatenates CIFAR-10 binary batches.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<LabeledDataset> {
    if batch_paths.is_empty() {
        return Err(Error::invalid("load_cifar10 needs at least one batch file"));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let path = path.as_ref();
        let bytes = read(path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD_BYTES != 0 {
            return Err(Error::format(
                "CIFAR-10",
                path,
                format!("{} bytes is not a positive multiple of {CIFAR_RECORD_BYTES}", bytes.len()),
            ));
        }
        for record in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
            if record[0] as usize >= NUM_CLASSES {
                return Err(Error::format("CIFAR-10", path, format!("label {} out of range", record[0])));
            }
            labels.push(record[0]);
            data.extend(record[1..].iter().map(|&b| scale_pixel(b)));
        }
    }
    let features = Matrix::new(labels.len(), CIFAR_PIXELS, data)?;
    LabeledDataset::new(features, labels, FeatureKind::RawPixels, Some(ImageShape::CIFAR10))
}

/// Serializes a matrix in the feature-file layout.
pub fn encode_matrix(m: &Matrix, version: u8) -> Vec<u8> {
    let width = if version == FEATURE_VERSION_F64 { 8 } else { 4 };
    let mut out = Vec::with_capacity(21 + m.as_slice().len() * width);
    out.extend_from_slice(FEATURE_MAGIC);
    out.push(version);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.as_slice() {
        if version == FEATURE_VERSION_F64 {
            out.extend_from_slice(&v.to_le_bytes());
        } else {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Parses one feature-file block from the front of `bytes`, returning the
/// matrix and the number of bytes consumed.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<(Matrix, usize)> {
    if bytes.len() < 21 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format("feature", path, "missing HLFM header"));
    }
    let version = bytes[4];
    let width = match version {
        FEATURE_VERSION_F32 => 4,
        FEATURE_VERSION_F64 => 8,
        v => return Err(Error::format("feature", path, format!("unsupported version {v}"))),
    };
    let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::format("feature", path, "n*d overflows"))?;
    let available = (bytes.len() - 21) / width;
    if available < count {
        return Err(Error::format(
            "feature",
            path,
            format!("header declares {n}x{d} = {count} values, payload holds {available}"),
        ));
    }
    let payload = &bytes[21..21 + count * width];
    let data: Vec<f64> = if width == 4 {
        payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect()
    } else {
        payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    };
    let m = Matrix::new(n, d, data).map_err(|_| Error::format("feature", path, "non-finite value"))?;
    Ok((m, 21 + count * width))
}

/// Writes `m` as a 32-bit feature file.
pub fn write_feature_file(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(m, FEATURE_VERSION_F32)).map_err(|e| Error::io(path, e))
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let (m, used) = decode_matrix(&bytes, path)?;
    if used != bytes.len() {
        return Err(Error::format(
            "feature",
            path,
            format!("{} trailing bytes after {}x{} payload", bytes.len() - used, m.rows(), m.cols()),
        ));
    }
    Ok(m)
}

pub fn write_label_file(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(13 + labels.len());
    out.extend_from_slice(LABEL_MAGIC);
    out.push(LABEL_VERSION);
    out.extend_from_slice(&(labels.len() as u64).to_le_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_label_file(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read(path)?;
    if bytes.len() < 13 || &bytes[..4] != LABEL_MAGIC {
        return Err(Error::format("label", path, "missing HLLB header"));
    }
    if bytes[4] != LABEL_VERSION {
        return Err(Error::format("label", path, format!("unsupported version {}", bytes[4])));
    }
    let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    if bytes.len() - 13 != n {
        return Err(Error::format(
            "label",
            path,
            format!("header declares {n} labels, payload holds {}", bytes.len() - 13),
        ));
    }
    Ok(bytes[13..].to_vec())
}

/// Centering and unit-norm scaling fitted on one set and replayed on others.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessor {
    pub mean: Option<Vec<f64>>,
    pub unit_norm: bool,
}

impl Preprocessor {
    pub fn fit(x: &Matrix, center: bool, unit_norm: bool) -> Preprocessor {
        Preprocessor {
            mean: center.then(|| x.column_means()),
            unit_norm,
        }
    }

    /// Subtracts the stored mean, then scales each nonzero row to unit length.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.clone();
        if let Some(mean) = &self.mean {
            if mean.len() != x.cols() {
                return Err(Error::shape("Preprocessor::apply", format!("mean of length {}", mean.len()), x.shape_str()));
            }
            for r in 0..out.rows() {
                out.row_mut(r).iter_mut().zip(mean).for_each(|(v, m)| *v -= m);
            }
        }
        if self.unit_norm {
            for r in 0..out.rows() {
                let row = out.row_mut(r);
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
        }
        Ok(out)
    }
}

/// Center (optional), then unit-normalize rows (optional). Returns the
/// transformed matrix and the column mean used (zeros when not centering).
pub fn preprocess(x: &Matrix, center: bool, unit_norm: bool) -> (Matrix, Vec<f64>) {
    let pre = Preprocessor::fit(x, center, unit_norm);
    let out = pre.apply(x).expect("mean fitted on the same matrix");
    (out, pre.mean.unwrap_or_else(|| vec![0.0; x.cols()]))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySplit {
    pub query_indices: Vec<usize>,
    pub database_indices: Vec<usize>,
    pub seed: u64,
}

/// Draws `q` query indices uniformly without replacement from [0, n); the
/// rest form the database. Both lists are ascending.
pub fn split_query(n: usize, q: usize, seed: u64) -> Result<QuerySplit> {
    if q == 0 || q >= n {
        return Err(Error::invalid(format!("query count {q} must satisfy 0 < q < n = {n}")));
    }
    let mut rng = Rng::new(seed);
    let mut chosen = vec![false; n];
    for i in rng.sample_indices(n, q) {
        chosen[i] = true;
    }
    let (query_indices, database_indices) = (0..n).partition(|&i| chosen[i]);
    Ok(QuerySplit {
        query_indices,
        database_indices,
        seed,
    })
}

/// Dataset root: `$HASHLAB_DATA_DIR`, else `./data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Standard MNIST file names under `<root>/mnist/`.
pub fn mnist_paths(root: &Path, split: Split) -> (PathBuf, PathBuf) {
    let dir = root.join("mnist");
    match split {
        Split::Train => (dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte")),
        Split::Test => (dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte")),
    }
}

/// Standard CIFAR-10 batch names under `<root>/cifar-10-batches-bin/`.
pub fn cifar10_paths(root: &Path, split: Split) -> Vec<PathBuf> {
    let dir = root.join("cifar-10-batches-bin");
    match split {
        Split::Train => (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect(),
        Split::Test => vec![dir.join("test_batch.bin")],
    }
}
