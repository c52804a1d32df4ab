//! Dataset loading (MNIST IDX, CIFAR-10 binary), train/validation splits,
//! per-channel normalization, CIFAR augmentation and mini-batching.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 10;
pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * 32 * 32;
pub const CIFAR_BATCH_RECORDS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetName {
    Mnist,
    Cifar10,
    Synthetic,
}

/// Images `[N, C, H, W]` plus one label per image.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: DatasetName,
    pub images: Tensor,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(name: DatasetName, images: Tensor, labels: Vec<u8>) -> Result<Self> {
        images.expect_rank(4, "Dataset")?;
        if images.shape()[0] != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "Dataset",
                left: images.shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange {
                label: bad as usize,
                classes: NUM_CLASSES,
            });
        }
        Ok(Dataset { name, images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[C, H, W]` of a single image.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    fn image_len(&self) -> usize {
        self.image_shape().iter().product()
    }

    /// Copies the listed images (in order) into a new batch tensor.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<u8>) {
        let len = self.image_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.images.data()[i * len..(i + 1) * len]);
            labels.push(self.labels[i]);
        }
        let [c, h, w] = self.image_shape();
        let images = Tensor::new(vec![indices.len(), c, h, w], data).expect("gathered batch is consistent");
        (images, labels)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let (images, labels) = self.gather(indices);
        Dataset {
            name: self.name,
            images,
            labels,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn format_err(format: &'static str, path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        format,
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Raw pixel bytes and `(count, rows, cols)` from an IDX image file.
pub fn parse_idx_images(bytes: &[u8], origin: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let magic = be_u32(bytes, 0).ok_or_else(|| format_err("IDX", origin, "truncated header"))?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(format_err("IDX", origin, format!("image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}")));
    }
    let header: Option<Vec<usize>> = (1..4).map(|i| be_u32(bytes, 4 * i).map(|v| v as usize)).collect();
    let [n, rows, cols]: [usize; 3] = header
        .ok_or_else(|| format_err("IDX", origin, "truncated header"))?
        .try_into()
        .expect("three header fields");
    let expected = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| format_err("IDX", origin, "image dimensions overflow"))?;
    let pixels = &bytes[16..];
    if pixels.len() != expected {
        return Err(format_err(
            "IDX",
            origin,
            format!("{} pixel bytes for {n}x{rows}x{cols} images", pixels.len()),
        ));
    }
    Ok((pixels.to_vec(), n, rows, cols))
}

pub fn parse_idx_labels(bytes: &[u8], origin: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0).ok_or_else(|| format_err("IDX", origin, "truncated header"))?;
    if magic != IDX_LABEL_MAGIC {
        return Err(format_err("IDX", origin, format!("label magic {magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4).ok_or_else(|| format_err("IDX", origin, "truncated header"))? as usize;
    let labels = &bytes[8..];
    if labels.len() != n {
        return Err(format_err("IDX", origin, format!("{} label bytes, header says {n}", labels.len())));
    }
    Ok(labels.to_vec())
}

pub fn encode_idx_images(pixels: &[u8], n: usize, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), n * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGE_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn bytes_to_unit(pixels: &[u8]) -> Vec<f32> {
    pixels.iter().map(|&p| p as f32 / 255.0).collect()
}

/// Loads an MNIST image/label IDX pair; pixels are scaled to `[0, 1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (pixels, n, rows, cols) = parse_idx_images(&read(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read(labels_path)?, labels_path)?;
    if labels.len() != n {
        return Err(format_err(
            "IDX",
            labels_path,
            format!("{} labels for {n} images", labels.len()),
        ));
    }
    let images = Tensor::new(vec![n, 1, rows, cols], bytes_to_unit(&pixels))?;
    Dataset::new(DatasetName::Mnist, images, labels).map_err(|e| format_err("IDX", labels_path, e.to_string()))
}

/// Label bytes and raw `[N, 3, 32, 32]` pixel bytes of a CIFAR-10 binary
/// batch. Any positive whole number of records is accepted; the official
/// batches hold 10000.
pub fn parse_cifar10(bytes: &[u8], origin: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(format_err(
            "CIFAR-10",
            origin,
            format!("length {} is not a positive multiple of {CIFAR_RECORD_BYTES}", bytes.len()),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD_BYTES;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD_BYTES - 1));
    for rec in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        if rec[0] as usize >= NUM_CLASSES {
            return Err(format_err("CIFAR-10", origin, format!("label {} out of range", rec[0])));
        }
        labels.push(rec[0]);
        pixels.extend_from_slice(&rec[1..]);
    }
    Ok((labels, pixels))
}

pub fn encode_cifar10(labels: &[u8], pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), labels.len() * (CIFAR_RECORD_BYTES - 1));
    let mut out = Vec::with_capacity(labels.len() * CIFAR_RECORD_BYTES);
    for (label, px) in labels.iter().zip(pixels.chunks_exact(CIFAR_RECORD_BYTES - 1)) {
        out.push(*label);
        out.extend_from_slice(px);
    }
    out
}

pub fn load_cifar10(batch_paths: &[PathBuf]) -> Result<Dataset> {
    if batch_paths.is_empty() {
        return Err(Error::invalid("no CIFAR-10 batch files given"));
    }
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for path in batch_paths {
        let (l, p) = parse_cifar10(&read(path)?, path)?;
        labels.extend(l);
        pixels.extend(p);
    }
    let images = Tensor::new(vec![labels.len(), 3, 32, 32], bytes_to_unit(&pixels))?;
    Dataset::new(DatasetName::Cifar10, images, labels)
}

/// Train and test sets as found under a data directory.
#[derive(Clone, Debug)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
}

/// Looks for the four MNIST IDX files directly in `dir` or in `dir/mnist`.
pub fn load_mnist_dir(dir: &Path) -> Result<TrainTest> {
    let base = [dir.to_path_buf(), dir.join("mnist")]
        .into_iter()
        .find(|b| b.join("train-images-idx3-ubyte").exists())
        .ok_or_else(|| {
            Error::io(
                dir.join("train-images-idx3-ubyte"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "MNIST IDX files not found"),
            )
        })?;
    Ok(TrainTest {
        train: load_mnist_idx(&base.join("train-images-idx3-ubyte"), &base.join("train-labels-idx1-ubyte"))?,
        test: load_mnist_idx(&base.join("t10k-images-idx3-ubyte"), &base.join("t10k-labels-idx1-ubyte"))?,
    })
}

/// Looks for `data_batch_{1..5}.bin` and `test_batch.bin` in `dir`,
/// `dir/cifar-10-batches-bin` or `dir/cifar10`.
pub fn load_cifar10_dir(dir: &Path) -> Result<TrainTest> {
    let candidates = [
        dir.to_path_buf(),
        dir.join("cifar-10-batches-bin"),
        dir.join("cifar10"),
    ];
    let base = candidates
        .iter()
        .find(|b| b.join("test_batch.bin").exists())
        .cloned()
        .ok_or_else(|| {
            Error::io(
                dir.join("test_batch.bin"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "CIFAR-10 batches not found"),
            )
        })?;
    let train_paths: Vec<PathBuf> = (1..=5).map(|i| base.join(format!("data_batch_{i}.bin"))).collect();
    Ok(TrainTest {
        train: load_cifar10(&train_paths)?,
        test: load_cifar10(&[base.join("test_batch.bin")])?,
    })
}

// ---------------------------------------------------------------------------
// Splits

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub val_fraction: f32,
    pub seed: u64,
}

impl SplitSpec {
    /// 15% of MNIST training data and 10% of CIFAR-10 is held out.
    pub fn default_for(name: DatasetName, seed: u64) -> Self {
        let val_fraction = match name {
            DatasetName::Cifar10 => 0.10,
            _ => 0.15,
        };
        SplitSpec { val_fraction, seed }
    }
}

/// Shuffles `0..n` with the split seed; the last `floor(fraction * n)`
/// positions become validation indices.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.val_fraction > 0.0 && spec.val_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction {} not in (0, 1)",
            spec.val_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_val = (spec.val_fraction as f64 * n as f64).floor() as usize;
    let val = perm.split_off(n - n_val);
    Ok((perm, val))
}

pub fn split_train_val(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, val) = split_indices(dataset.len(), spec)?;
    Ok((dataset.subset(&train), dataset.subset(&val)))
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-channel mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Normalization {
    pub fn fit(dataset: &Dataset) -> Self {
        let [c, h, w] = dataset.image_shape();
        let plane = h * w;
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        for img in dataset.images.data().chunks_exact(c * plane) {
            for ch in 0..c {
                for &v in &img[ch * plane..(ch + 1) * plane] {
                    sum[ch] += v as f64;
                    sq[ch] += (v as f64) * (v as f64);
                }
            }
        }
        let count = (dataset.len() * plane) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| ((s / count - m * m).max(0.0).sqrt().max(1e-8)) as f32)
            .collect();
        Normalization {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            std,
        }
    }

    pub fn apply(&self, dataset: &mut Dataset) {
        let [c, h, w] = dataset.image_shape();
        let plane = h * w;
        for img in dataset.images.data_mut().chunks_exact_mut(c * plane) {
            for ch in 0..c {
                let (m, s) = (self.mean[ch], self.std[ch]);
                for v in &mut img[ch * plane..(ch + 1) * plane] {
                    *v = (*v - m) / s;
                }
            }
        }
    }
}

/// Train, validation and test sets, normalized with training statistics.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub normalization: Normalization,
}

impl Splits {
    pub fn prepare(data: TrainTest, spec: &SplitSpec) -> Result<Self> {
        let (mut train, mut val) = split_train_val(&data.train, spec)?;
        let mut test = data.test;
        let normalization = Normalization::fit(&train);
        for d in [&mut train, &mut val, &mut test] {
            normalization.apply(d);
        }
        Ok(Splits {
            train,
            val,
            test,
            normalization,
        })
    }
}

// ---------------------------------------------------------------------------
// Augmentation

pub const AUGMENT_PAD: usize = 4;

/// Crops a `H x W` window at `(dy, dx)` from the image zero-padded by
/// [`AUGMENT_PAD`] on every side, optionally mirrored left-right. Offset
/// `(4, 4)` without flip is the identity.
pub fn crop_flip(image: &[f32], c: usize, h: usize, w: usize, dy: usize, dx: usize, flip: bool) -> Vec<f32> {
    let mut out = vec![0.0f32; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            let sy = (y + dy) as isize - AUGMENT_PAD as isize;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for x in 0..w {
                let sx = (x + dx) as isize - AUGMENT_PAD as isize;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                let ox = if flip { w - 1 - x } else { x };
                out[(ch * h + y) * w + ox] = image[(ch * h + sy as usize) * w + sx as usize];
            }
        }
    }
    out
}

/// Random pad-4 crop and horizontal flip (p = 0.5) applied to each image of
/// a `[B, C, H, W]` batch in place.
pub fn augment_cifar<R: Rng + ?Sized>(batch: &mut Tensor, rng: &mut R) -> Result<()> {
    batch.expect_rank(4, "augment_cifar")?;
    let [_, c, h, w] = [batch.shape()[0], batch.shape()[1], batch.shape()[2], batch.shape()[3]];
    for img in batch.data_mut().chunks_exact_mut(c * h * w) {
        let dy = rng.random_range(0..=2 * AUGMENT_PAD);
        let dx = rng.random_range(0..=2 * AUGMENT_PAD);
        let flip = rng.random_bool(0.5);
        let out = crop_flip(img, c, h, w, dy, dx, flip);
        img.copy_from_slice(&out);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Batching

/// Deterministic per-epoch example order: a function of `(seed, epoch)` only.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

pub struct Batches<'a> {
    dataset: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches<'_> {
    type Item = (Tensor, Vec<u8>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.dataset.gather(&self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Batches<'_> {}

/// Shuffled mini-batches for one epoch; the final partial batch is kept.
pub fn batches(dataset: &Dataset, batch_size: usize, seed: u64, epoch: usize) -> Batches<'_> {
    assert!(batch_size > 0, "batch size must be positive");
    Batches {
        dataset,
        order: epoch_order(dataset.len(), seed, epoch),
        batch_size,
        pos: 0,
    }
}

/// Batches in storage order, for evaluation.
pub fn sequential_batches(dataset: &Dataset, batch_size: usize) -> Batches<'_> {
    assert!(batch_size > 0, "batch size must be positive");
    Batches {
        dataset,
        order: (0..dataset.len()).collect(),
        batch_size,
        pos: 0,
    }
}
