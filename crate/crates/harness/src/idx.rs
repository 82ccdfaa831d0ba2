//! IDX files as distributed for MNIST: a big-endian magic number, big-endian
//! `u32` dimensions, then raw unsigned bytes.

use std::fs;
use std::path::Path;

use lentropy::objective::Dataset;

use crate::error::{HarnessError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const MNIST_CLASSES: usize = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

struct IdxFile {
    dims: Vec<usize>,
    data: Vec<u8>,
}

fn read_idx(path: &Path, magic: u32) -> Result<IdxFile> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let truncated = || HarnessError::io(path, std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated IDX file"));
    let word = |i: usize| -> Result<u32> {
        let b = bytes.get(4 * i..4 * i + 4).ok_or_else(truncated)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    };
    let found = word(0)?;
    if found != magic {
        return Err(HarnessError::format(path, format!("magic number {found:#010x}, expected {magic:#010x}")));
    }
    let rank = (magic & 0xff) as usize;
    let dims: Vec<usize> = (1..=rank).map(|i| word(i).map(|d| d as usize)).collect::<Result<_>>()?;
    let header = 4 * (rank + 1);
    let body: usize = dims.iter().product();
    if bytes.len() < header + body {
        return Err(truncated());
    }
    Ok(IdxFile { dims, data: bytes[header..header + body].to_vec() })
}

/// Images scaled to `[0, 1]` with their labels.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_idx(images_path, IMAGES_MAGIC)?;
    let labels = read_idx(labels_path, LABELS_MAGIC)?;
    let (n, rows, cols) = (images.dims[0], images.dims[1], images.dims[2]);
    if labels.dims[0] != n {
        return Err(HarnessError::Consistency(format!(
            "{} declares {n} images but {} declares {} labels",
            images_path.display(),
            labels_path.display(),
            labels.dims[0]
        )));
    }
    if let Some(bad) = labels.data.iter().find(|&&l| l as usize >= MNIST_CLASSES) {
        return Err(HarnessError::format(labels_path, format!("label {bad} out of range")));
    }
    let inputs = images.data.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = labels.data.iter().map(|&l| l as usize).collect();
    Ok(Dataset::new(inputs, labels, rows * cols, MNIST_CLASSES)?)
}

pub fn load_mnist(dir: &Path, split: MnistSplit) -> Result<Dataset> {
    let (images, labels) = match split {
        MnistSplit::Train => (TRAIN_IMAGES, TRAIN_LABELS),
        MnistSplit::Test => (TEST_IMAGES, TEST_LABELS),
    };
    load_mnist_idx(&dir.join(images), &dir.join(labels))
}

/// Writes square images with inputs in `[0, 1]`, quantized to bytes.
pub fn write_mnist_idx(data: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let side = (data.dim() as f64).sqrt() as usize;
    if side * side != data.dim() {
        return Err(HarnessError::Consistency(format!("input dimension {} is not a square image", data.dim())));
    }
    if data.labels().iter().any(|&l| l > 255) {
        return Err(HarnessError::Consistency("labels must fit in a byte".into()));
    }
    let n = data.len() as u32;
    let mut img = Vec::with_capacity(16 + data.inputs().len());
    for w in [IMAGES_MAGIC, n, side as u32, side as u32] {
        img.extend_from_slice(&w.to_be_bytes());
    }
    img.extend(data.inputs().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    let mut lab = Vec::with_capacity(8 + data.len());
    for w in [LABELS_MAGIC, n] {
        lab.extend_from_slice(&w.to_be_bytes());
    }
    lab.extend(data.labels().iter().map(|&l| l as u8));
    fs::write(images_path, img).map_err(|e| HarnessError::io(images_path, e))?;
    fs::write(labels_path, lab).map_err(|e| HarnessError::io(labels_path, e))?;
    Ok(())
}
