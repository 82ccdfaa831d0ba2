//! CSV datasets, synthetic blobs and input transforms.

use std::fs::File;
use std::path::Path;

use lentropy::objective::Dataset;
use lentropy::rng::{seeded, standard_normal};

use crate::error::{HarnessError, Result};

/// Reads a header row then one sample per line, label in the last column.
/// The class count is one more than the largest label.
pub fn read_csv_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let width = reader.headers().map_err(|e| HarnessError::format(path, e.to_string()))?.len();
    if width < 2 {
        return Err(HarnessError::format(path, "need at least one feature column and a label column"));
    }
    let (mut inputs, mut labels) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::format(path, e.to_string()))?;
        let bad = |what: &str| HarnessError::format(path, format!("row {}: {what}", line + 2));
        for field in record.iter().take(width - 1) {
            let v: f64 = field.trim().parse().map_err(|_| bad("non-numeric feature"))?;
            if !v.is_finite() {
                return Err(bad("non-finite feature"));
            }
            inputs.push(v);
        }
        let label: usize = record[width - 1].trim().parse().map_err(|_| bad("label must be a non-negative integer"))?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(HarnessError::format(path, "no samples"));
    }
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Ok(Dataset::new(inputs, labels, width - 1, classes)?)
}

pub fn write_csv_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let io = |e: csv::Error| HarnessError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header: Vec<String> = (0..data.dim()).map(|d| format!("x{d}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(io)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.input(i).iter().map(|v| format!("{v:?}")).collect();
        row.push(data.label(i).to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Gaussian blobs: class `c` is centred at `3·e_{c mod dim}` with isotropic
/// standard deviation `spread`; labels cycle through the classes.
pub fn gaussian_blobs(n: usize, dim: usize, classes: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || dim == 0 || classes < 2 || !(spread > 0.0) {
        return Err(HarnessError::config("blobs need n ≥ 1, dim ≥ 1, classes ≥ 2 and spread > 0"));
    }
    let mut rng = seeded(seed);
    let mut inputs = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for d in 0..dim {
            let center = if d == c % dim { 3.0 * (1 + c / dim) as f64 } else { 0.0 };
            inputs.push(center + spread * standard_normal(&mut rng));
        }
        labels.push(c);
    }
    Ok(Dataset::new(inputs, labels, dim, classes)?)
}

/// Centre-crops square images of side `side` to `crop` and averages
/// non-overlapping `pool × pool` blocks.
pub fn crop_pool(data: &Dataset, side: usize, crop: usize, pool: usize) -> Result<Dataset> {
    if side * side != data.dim() || crop > side || pool == 0 || !crop.is_multiple_of(pool) || !(side - crop).is_multiple_of(2) {
        return Err(HarnessError::config(format!(
            "cannot crop {side}×{side} inputs of dimension {} to {crop} and pool by {pool}",
            data.dim()
        )));
    }
    let out_side = crop / pool;
    let margin = (side - crop) / 2;
    let scale = 1.0 / (pool * pool) as f64;
    Ok(data.map_inputs(out_side * out_side, |src, dst| {
        for r in 0..out_side {
            for c in 0..out_side {
                let mut acc = 0.0;
                for dr in 0..pool {
                    for dc in 0..pool {
                        acc += src[(margin + r * pool + dr) * side + margin + c * pool + dc];
                    }
                }
                dst[r * out_side + c] = acc * scale;
            }
        }
    })?)
}

/// Splits off the last `fraction` of a seeded permutation as validation data.
pub fn holdout(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::config("validation_split must lie in (0, 1)"));
    }
    let n = data.len();
    let k = ((n as f64) * fraction).round() as usize;
    if k == 0 || k == n {
        return Err(HarnessError::config(format!("validation_split {fraction} leaves an empty side of {n} samples")));
    }
    let mut rng = seeded(seed);
    let order = rand_permutation(n, &mut rng);
    let (train, val) = order.split_at(n - k);
    Ok((data.select(train), data.select(val)))
}

fn rand_permutation(n: usize, rng: &mut lentropy::rng::Rng) -> Vec<usize> {
    let batch = lentropy::objective::sample_minibatch(n, n, rng).expect("n ≤ n");
    batch.into_inner()
}
