//! A single training run and its artifact directory.
//!
//! Layout of a run directory:
//!
//! | file | contents |
//! |---|---|
//! | `config.toml` | resolved configuration, enough to re-run |
//! | `env.json` | build and host stamp |
//! | `metrics.csv` | one row per epoch, row 0 is the initial point |
//! | `trace_inner.jsonl` | per-update inner-loop diagnostics, when enabled |
//! | `summary.json` | final and best metrics |
//! | `params.bin` | final weights, little-endian `f64` |
//! | `divergence.json` | written instead of `params.bin` when a run diverges |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lentropy::net::{MlpObjective, MlpSpec};
use lentropy::objective::{subsample, Dataset};
use lentropy::optimize::{heuristic_gamma_calibration, Calibration, CalibrationSettings};
use lentropy::rng::seeded;
use lentropy::train::{train, InnerTrace, Method, RunRecord, TrainConfig, TrainObserver};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig, InputTransform};
use crate::data::{crop_pool, gaussian_blobs, holdout, read_csv_dataset};
use crate::error::{HarnessError, Result};
use crate::idx::{load_mnist, MnistSplit, MNIST_CLASSES};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const ENV_FILE: &str = "env.json";
pub const TRACE_FILE: &str = "trace_inner.jsonl";
pub const DIVERGENCE_FILE: &str = "divergence.json";

pub const METRICS_HEADER: [&str; 9] =
    ["epoch", "effective_epochs", "train_loss", "val_error_pct", "gamma", "grad_norm", "angle_deg", "wall_ms", "seed"];

/// Directory used for MNIST when the config names none.
pub fn default_mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/mnist"))
}

/// Training and validation data after subsetting and input transforms.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: Dataset,
    pub validation: Option<Dataset>,
    pub note: String,
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    let d = &cfg.data;
    let split = |data: Dataset| -> Result<(Dataset, Option<Dataset>)> {
        if cfg.validation_split > 0.0 {
            let (t, v) = holdout(&data, cfg.validation_split, cfg.data.subset_seed)?;
            Ok((t, Some(v)))
        } else {
            Ok((data, None))
        }
    };
    let (mut train, mut validation, note) = match d.source {
        DataSource::Mnist => {
            let dir = d.path.as_ref().map(PathBuf::from).unwrap_or_else(default_mnist_dir);
            let train = load_mnist(&dir, MnistSplit::Train)?;
            let test = load_mnist(&dir, MnistSplit::Test)?;
            (train, Some(test), "validation error is measured on the MNIST test set".to_string())
        }
        DataSource::Csv => {
            let path = PathBuf::from(d.path.as_ref().expect("validated"));
            let data = read_csv_dataset(&path)?;
            match &d.validation_path {
                Some(v) => (data, Some(read_csv_dataset(Path::new(v))?), format!("validation data from {v}")),
                None => {
                    let (t, v) = split(data)?;
                    (t, v, "validation data held out from the training file".to_string())
                }
            }
        }
        DataSource::Blobs => {
            let data = gaussian_blobs(d.blobs_n, d.blobs_dim, d.blobs_classes, d.blobs_spread, d.subset_seed)?;
            let (t, v) = split(data)?;
            (t, v, "synthetic Gaussian blobs".to_string())
        }
    };
    if let Some(k) = d.train_subset {
        if k < train.len() {
            train = subsample(&train, k, d.subset_seed, d.stratified)?;
        }
    }
    if let (Some(k), Some(v)) = (d.val_subset, validation.as_ref()) {
        if k < v.len() {
            validation = Some(subsample(v, k, d.subset_seed.wrapping_add(1), d.stratified)?);
        }
    }
    if d.transform == InputTransform::CropPool {
        let side = (train.dim() as f64).sqrt().round() as usize;
        train = crop_pool(&train, side, d.crop, d.pool)?;
        validation = validation.map(|v| crop_pool(&v, side, d.crop, d.pool)).transpose()?;
    }
    if let Some(v) = &validation {
        if v.dim() != train.dim() {
            return Err(HarnessError::Consistency(format!(
                "training inputs have dimension {} but validation inputs have {}",
                train.dim(),
                v.dim()
            )));
        }
    }
    Ok(LoadedData { train, validation, note })
}

/// Checks the model against the data it will be trained on.
pub fn model_for(cfg: &ExperimentConfig, data: &LoadedData) -> Result<MlpSpec> {
    let spec = cfg.mlp_spec()?;
    let mut problems = Vec::new();
    if spec.input_dim() != data.train.dim() {
        problems.push(format!("`model.layers` starts at {} but the inputs have dimension {}", spec.input_dim(), data.train.dim()));
    }
    let classes = match cfg.data.source {
        DataSource::Mnist => MNIST_CLASSES,
        _ => data.train.num_classes(),
    };
    if spec.num_classes() != classes {
        problems.push(format!("`model.layers` ends at {} but the data has {classes} classes", spec.num_classes()));
    }
    if problems.is_empty() {
        Ok(spec)
    } else {
        Err(HarnessError::Config(problems))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub optimizer: String,
    pub model: String,
    pub seed: u64,
    pub epochs: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub updates: u64,
    pub num_params: usize,
    pub train_samples: usize,
    pub validation_samples: Option<usize>,
    pub effective_epochs: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub final_val_error_pct: Option<f64>,
    pub best_val_error_pct: Option<f64>,
    pub final_gamma: Option<f64>,
    pub wall_ms: u64,
    pub validation_note: String,
}

/// Model layers as `784-256-10`.
pub fn model_id(layers: &[usize]) -> String {
    layers.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("-")
}

/// Formats a float so that it parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn metrics_row(r: &RunRecord) -> [String; 9] {
    [
        r.epoch.to_string(),
        r.effective_epochs.to_string(),
        fmt_f64(r.train_loss),
        fmt_opt(r.val_error_pct),
        fmt_opt(r.gamma),
        fmt_f64(r.grad_norm),
        fmt_opt(r.angle_deg),
        r.wall_ms.to_string(),
        r.seed.to_string(),
    ]
}

struct ArtifactObserver {
    start: Instant,
    metrics: csv::Writer<File>,
    metrics_path: PathBuf,
    trace: Option<(BufWriter<File>, PathBuf)>,
    rows: Vec<RunRecord>,
    echo: bool,
}

impl ArtifactObserver {
    fn flush(&mut self) -> Result<()> {
        self.metrics.flush().map_err(|e| HarnessError::io(&self.metrics_path, e))?;
        if let Some((w, p)) = &mut self.trace {
            w.flush().map_err(|e| HarnessError::io(&*p, e))?;
        }
        Ok(())
    }
}

fn to_core(e: HarnessError) -> lentropy::Error {
    // the core only sees observer failures as opaque arguments
    lentropy::Error::InvalidArgument(format!("artifact writer: {e}"))
}

impl TrainObserver for ArtifactObserver {
    fn on_epoch(&mut self, record: &mut RunRecord) -> lentropy::Result<()> {
        record.wall_ms = self.start.elapsed().as_millis() as u64;
        self.metrics
            .write_record(metrics_row(record))
            .map_err(|e| to_core(HarnessError::format(&self.metrics_path, e.to_string())))?;
        self.flush().map_err(to_core)?;
        if self.echo {
            eprintln!(
                "epoch {:>3}  eff {:>4}  loss {:.5}  val {}  {} ms",
                record.epoch,
                record.effective_epochs,
                record.train_loss,
                record.val_error_pct.map_or("-".into(), |v| format!("{v:.2}%")),
                record.wall_ms
            );
        }
        self.rows.push(record.clone());
        Ok(())
    }

    fn on_inner(&mut self, trace: &InnerTrace) -> lentropy::Result<()> {
        if let Some((w, path)) = &mut self.trace {
            let line = serde_json::json!({
                "step": trace.update,
                "gamma": trace.gamma,
                "grad_norm": trace.diagnostics.grad_norm,
                "dist_to_anchor": trace.diagnostics.dist_to_anchor,
                "mu_drift": trace.diagnostics.mu_drift,
            });
            writeln!(w, "{line}").map_err(|e| to_core(HarnessError::io(&*path, e)))?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

fn env_stamp() -> serde_json::Value {
    let unix = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "debug_assertions": cfg!(debug_assertions),
        "started_unix": unix,
    })
}

pub fn write_params(path: &Path, x: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = x.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub fn read_params(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(HarnessError::format(path, "length is not a multiple of 8 bytes"));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

/// Trains one model and writes the run directory `cfg.output_dir`.
///
/// On divergence the completed rows stay in `metrics.csv`, a
/// `divergence.json` is written and the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let spec = model_for(cfg, &data)?;
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()).map_err(|e| HarnessError::io(dir.join(CONFIG_FILE), e))?;
    write_json(&dir.join(ENV_FILE), &env_stamp())?;
    let _ = fs::remove_file(dir.join(DIVERGENCE_FILE));

    let metrics_path = dir.join(METRICS_FILE);
    let mut metrics = csv::Writer::from_writer(create(&metrics_path)?);
    metrics.write_record(METRICS_HEADER).map_err(|e| HarnessError::format(&metrics_path, e.to_string()))?;
    let trace = if cfg.trace_inner {
        let p = dir.join(TRACE_FILE);
        Some((BufWriter::new(create(&p)?), p))
    } else {
        None
    };
    let mut observer = ArtifactObserver { start: Instant::now(), metrics, metrics_path, trace, rows: Vec::new(), echo: opts.verbose };

    let objective = MlpObjective::new(spec.clone(), &data.train)?;
    let mut rng = seeded(cfg.seed);
    let x0 = spec.init_params(&mut rng);
    let train_cfg = TrainConfig {
        method: cfg.method(),
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        track_angle: cfg.track_angle,
    };
    let validation = data.validation.as_ref();
    let validate = |x: &[f64]| -> lentropy::Result<Option<f64>> { validation.map(|v| spec.error_pct(x, v)).transpose() };

    let outcome = train(&objective, x0, &train_cfg, validate, &mut observer, &mut rng);
    observer.flush()?;
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let step = match &e {
                lentropy::Error::Divergence { step } => Some(*step),
                _ => None,
            };
            write_json(
                &dir.join(DIVERGENCE_FILE),
                &serde_json::json!({
                    "error": e.to_string(),
                    "step": step,
                    "completed_epochs": observer.rows.len().saturating_sub(1),
                    "last_train_loss": observer.rows.last().map(|r| r.train_loss),
                    "seed": cfg.seed,
                }),
            )?;
            return Err(e.into());
        }
    };
    write_params(&dir.join(PARAMS_FILE), &outcome.x)?;

    let rows = &outcome.records;
    let last = rows.last().expect("initial row");
    let summary = RunSummary {
        name: cfg.name.clone(),
        optimizer: cfg.optimizer.as_str().into(),
        model: model_id(&spec.layer_sizes),
        seed: cfg.seed,
        epochs: cfg.epochs,
        l: cfg.inner_steps(),
        updates: outcome.updates,
        num_params: spec.num_params(),
        train_samples: data.train.len(),
        validation_samples: data.validation.as_ref().map(Dataset::len),
        effective_epochs: last.effective_epochs,
        initial_train_loss: rows[0].train_loss,
        final_train_loss: last.train_loss,
        final_val_error_pct: last.val_error_pct,
        best_val_error_pct: rows.iter().filter_map(|r| r.val_error_pct).reduce(f64::min),
        final_gamma: last.gamma,
        wall_ms: observer.rows.last().map_or(0, |r| r.wall_ms),
        validation_note: data.note.clone(),
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Reads `summary.json` from a run directory.
pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::format(&path, e.to_string()))
}

/// `metrics.csv` with the `wall_ms` column removed, the part of a run that
/// must repeat byte for byte.
pub fn deterministic_metrics(dir: &Path) -> Result<String> {
    let path = dir.join(METRICS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| HarnessError::format(&path, "empty file"))?.split(',').collect();
    let skip = header.iter().position(|h| *h == "wall_ms").ok_or_else(|| HarnessError::format(&path, "no wall_ms column"))?;
    let keep = |line: &str| line.split(',').enumerate().filter(|(i, _)| *i != skip).map(|(_, f)| f).collect::<Vec<_>>().join(",");
    let mut out = keep(&header.join(","));
    for line in lines {
        out.push('\n');
        out.push_str(&keep(line));
    }
    Ok(out)
}

/// Scope calibration at the initial weights of `cfg`, using its inner-loop
/// settings and batch size.
pub fn calibrate_config(cfg: &ExperimentConfig, settings: &CalibrationSettings) -> Result<Calibration> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let spec = model_for(cfg, &data)?;
    let obj = MlpObjective::new(spec.clone(), &data.train)?;
    let mut rng = seeded(cfg.seed);
    let x0 = spec.init_params(&mut rng);
    let inner = match cfg.method() {
        Method::EntropySgd(c) => c.inner,
        Method::EntropyAdam(c) => c.entropy.inner,
        _ => return Err(HarnessError::config("`optimizer` must be entropy-sgd or entropy-adam for calibration")),
    };
    Ok(heuristic_gamma_calibration(&obj, &x0, &inner, cfg.batch_size, settings, &mut rng)?)
}
