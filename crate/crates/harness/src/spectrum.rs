//! Eigenvalue spectra of trained networks, read back from a run directory.

use std::fs;
use std::path::{Path, PathBuf};

use lentropy::analysis::{SpectrumReport, DEFAULT_ZERO_THRESHOLDS};
use lentropy::net::MlpObjective;
use lentropy::objective::Objective;
use lentropy::rng::seeded;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::run::{fmt_f64, load_data, model_for, read_params, write_json, CONFIG_FILE, PARAMS_FILE};

pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const SPECTRUM_JSON: &str = "spectrum.json";
/// Largest parameter count for a dense Hessian.
pub const DEFAULT_HESSIAN_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Dense finite-difference Hessian, full eigendecomposition.
    Exact { cap: usize },
    /// Per-coordinate mini-batch gradient variance.
    Fisher { passes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub source: String,
    pub n: usize,
    #[serde(rename = "frac_abs_below_1e-2")]
    pub frac_abs_below_1e_2: f64,
    #[serde(rename = "frac_abs_below_1e-4")]
    pub frac_abs_below_1e_4: f64,
    #[serde(rename = "frac_abs_below_1e-5")]
    pub frac_abs_below_1e_5: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    pub trace: f64,
    pub train_loss: f64,
    /// Relative asymmetry of the raw finite-difference Hessian.
    pub hessian_asymmetry: Option<f64>,
}

impl SpectrumSummary {
    pub fn new(report: &SpectrumReport, train_loss: f64, hessian_asymmetry: Option<f64>) -> Self {
        let [t2, t4, t5] = DEFAULT_ZERO_THRESHOLDS;
        Self {
            source: report.source.as_str().into(),
            n: report.n(),
            frac_abs_below_1e_2: report.frac_near_zero(t2),
            frac_abs_below_1e_4: report.frac_near_zero(t4),
            frac_abs_below_1e_5: report.frac_near_zero(t5),
            min_eig: report.min_eig(),
            max_eig: report.max_eig(),
            trace: report.trace(),
            train_loss,
            hessian_asymmetry,
        }
    }
}

/// Spectrum of the training loss at the weights stored in `run_dir`.
pub fn spectrum_of_run(run_dir: &Path, method: SpectrumMethod) -> Result<(SpectrumReport, SpectrumSummary)> {
    let cfg = ExperimentConfig::from_file(&run_dir.join(CONFIG_FILE))?;
    let x = read_params(&run_dir.join(PARAMS_FILE))?;
    let data = load_data(&cfg)?;
    let spec = model_for(&cfg, &data)?;
    if x.len() != spec.num_params() {
        return Err(HarnessError::Consistency(format!(
            "{} holds {} weights but the model has {}",
            PARAMS_FILE,
            x.len(),
            spec.num_params()
        )));
    }
    let obj = MlpObjective::new(spec, &data.train)?;
    let train_loss = obj.full_loss(&x)?;
    let (report, asym) = match method {
        SpectrumMethod::Exact { cap } => {
            let h = obj.exact_hessian(&x, cap)?;
            if h.asymmetry_warning() {
                eprintln!("warning: finite-difference Hessian asymmetry {:.2e}", h.raw_asymmetry);
            }
            (SpectrumReport::from_matrix(&h.matrix)?, Some(h.raw_asymmetry))
        }
        SpectrumMethod::Fisher { passes } => {
            let mut rng = seeded(cfg.seed);
            let m = cfg.batch_size.min(data.train.len());
            (SpectrumReport::from_diagonal(&obj.fisher_diagonal(&x, m, passes, &mut rng)?)?, None)
        }
    };
    let summary = SpectrumSummary::new(&report, train_loss, asym);
    Ok((report, summary))
}

/// Writes `spectrum.csv` (one eigenvalue per row, ascending) and
/// `spectrum.json` into `out`.
pub fn write_spectrum(out: &Path, report: &SpectrumReport, summary: &SpectrumSummary) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let csv_path = out.join(SPECTRUM_CSV);
    let mut text = String::from("eigenvalue\n");
    for v in &report.eigenvalues {
        text.push_str(&fmt_f64(*v));
        text.push('\n');
    }
    fs::write(&csv_path, text).map_err(|e| HarnessError::io(&csv_path, e))?;
    let json_path = out.join(SPECTRUM_JSON);
    write_json(&json_path, summary)?;
    Ok(vec![csv_path, json_path])
}
