//! Batches of runs and the comparison table built from them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::run::{fmt_f64, model_id, run_experiment, RunOptions};

pub const RUNS_FILE: &str = "runs.csv";
pub const TABLE_FILE: &str = "table.csv";

/// Outcome of one run of a suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRun {
    pub name: String,
    pub model: String,
    pub optimizer: String,
    pub seed: u64,
    pub output_dir: String,
    pub effective_epochs: usize,
    pub final_val_error_pct: Option<f64>,
    pub best_val_error_pct: Option<f64>,
    /// Error message when the run failed.
    pub failure: Option<String>,
}

/// Aggregate over the runs sharing a model, optimizer and effective epochs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub model: String,
    pub optimizer: String,
    pub effective_epochs: usize,
    pub runs: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (`n − 1`), 0 for a single run.
    pub std: Option<f64>,
    pub failures: Vec<String>,
}

impl SuiteRow {
    /// `"1.39 ± 0.03"`, or `"n/a"` when every run failed.
    pub fn formatted(&self) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
            _ => "n/a".into(),
        }
    }
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

pub fn aggregate(runs: &[SuiteRun]) -> Vec<SuiteRow> {
    let mut groups: BTreeMap<(String, String, usize), Vec<&SuiteRun>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.model.clone(), r.optimizer.clone(), r.effective_epochs)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((model, optimizer, effective_epochs), members)| {
            let values: Vec<f64> = members.iter().filter(|r| r.failure.is_none()).filter_map(|r| r.final_val_error_pct).collect();
            let failures: Vec<String> =
                members.iter().filter_map(|r| r.failure.as_ref().map(|f| format!("{} (seed {}): {f}", r.name, r.seed))).collect();
            let stats = mean_std(&values);
            SuiteRow {
                model,
                optimizer,
                effective_epochs,
                runs: members.len(),
                failed: failures.len(),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
                failures,
            }
        })
        .collect()
}

/// Expands each config over `seeds` (if any), placing every run under
/// `out/<name>-seed<k>`.
pub fn expand(configs: &[ExperimentConfig], seeds: &[u64], out: &Path) -> Vec<ExperimentConfig> {
    let mut all = Vec::new();
    for cfg in configs {
        let seeds: Vec<u64> = if seeds.is_empty() { vec![cfg.seed] } else { seeds.to_vec() };
        for &seed in &seeds {
            let dir = out.join(format!("{}-seed{seed}", cfg.name));
            all.push(ExperimentConfig { seed, output_dir: dir.to_string_lossy().into_owned(), ..cfg.clone() });
        }
    }
    all
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub runs: Vec<SuiteRun>,
    pub rows: Vec<SuiteRow>,
}

/// Runs every config in turn, continuing past failures, then writes
/// `runs.csv` and `table.csv` into `out`.
pub fn run_suite(configs: &[ExperimentConfig], out: &Path, opts: RunOptions) -> Result<SuiteReport> {
    if configs.is_empty() {
        return Err(HarnessError::config("a suite needs at least one configuration"));
    }
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut runs = Vec::with_capacity(configs.len());
    for cfg in configs {
        if opts.verbose {
            eprintln!("== {} seed {} -> {}", cfg.name, cfg.seed, cfg.output_dir);
        }
        let base = SuiteRun {
            name: cfg.name.clone(),
            model: model_id(&cfg.model.layers),
            optimizer: cfg.optimizer.as_str().into(),
            seed: cfg.seed,
            output_dir: cfg.output_dir.clone(),
            effective_epochs: cfg.epochs * cfg.inner_steps(),
            final_val_error_pct: None,
            best_val_error_pct: None,
            failure: None,
        };
        runs.push(match run_experiment(cfg, opts) {
            Ok(s) => SuiteRun {
                effective_epochs: s.effective_epochs,
                final_val_error_pct: s.final_val_error_pct,
                best_val_error_pct: s.best_val_error_pct,
                ..base
            },
            Err(e) => SuiteRun { failure: Some(e.to_string().replace('\n', " ")), ..base },
        });
    }
    let rows = aggregate(&runs);
    write_runs(&out.join(RUNS_FILE), &runs)?;
    write_table(&out.join(TABLE_FILE), &rows)?;
    Ok(SuiteReport { runs, rows })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_runs(path: &Path, runs: &[SuiteRun]) -> Result<()> {
    let err = |e: csv::Error| HarnessError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["name", "model", "optimizer", "seed", "output_dir", "effective_epochs", "final_val_error_pct", "best_val_error_pct", "failure"])
        .map_err(err)?;
    for r in runs {
        w.write_record([
            r.name.clone(),
            r.model.clone(),
            r.optimizer.clone(),
            r.seed.to_string(),
            r.output_dir.clone(),
            r.effective_epochs.to_string(),
            opt(r.final_val_error_pct),
            opt(r.best_val_error_pct),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_table(path: &Path, rows: &[SuiteRow]) -> Result<()> {
    let err = |e: csv::Error| HarnessError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["model", "optimizer", "val_error_pct", "effective_epochs", "runs", "failed", "mean", "std", "failures"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.optimizer.clone(),
            r.formatted(),
            r.effective_epochs.to_string(),
            r.runs.to_string(),
            r.failed.to_string(),
            opt(r.mean),
            opt(r.std),
            r.failures.join("; "),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Directories of the runs recorded in a suite's `runs.csv`.
pub fn run_dirs(suite_dir: &Path) -> Result<Vec<PathBuf>> {
    let path = suite_dir.join(RUNS_FILE);
    let mut r = csv::Reader::from_path(&path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => HarnessError::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string())),
        _ => HarnessError::format(&path, e.to_string()),
    })?;
    let col = r
        .headers()
        .map_err(|e| HarnessError::format(&path, e.to_string()))?
        .iter()
        .position(|h| h == "output_dir")
        .ok_or_else(|| HarnessError::format(&path, "no output_dir column"))?;
    r.records()
        .map(|rec| rec.map(|rec| PathBuf::from(&rec[col])).map_err(|e| HarnessError::format(&path, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_spread() {
        assert_eq!(mean_std(&[1.5]), Some((1.5, 0.0)));
        assert_eq!(mean_std(&[]), None);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn formatting() {
        let row = SuiteRow {
            model: "a".into(),
            optimizer: "adam".into(),
            effective_epochs: 1,
            runs: 5,
            failed: 0,
            mean: Some(1.3912),
            std: Some(0.0312),
            failures: vec![],
        };
        assert_eq!(row.formatted(), "1.39 ± 0.03");
    }
}
