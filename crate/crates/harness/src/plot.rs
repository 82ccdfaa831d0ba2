//! Tidy CSVs for plotting; nothing is rendered here.
//!
//! `curves.csv` joins the metric columns of several runs on effective
//! epochs, one `<run>.<metric>` column per run and metric. Smoothing
//! families are stored long (`gamma,x,negF`) and pivoted to one column per
//! scope.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use lentropy::oracle::SmoothingCurve;

use crate::error::{HarnessError, Result};
use crate::run::{fmt_f64, METRICS_FILE};

pub const CURVES_FILE: &str = "curves.csv";
pub const SMOOTHING_FILE: &str = "smoothing.csv";
pub const SMOOTHING_WIDE_FILE: &str = "smoothing_wide.csv";

/// Metrics joined into the curve table.
pub const CURVE_METRICS: [&str; 3] = ["train_loss", "val_error_pct", "grad_norm"];

/// One run's metric columns keyed by effective epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCurves {
    pub id: String,
    pub columns: BTreeMap<String, BTreeMap<usize, String>>,
}

pub fn read_run_curves(dir: &Path, id: &str) -> Result<RunCurves> {
    let path = dir.join(METRICS_FILE);
    if !path.is_file() {
        return Err(HarnessError::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, "missing run artifact")));
    }
    let mut r = csv::Reader::from_path(&path).map_err(|e| HarnessError::format(&path, e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| HarnessError::format(&path, e.to_string()))?.iter().map(String::from).collect();
    let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| HarnessError::format(&path, format!("no `{name}` column")));
    let eff = find("effective_epochs")?;
    let cols: Vec<(String, usize)> = CURVE_METRICS.iter().map(|m| Ok((m.to_string(), find(m)?))).collect::<Result<_>>()?;
    let mut columns: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::format(&path, e.to_string()))?;
        let e: usize = rec[eff].parse().map_err(|_| HarnessError::format(&path, "effective_epochs is not an integer"))?;
        for (name, i) in &cols {
            columns.entry(name.clone()).or_default().insert(e, rec[*i].to_string());
        }
    }
    Ok(RunCurves { id: id.to_string(), columns })
}

/// Outer join on effective epochs; cells without a value are empty.
pub fn join_curves(runs: &[RunCurves]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["effective_epochs".to_string()];
    let mut keys = BTreeSet::new();
    let mut series: Vec<&BTreeMap<usize, String>> = Vec::new();
    for run in runs {
        for (metric, values) in &run.columns {
            header.push(format!("{}.{metric}", run.id));
            keys.extend(values.keys().copied());
            series.push(values);
        }
    }
    let rows = keys
        .into_iter()
        .map(|k| {
            let mut row = vec![k.to_string()];
            row.extend(series.iter().map(|s| s.get(&k).cloned().unwrap_or_default()));
            row
        })
        .collect();
    (header, rows)
}

/// Distinct column prefixes: the directory name, suffixed on collisions.
fn run_ids(dirs: &[PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    dirs.iter()
        .map(|d| {
            let base = d.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}#{n}")
            }
        })
        .collect()
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let err = |e: csv::Error| HarnessError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `curves.csv` for the runs in `dirs`, plus `smoothing_wide.csv`
/// for every directory holding a `smoothing.csv`. Returns the files written.
pub fn emit_plot_data(dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if dirs.is_empty() {
        return Err(HarnessError::config("no run directories given"));
    }
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut written = Vec::new();
    let ids = run_ids(dirs);
    let mut runs = Vec::new();
    let mut families = Vec::new();
    for (dir, id) in dirs.iter().zip(&ids) {
        if !dir.is_dir() {
            return Err(HarnessError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "run directory does not exist")));
        }
        let smoothing = dir.join(SMOOTHING_FILE);
        let has_family = smoothing.is_file();
        if has_family {
            families.push(smoothing);
        }
        // a directory holding only a smoothing family is not a training run
        if dir.join(METRICS_FILE).is_file() || !has_family {
            runs.push(read_run_curves(dir, id)?);
        }
    }
    if !runs.is_empty() {
        let (header, rows) = join_curves(&runs);
        let path = out.join(CURVES_FILE);
        write_rows(&path, &header, &rows)?;
        written.push(path);
    }
    for (k, long) in families.iter().enumerate() {
        let (header, rows) = pivot_smoothing(long)?;
        let name = if families.len() == 1 { SMOOTHING_WIDE_FILE.to_string() } else { format!("smoothing_wide_{k}.csv") };
        let path = out.join(name);
        write_rows(&path, &header, &rows)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_smoothing_csv(path: &Path, curves: &[SmoothingCurve]) -> Result<()> {
    let header: Vec<String> = ["gamma", "x", "negF"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|c| c.xs.iter().zip(&c.neg_f).map(move |(x, v)| vec![fmt_f64(c.gamma), fmt_f64(*x), fmt_f64(*v)]))
        .collect();
    write_rows(path, &header, &rows)
}

/// Long `gamma,x,negF` rows to one `negF@<gamma>` column per scope.
pub fn pivot_smoothing(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::format(path, e.to_string()))?;
    let mut gammas: Vec<String> = Vec::new();
    let mut xs: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::format(path, e.to_string()))?;
        if rec.len() != 3 {
            return Err(HarnessError::format(path, "expected gamma,x,negF rows"));
        }
        let g = gammas.iter().position(|v| v == &rec[0]).unwrap_or_else(|| {
            gammas.push(rec[0].to_string());
            gammas.len() - 1
        });
        let x = xs.iter().position(|v| v == &rec[1]).unwrap_or_else(|| {
            xs.push(rec[1].to_string());
            xs.len() - 1
        });
        cells.insert((x, g), rec[2].to_string());
    }
    let mut header = vec!["x".to_string()];
    header.extend(gammas.iter().map(|g| format!("negF@{g}")));
    let rows = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row = vec![x.clone()];
            row.extend((0..gammas.len()).map(|g| cells.get(&(i, g)).cloned().unwrap_or_default()));
            row
        })
        .collect();
    Ok((header, rows))
}
