use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lentropy::optimize::CalibrationSettings;
use lentropy_harness::config::{profile, ExperimentConfig, PROFILES};
use lentropy_harness::error::{HarnessError, Result};
use lentropy_harness::plot::{emit_plot_data, write_smoothing_csv};
use lentropy_harness::reference::{double_well_smoothing, quadratic_quadrature_checks};
use lentropy_harness::run::{calibrate_config, run_experiment, RunOptions};
use lentropy_harness::spectrum::{spectrum_of_run, write_spectrum, SpectrumMethod, DEFAULT_HESSIAN_CAP};
use lentropy_harness::suite::{expand, run_dirs, run_suite};

/// Local-entropy optimizers and the experiments around them.
///
/// Configuration precedence, lowest to highest: built-in defaults, the
/// `--profile` preset, the `--config` file, then each `--set key=value`.
#[derive(Parser)]
#[command(name = "lentropy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Built-in preset to start from.
    #[arg(long)]
    profile: Option<String>,
    /// TOML file layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` override; dotted keys reach tables, e.g. `schedule.gamma0=0.03`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::resolve(self.profile.as_deref(), self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write its run directory.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Suppress per-epoch progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Run several configurations over seeds and tabulate final errors.
    Suite {
        /// Preset names; each becomes one suite entry.
        #[arg(long = "profile")]
        profiles: Vec<String>,
        /// TOML files; each becomes one suite entry.
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        /// Overrides applied to every entry.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Comma-separated seeds; each entry runs once per seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs/suite")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Eigenvalue spectrum of the training loss at a run's final weights.
    Spectrum {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = SpectrumKind::Exact)]
        method: SpectrumKind,
        /// Largest parameter count for the dense Hessian.
        #[arg(long, default_value_t = DEFAULT_HESSIAN_CAP)]
        cap: usize,
        /// Passes over the data for the Fisher diagonal.
        #[arg(long, default_value_t = 1)]
        passes: usize,
        /// Output directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadrature references on one-dimensional landscapes.
    Oracle {
        #[command(subcommand)]
        task: OracleTask,
    },
    /// Pick an initial scope for a configuration's initial weights.
    CalibrateGamma {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 5)]
        probes: usize,
    },
    /// Tidy CSVs of curves from run directories or a suite directory.
    Plot {
        /// Run directories, or a suite directory containing `runs.csv`.
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// List presets, or print one as TOML.
    Profile { name: Option<String> },
}

#[derive(Subcommand)]
enum OracleTask {
    /// `−F(x, γ)` of the default double well for several scopes.
    Smoothing {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0, 1e6])]
        gammas: Vec<f64>,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        #[arg(long, default_value = "smoothing/smoothing.csv")]
        out: PathBuf,
    },
    /// Quadrature against the closed form on `½ a x²`.
    Quadrature {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
        curvatures: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
        gammas: Vec<f64>,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        x: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumKind {
    Exact,
    Fisher,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, quiet } => {
            let cfg = config.resolve()?;
            let summary = run_experiment(&cfg, RunOptions { verbose: !quiet })?;
            print_json(&summary);
        }
        Command::Suite { profiles, configs, overrides, seeds, out, quiet } => {
            let mut entries = Vec::new();
            for p in &profiles {
                entries.push(ExperimentConfig::resolve(Some(p), None, &overrides)?);
            }
            for c in &configs {
                entries.push(ExperimentConfig::resolve(None, Some(c), &overrides)?);
            }
            let all = expand(&entries, &seeds, &out);
            let report = run_suite(&all, &out, RunOptions { verbose: !quiet })?;
            for row in &report.rows {
                println!("{:<16} {:<14} {:>8}  eff {:>4}  runs {} failed {}", row.model, row.optimizer, row.formatted(), row.effective_epochs, row.runs, row.failed);
            }
            if report.runs.iter().all(|r| r.failure.is_some()) {
                return Err(HarnessError::Consistency("every run of the suite failed".into()));
            }
        }
        Command::Spectrum { run_dir, method, cap, passes, out } => {
            let method = match method {
                SpectrumKind::Exact => SpectrumMethod::Exact { cap },
                SpectrumKind::Fisher => SpectrumMethod::Fisher { passes },
            };
            let (report, summary) = spectrum_of_run(&run_dir, method)?;
            write_spectrum(out.as_deref().unwrap_or(&run_dir), &report, &summary)?;
            print_json(&summary);
        }
        Command::Oracle { task: OracleTask::Smoothing { gammas, lo, hi, points, out } } => {
            let curves = double_well_smoothing(&gammas, lo, hi, points)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
            }
            write_smoothing_csv(&out, &curves)?;
            for c in &curves {
                println!("gamma {:<10} argmin {:.4}", c.gamma, c.argmin);
            }
        }
        Command::Oracle { task: OracleTask::Quadrature { curvatures, gammas, x } } => {
            print_json(&quadratic_quadrature_checks(&curvatures, &gammas, x)?);
        }
        Command::CalibrateGamma { config, probes } => {
            let cfg = config.resolve()?;
            let settings = CalibrationSettings { probes, ..CalibrationSettings::default() };
            let c = calibrate_config(&cfg, &settings)?;
            print_json(&serde_json::json!({ "gamma": c.gamma, "ratio": c.ratio, "curve": c.curve }));
        }
        Command::Plot { dirs, out } => {
            let mut all = Vec::new();
            for d in dirs {
                if d.join(lentropy_harness::suite::RUNS_FILE).is_file() {
                    all.extend(run_dirs(&d)?);
                } else {
                    all.push(d);
                }
            }
            for path in emit_plot_data(&all, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Profile { name: None } => {
            for p in PROFILES {
                println!("{p}");
            }
        }
        Command::Profile { name: Some(name) } => {
            let cfg = profile(&name).ok_or_else(|| HarnessError::config(format!("unknown profile `{name}`")))?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}
