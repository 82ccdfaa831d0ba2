//! Experiment configuration: a flat TOML document whose optimizer keys match
//! the library's field names, with `[schedule]`, `[lr_decay]`, `[data]` and
//! `[model]` tables. Unknown keys and out-of-range values are all reported
//! together.

use std::path::Path;

use lentropy::net::MlpSpec;
use lentropy::optimize::{AdamConfig, EntropyAdamConfig, EntropySgdConfig, LrDecay, ScopingSchedule, SgdConfig};
use lentropy::sampler::{LangevinSchedule, SgldConfig};
use lentropy::train::Method;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerId {
    Sgd,
    Adam,
    Sgld,
    EntropySgd,
    EntropyAdam,
}

impl OptimizerId {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
            Self::Sgld => "sgld",
            Self::EntropySgd => "entropy-sgd",
            Self::EntropyAdam => "entropy-adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Sgd, Self::Adam, Self::Sgld, Self::EntropySgd, Self::EntropyAdam].into_iter().find(|o| o.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Exponential,
    Linear,
    Quadratic,
    BoundedExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub gamma0: f64,
    pub gamma1: f64,
    pub tau: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { kind: ScheduleKind::Exponential, gamma0: 1e-4, gamma1: 1e-3, tau: 1.0 }
    }
}

impl ScheduleConfig {
    pub fn to_schedule(&self) -> ScopingSchedule {
        let (gamma0, gamma1, tau) = (self.gamma0, self.gamma1, self.tau);
        match self.kind {
            ScheduleKind::Constant => ScopingSchedule::Constant { gamma0 },
            ScheduleKind::Exponential => ScopingSchedule::Exponential { gamma0, gamma1 },
            ScheduleKind::Linear => ScopingSchedule::Linear { gamma0, gamma1 },
            ScheduleKind::Quadratic => ScopingSchedule::Quadratic { gamma0, gamma1 },
            ScheduleKind::BoundedExponential => ScopingSchedule::BoundedExponential { gamma0, tau },
        }
    }
}

/// Learning-rate multiplier `factor^k` after the `k`-th boundary epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrDecayConfig {
    pub boundaries: Vec<usize>,
    pub factor: f64,
}

impl Default for LrDecayConfig {
    fn default() -> Self {
        Self { boundaries: Vec::new(), factor: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Directory holding the four MNIST IDX files; the test split validates.
    Mnist,
    /// CSV file, header row, label last.
    Csv,
    /// Generated Gaussian blobs.
    Blobs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputTransform {
    None,
    CropPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub source: DataSource,
    /// CSV file or MNIST directory; MNIST falls back to `$MNIST_DIR`, then
    /// `data/mnist`.
    pub path: Option<String>,
    pub validation_path: Option<String>,
    /// Training samples kept after loading.
    pub train_subset: Option<usize>,
    pub val_subset: Option<usize>,
    pub stratified: bool,
    pub subset_seed: u64,
    pub transform: InputTransform,
    pub crop: usize,
    pub pool: usize,
    pub blobs_n: usize,
    pub blobs_dim: usize,
    pub blobs_classes: usize,
    pub blobs_spread: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Mnist,
            path: None,
            validation_path: None,
            train_subset: None,
            val_subset: None,
            stratified: true,
            subset_seed: 0,
            transform: InputTransform::None,
            crop: 20,
            pool: 2,
            blobs_n: 600,
            blobs_dim: 8,
            blobs_classes: 3,
            blobs_spread: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub layers: Vec<usize>,
    /// One value per hidden layer, or a single value for all of them.
    pub dropout: Vec<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { layers: vec![784, 1024, 1024, 10], dropout: vec![0.15] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub optimizer: OptimizerId,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub output_dir: String,
    /// Fraction of the training data held out when no validation set exists.
    pub validation_split: f64,
    pub trace_inner: bool,
    pub track_angle: bool,

    /// Learning rate: η for the entropy methods, the step for SGD and Adam,
    /// η₀ for SGLD.
    pub eta: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub eta_prime: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// Momentum of the Langevin loop; 0 keeps the plain sampler.
    pub inner_momentum: f64,
    pub outer_momentum: f64,
    pub nesterov: bool,
    pub rescale_gradient: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Exponent `b` of the SGLD step schedule `η₀ / (1 + t)^b`.
    pub sgld_decay: f64,
    pub temperature: f64,

    pub schedule: ScheduleConfig,
    pub lr_decay: LrDecayConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            optimizer: OptimizerId::EntropySgd,
            epochs: 5,
            batch_size: 128,
            seed: 1,
            output_dir: "runs/experiment".into(),
            validation_split: 0.0,
            trace_inner: false,
            track_angle: false,
            eta: 1.0,
            l: 20,
            eta_prime: 0.1,
            epsilon: 1e-3,
            alpha: 0.75,
            inner_momentum: 0.0,
            outer_momentum: 0.9,
            nesterov: true,
            rescale_gradient: true,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            sgld_decay: 0.0,
            temperature: 1.0,
            schedule: ScheduleConfig::default(),
            lr_decay: LrDecayConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

pub const PROFILES: [&str; 4] = ["mnistfc-entropy", "mnistfc-adam", "mnistfc-sgld", "blobs-smoke"];

/// Shipped presets. The MNIST ones carry the published hyper-parameters for
/// the two-hidden-layer fully connected network.
pub fn profile(name: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig { name: name.into(), output_dir: format!("runs/{name}"), ..ExperimentConfig::default() };
    Some(match name {
        "mnistfc-entropy" => ExperimentConfig {
            lr_decay: LrDecayConfig { boundaries: vec![2], factor: 0.1 },
            ..base
        },
        "mnistfc-adam" => ExperimentConfig {
            optimizer: OptimizerId::Adam,
            epochs: 100,
            eta: 1e-3,
            l: 1,
            lr_decay: LrDecayConfig { boundaries: vec![30, 60, 90], factor: 0.2 },
            model: ModelConfig { dropout: vec![0.5], ..ModelConfig::default() },
            ..base
        },
        "mnistfc-sgld" => ExperimentConfig {
            optimizer: OptimizerId::Sgld,
            epochs: 100,
            // best of a search over eta0 and the decay exponent on 10k MNIST
            eta: 6.4e-5,
            l: 1,
            sgld_decay: 0.0,
            temperature: 1.0,
            model: ModelConfig { dropout: vec![0.5], ..ModelConfig::default() },
            ..base
        },
        "blobs-smoke" => ExperimentConfig {
            epochs: 3,
            batch_size: 32,
            l: 5,
            validation_split: 0.2,
            schedule: ScheduleConfig { gamma0: 0.03, ..ScheduleConfig::default() },
            data: DataConfig { source: DataSource::Blobs, ..DataConfig::default() },
            model: ModelConfig { layers: vec![8, 16, 3], dropout: vec![] },
            ..base
        },
        _ => return None,
    })
}

impl ExperimentConfig {
    /// Parses TOML, reporting every unknown key and every invalid value.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let parsed: std::result::Result<Self, _> = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()));
        let cfg = match parsed {
            Ok(c) => c,
            Err(e) => {
                let mut msgs: Vec<String> = unknown.iter().map(|k| format!("unknown key `{k}`")).collect();
                msgs.push(e.to_string().trim().to_string());
                return Err(HarnessError::Config(msgs));
            }
        };
        let mut problems: Vec<String> = unknown.iter().map(|k| format!("unknown key `{k}`")).collect();
        problems.extend(cfg.problems());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(HarnessError::Config(problems))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(p))
        }
    }

    /// Every range violation, keyed by field name.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, key: &str, what: &str| {
            if !ok {
                out.push(format!("`{key}` {what}"));
            }
        };
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let unit = |v: f64| (0.0..1.0).contains(&v);
        need(!self.name.is_empty(), "name", "must not be empty");
        need(self.batch_size >= 1, "batch_size", "must be at least 1");
        need(!self.output_dir.is_empty(), "output_dir", "must not be empty");
        need(unit(self.validation_split), "validation_split", "must lie in [0, 1)");
        need(pos(self.eta), "eta", "must be positive");
        need(self.l >= 1, "L", "must be at least 1");
        need(pos(self.eta_prime), "eta_prime", "must be positive");
        need(self.epsilon >= 0.0 && self.epsilon.is_finite(), "epsilon", "must be non-negative");
        need(self.alpha > 0.0 && self.alpha <= 1.0, "alpha", "must lie in (0, 1]");
        need(unit(self.inner_momentum), "inner_momentum", "must lie in [0, 1)");
        need(unit(self.outer_momentum), "outer_momentum", "must lie in [0, 1)");
        need(unit(self.beta1), "beta1", "must lie in [0, 1)");
        need(unit(self.beta2), "beta2", "must lie in [0, 1)");
        need(pos(self.adam_eps), "adam_eps", "must be positive");
        need(
            self.sgld_decay == 0.0 || (self.sgld_decay > 0.5 && self.sgld_decay <= 1.0),
            "sgld_decay",
            "must be 0 or lie in (0.5, 1]",
        );
        need(self.temperature >= 0.0 && self.temperature.is_finite(), "temperature", "must be non-negative");
        need(self.schedule.gamma0 >= 0.0 && self.schedule.gamma0.is_finite(), "schedule.gamma0", "must be non-negative");
        need(self.schedule.gamma1 >= 0.0 && self.schedule.gamma1.is_finite(), "schedule.gamma1", "must be non-negative");
        need(
            self.schedule.kind != ScheduleKind::BoundedExponential || pos(self.schedule.tau),
            "schedule.tau",
            "must be positive",
        );
        need(pos(self.lr_decay.factor), "lr_decay.factor", "must be positive");
        need(self.lr_decay.boundaries.windows(2).all(|w| w[0] < w[1]), "lr_decay.boundaries", "must be strictly increasing");
        let d = &self.data;
        need(d.source != DataSource::Csv || d.path.is_some(), "data.path", "is required for CSV data");
        need(d.train_subset != Some(0), "data.train_subset", "must be positive");
        need(d.val_subset != Some(0), "data.val_subset", "must be positive");
        need(d.pool >= 1 && d.crop.is_multiple_of(d.pool.max(1)), "data.pool", "must divide data.crop");
        need(d.blobs_classes >= 2, "data.blobs_classes", "must be at least 2");
        need(d.blobs_n >= 1 && d.blobs_dim >= 1, "data.blobs_n", "and data.blobs_dim must be positive");
        need(pos(d.blobs_spread), "data.blobs_spread", "must be positive");
        if let Err(e) = MlpSpec::new(self.model.layers.clone(), self.model.dropout.clone()) {
            out.push(format!("`model` {e}"));
        }
        out
    }

    /// Mini-batches per update (1 for the baselines).
    pub fn inner_steps(&self) -> usize {
        match self.optimizer {
            OptimizerId::EntropySgd | OptimizerId::EntropyAdam => self.l,
            _ => 1,
        }
    }

    pub fn method(&self) -> Method {
        let lr_decay = LrDecay { boundaries: self.lr_decay.boundaries.clone(), factor: self.lr_decay.factor };
        let entropy = EntropySgdConfig {
            inner: SgldConfig {
                eta_prime: self.eta_prime,
                epsilon: self.epsilon,
                alpha: self.alpha,
                steps: self.l,
                gamma: 0.0,
                momentum: self.inner_momentum,
            },
            eta: self.eta,
            schedule: self.schedule.to_schedule(),
            momentum: self.outer_momentum,
            nesterov: self.nesterov,
            rescale_gradient: self.rescale_gradient,
            lr_decay: lr_decay.clone(),
        };
        match self.optimizer {
            OptimizerId::Sgd => Method::Sgd(SgdConfig { lr: self.eta, momentum: self.outer_momentum, nesterov: self.nesterov, lr_decay }),
            OptimizerId::Adam => {
                Method::Adam(AdamConfig { lr: self.eta, beta1: self.beta1, beta2: self.beta2, eps: self.adam_eps, lr_decay })
            }
            OptimizerId::Sgld => {
                Method::Sgld(LangevinSchedule { eta0: self.eta, decay: self.sgld_decay, temperature: self.temperature })
            }
            OptimizerId::EntropySgd => Method::EntropySgd(entropy),
            OptimizerId::EntropyAdam => {
                Method::EntropyAdam(EntropyAdamConfig { entropy, beta1: self.beta1, beta2: self.beta2, eps: self.adam_eps })
            }
        }
    }

    pub fn mlp_spec(&self) -> Result<MlpSpec> {
        Ok(MlpSpec::new(self.model.layers.clone(), self.model.dropout.clone())?)
    }

    /// Applies `key=value` overrides; keys use dotted paths for tables.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).expect("own output parses");
        let mut errors = Vec::new();
        for item in overrides {
            let Some((key, raw)) = item.split_once('=') else {
                errors.push(format!("override `{item}` is not key=value"));
                continue;
            };
            let parts: Vec<&str> = key.trim().split('.').collect();
            if !insert_path(&mut doc, &parts, parse_value(raw.trim())) {
                errors.push(format!("`{key}` does not name a table entry"));
            }
        }
        if !errors.is_empty() {
            return Err(HarnessError::Config(errors));
        }
        Self::from_toml(&toml::to_string(&doc).expect("table serializes"))
    }

    /// Layers a profile, then a TOML file, then `key=value` overrides; later
    /// layers win key by key. Without a profile the defaults are the base.
    pub fn resolve(profile_name: Option<&str>, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let base = match profile_name {
            Some(name) => profile(name).ok_or_else(|| {
                HarnessError::config(format!("unknown profile `{name}`; known: {}", PROFILES.join(", ")))
            })?,
            None => Self::default(),
        };
        let merged = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                let layer: toml::Table =
                    toml::from_str(&text).map_err(|e| HarnessError::Config(vec![format!("{}: {}", path.display(), e.message())]))?;
                let mut doc: toml::Table = toml::from_str(&base.to_toml()).expect("own output parses");
                merge(&mut doc, layer);
                Self::from_toml(&toml::to_string(&doc).expect("table serializes"))?
            }
            None => base,
        };
        merged.with_overrides(overrides)
    }
}

fn merge(into: &mut toml::Table, layer: toml::Table) {
    for (k, v) in layer {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn insert_path(table: &mut toml::Table, parts: &[&str], value: toml::Value) -> bool {
    match parts {
        [] => false,
        [last] => {
            table.insert(last.to_string(), value);
            true
        }
        [head, rest @ ..] => match table.entry(head.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new())) {
            toml::Value::Table(t) => insert_path(t, rest, value),
            _ => false,
        },
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // reuse TOML's scalar and array grammar, fall back to a bare string
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate_and_round_trip() {
        for name in PROFILES {
            let cfg = profile(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn published_profile_values() {
        let c = profile("mnistfc-entropy").unwrap();
        assert_eq!((c.l, c.eta, c.eta_prime, c.epsilon, c.epochs), (20, 1.0, 0.1, 1e-3, 5));
        assert_eq!(c.schedule.to_schedule(), ScopingSchedule::Exponential { gamma0: 1e-4, gamma1: 1e-3 });
        assert_eq!(c.lr_decay, LrDecayConfig { boundaries: vec![2], factor: 0.1 });
        assert_eq!(c.model.dropout, vec![0.15]);
        let a = profile("mnistfc-adam").unwrap();
        assert_eq!((a.eta, a.epochs, a.lr_decay.factor), (1e-3, 100, 0.2));
    }

    #[test]
    fn all_unknown_keys_are_listed() {
        let err = ExperimentConfig::from_toml("bogus = 1\nepochs = 2\n[data]\nsource = \"blobs\"\nfoo = 3\n").unwrap_err();
        let HarnessError::Config(msgs) = err else { panic!() };
        let text = msgs.join("\n");
        assert!(text.contains("bogus"), "{text}");
        assert!(text.contains("foo"), "{text}");
    }

    #[test]
    fn range_errors_name_their_keys() {
        let err = ExperimentConfig::from_toml("eta = -1.0\nalpha = 2.0\n").unwrap_err();
        let HarnessError::Config(msgs) = err else { panic!() };
        assert!(msgs.iter().any(|m| m.contains("`eta`")));
        assert!(msgs.iter().any(|m| m.contains("`alpha`")));
        assert_eq!(HarnessError::Config(msgs).exit_code(), 2);
    }

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "epochs = 9\n[schedule]\ngamma0 = 0.25\n").unwrap();
        let c = ExperimentConfig::resolve(Some("blobs-smoke"), Some(&path), &["epochs=4".into()]).unwrap();
        assert_eq!(c.epochs, 4);
        assert_eq!(c.schedule.gamma0, 0.25);
        assert_eq!(c.schedule.gamma1, 1e-3);
        assert_eq!(c.data.source, DataSource::Blobs);
        assert!(ExperimentConfig::resolve(Some("nope"), None, &[]).is_err());
    }

    #[test]
    fn overrides_reach_nested_tables() {
        let base = profile("blobs-smoke").unwrap();
        let c = base
            .with_overrides(&["epochs=7".into(), "schedule.gamma0=0.5".into(), "model.layers=[8, 4, 3]".into(), "optimizer=adam".into()])
            .unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.schedule.gamma0, 0.5);
        assert_eq!(c.model.layers, vec![8, 4, 3]);
        assert_eq!(c.optimizer, OptimizerId::Adam);
        assert!(base.with_overrides(&["nonsense=1".into()]).is_err());
    }
}
