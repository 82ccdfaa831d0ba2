//! Epoch-level training loop shared by every optimizer, producing one
//! [`RunRecord`] per epoch.

use alloc::vec::Vec;

use crate::analysis::gradient_angle;
use crate::error::{invalid, Result};
use crate::objective::Objective;
use crate::optimize::{
    adam_step, entropy_adam_step, entropy_sgd_step, sgd_step, vanilla_gradient, AdamConfig, EntropyAdamConfig,
    EntropySgdConfig, OptimizerState, SgdConfig, StepReport,
};
use crate::param::{norm, ParamVector};
use crate::rng::Rng;
use crate::sampler::{sgld_update, LangevinSchedule, SgldDiagnostics};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Sgd(SgdConfig),
    Adam(AdamConfig),
    Sgld(LangevinSchedule),
    EntropySgd(EntropySgdConfig),
    EntropyAdam(EntropyAdamConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd(_) => "sgd",
            Self::Adam(_) => "adam",
            Self::Sgld(_) => "sgld",
            Self::EntropySgd(_) => "entropy-sgd",
            Self::EntropyAdam(_) => "entropy-adam",
        }
    }

    /// Mini-batches per parameter update (`L`, or 1 for the baselines).
    pub fn inner_steps(&self) -> usize {
        match self {
            Self::EntropySgd(c) => c.inner_steps(),
            Self::EntropyAdam(c) => c.entropy.inner_steps(),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Sgd(c) => c.validate(),
            Self::Adam(c) => c.validate(),
            Self::Sgld(c) => c.validate(),
            Self::EntropySgd(c) => c.validate(),
            Self::EntropyAdam(c) => c.validate(),
        }
    }

    fn uses_local_entropy(&self) -> bool {
        matches!(self, Self::EntropySgd(_) | Self::EntropyAdam(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    /// Recorded in every row; the caller seeds the stream.
    pub seed: u64,
    /// Measure the angle between the entropy direction and a fresh
    /// mini-batch gradient after each update.
    pub track_angle: bool,
}

/// Metrics after an epoch; row 0 holds the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub epoch: usize,
    /// `epoch · L`.
    pub effective_epochs: usize,
    /// Full-data loss with noise off.
    pub train_loss: f64,
    pub val_error_pct: Option<f64>,
    /// Scope of the last update of the epoch.
    pub gamma: Option<f64>,
    /// Norm of the full-data gradient at the end of the epoch.
    pub grad_norm: f64,
    /// Mean angle over the epoch's updates, in degrees.
    pub angle_deg: Option<f64>,
    /// Filled in by the observer; the core never reads a clock.
    pub wall_ms: u64,
    pub seed: u64,
}

/// Per-update inner-loop summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTrace {
    pub update: u64,
    pub gamma: f64,
    pub diagnostics: SgldDiagnostics,
}

pub trait TrainObserver {
    /// Called once per row before it is stored.
    fn on_epoch(&mut self, record: &mut RunRecord) -> Result<()>;

    fn on_inner(&mut self, _trace: &InnerTrace) -> Result<()> {
        Ok(())
    }
}

/// Observer that does nothing.
pub struct Silent;

impl TrainObserver for Silent {
    fn on_epoch(&mut self, _record: &mut RunRecord) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub x: ParamVector,
    pub records: Vec<RunRecord>,
    pub updates: u64,
}

/// Runs `epochs` epochs of `⌈N/m⌉` parameter updates each.
///
/// `validate` maps weights to a validation error in percent, if any. On
/// divergence the error is returned after the observer has seen every
/// completed epoch.
pub fn train<O, V, B>(
    obj: &O,
    x0: ParamVector,
    cfg: &TrainConfig,
    validate: V,
    observer: &mut B,
    rng: &mut Rng,
) -> Result<TrainOutcome>
where
    O: Objective + ?Sized,
    V: Fn(&[f64]) -> Result<Option<f64>>,
    B: TrainObserver + ?Sized,
{
    cfg.method.validate()?;
    if cfg.batch_size == 0 {
        return Err(invalid("batch size must be positive"));
    }
    crate::error::check_dim(obj.dim(), x0.len())?;
    let per_epoch = obj.num_samples().div_ceil(cfg.batch_size);
    let inner = cfg.method.inner_steps();
    let mut state = OptimizerState::new(x0);
    let mut grad = alloc::vec![0.0; obj.dim()];
    let mut records = Vec::with_capacity(cfg.epochs + 1);

    let row = |epoch: usize, x: &[f64], gamma: Option<f64>, angle: Option<f64>, grad: &mut [f64]| -> Result<RunRecord> {
        let train_loss = obj.full_loss_grad(x, grad)?;
        Ok(RunRecord {
            epoch,
            effective_epochs: epoch * inner,
            train_loss,
            val_error_pct: validate(x)?,
            gamma,
            grad_norm: norm(grad),
            angle_deg: angle,
            wall_ms: 0,
            seed: cfg.seed,
        })
    };

    let initial_gamma = match &cfg.method {
        Method::EntropySgd(c) => Some(c.schedule.gamma_at(0)),
        Method::EntropyAdam(c) => Some(c.entropy.schedule.gamma_at(0)),
        _ => None,
    };
    let mut first = row(0, &state.x, initial_gamma, None, &mut grad)?;
    observer.on_epoch(&mut first)?;
    records.push(first);

    for epoch in 0..cfg.epochs {
        state.epoch = epoch;
        let mut gamma = None;
        let (mut angle_sum, mut angle_count) = (0.0, 0usize);
        for _ in 0..per_epoch {
            let report = match &cfg.method {
                Method::Sgd(c) => sgd_step(&mut state, obj, c, cfg.batch_size, rng)?,
                Method::Adam(c) => adam_step(&mut state, obj, c, cfg.batch_size, rng)?,
                Method::EntropySgd(c) => entropy_sgd_step(&mut state, obj, c, cfg.batch_size, rng)?,
                Method::EntropyAdam(c) => entropy_adam_step(&mut state, obj, c, cfg.batch_size, rng)?,
                Method::Sgld(s) => {
                    sgld_update(&mut state.x, obj, s, state.t, cfg.batch_size, rng, &mut grad)?;
                    state.t += 1;
                    StepReport { gamma: None, direction: Vec::new(), inner: None, zero_scope: false }
                }
            };
            gamma = report.gamma.or(gamma);
            if let (Some(g), Some(d)) = (report.gamma, report.inner) {
                observer.on_inner(&InnerTrace { update: state.t, gamma: g, diagnostics: d })?;
            }
            if cfg.track_angle && cfg.method.uses_local_entropy() {
                let plain = vanilla_gradient(obj, &state.x, cfg.batch_size, rng)?;
                if let Ok(a) = gradient_angle(&report.direction, &plain) {
                    angle_sum += a;
                    angle_count += 1;
                }
            }
        }
        let angle = (angle_count > 0).then(|| angle_sum / angle_count as f64);
        let mut rec = row(epoch + 1, &state.x, gamma, angle, &mut grad)?;
        observer.on_epoch(&mut rec)?;
        records.push(rec);
    }
    Ok(TrainOutcome { updates: state.t, x: state.x, records })
}
