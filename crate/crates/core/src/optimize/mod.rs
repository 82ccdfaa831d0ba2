//! Outer-loop optimizers: Entropy-SGD and Entropy-Adam on top of a
//! [`LocalMean`] source, plus SGD (optionally Nesterov) and Adam baselines.
//!
//! Momentum follows the look-ahead form: the descent direction is evaluated
//! at `x + µ v`, then `v ← µ v − η g` and `x ← x + v`. With zero momentum this
//! is bit-identical to `x ← x − η g`.

mod calibrate;
mod schedule;

pub use calibrate::{calibrate_gamma_with, heuristic_gamma_calibration, Calibration, CalibrationSettings};
pub use schedule::{LrDecay, ScopingSchedule};

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::objective::{sample_minibatch, Noise, Objective};
use crate::param::{all_finite, ParamVector};
use crate::rng::{child_seed, Rng};
use crate::sampler::{LocalMean, SgldConfig, SgldDiagnostics, SgldMean};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub lr_decay: LrDecay,
}

impl SgdConfig {
    pub fn plain(lr: f64) -> Self {
        Self { lr, momentum: 0.0, nesterov: false, lr_decay: LrDecay::none() }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.lr)?;
        check_momentum(self.momentum)?;
        self.lr_decay.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_decay: LrDecay,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, lr_decay: LrDecay::none() }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.lr)?;
        check_betas(self.beta1, self.beta2, self.eps)?;
        self.lr_decay.validate()
    }
}

/// Hyper-parameters of Entropy-SGD.
///
/// `inner` configures the Langevin loop (its `gamma` is overwritten by the
/// scoping schedule, frozen for the duration of each inner loop).
#[derive(Debug, Clone, PartialEq)]
pub struct EntropySgdConfig {
    pub inner: SgldConfig,
    /// Outer learning rate η.
    pub eta: f64,
    pub schedule: ScopingSchedule,
    pub momentum: f64,
    pub nesterov: bool,
    /// Use `x − µ` instead of `γ (x − µ)` as the descent direction.
    pub rescale_gradient: bool,
    pub lr_decay: LrDecay,
}

impl EntropySgdConfig {
    pub fn validate(&self) -> Result<()> {
        SgldConfig { gamma: 0.0, ..self.inner }.validate()?;
        check_rate(self.eta)?;
        self.schedule.validate()?;
        check_momentum(self.momentum)?;
        self.lr_decay.validate()
    }

    pub fn inner_steps(&self) -> usize {
        self.inner.steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyAdamConfig {
    /// `eta`, `schedule`, `rescale_gradient`, `lr_decay` and `inner` apply;
    /// the momentum fields are unused.
    pub entropy: EntropySgdConfig,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl EntropyAdamConfig {
    pub fn validate(&self) -> Result<()> {
        self.entropy.validate()?;
        check_betas(self.beta1, self.beta2, self.eps)
    }
}

fn check_rate(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(invalid(alloc::format!("learning rate {lr} must be positive")))
    }
}

fn check_momentum(m: f64) -> Result<()> {
    if (0.0..1.0).contains(&m) {
        Ok(())
    } else {
        Err(invalid(alloc::format!("momentum {m} must lie in [0, 1)")))
    }
}

fn check_betas(beta1: f64, beta2: f64, eps: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0 {
        Ok(())
    } else {
        Err(invalid("Adam needs beta1, beta2 in [0, 1) and eps > 0"))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct AdamMoments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Weights plus optimizer memory for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: ParamVector,
    /// Number of parameter updates applied so far.
    pub t: u64,
    /// Current epoch (0-based), used for learning-rate decay.
    pub epoch: usize,
    velocity: Vec<f64>,
    adam: Option<AdamMoments>,
}

impl OptimizerState {
    pub fn new(x: ParamVector) -> Self {
        let n = x.len();
        Self { x, t: 0, epoch: 0, velocity: alloc::vec![0.0; n], adam: None }
    }

    /// Adam second-moment estimates, if Adam has been used.
    pub fn second_moments(&self) -> Option<&[f64]> {
        self.adam.as_ref().map(|a| a.v.as_slice())
    }
}

/// What one parameter update did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Scope used (entropy methods).
    pub gamma: Option<f64>,
    /// Descent direction `g` fed to the update.
    pub direction: Vec<f64>,
    pub inner: Option<SgldDiagnostics>,
    /// The unrescaled direction was identically zero because γ = 0.
    pub zero_scope: bool,
}

fn momentum_update(
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    nesterov: bool,
    mut direction_at: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let g = if nesterov && momentum > 0.0 {
        let ahead: Vec<f64> = state.x.iter().zip(&state.velocity).map(|(x, v)| x + momentum * v).collect();
        direction_at(&ahead)?
    } else {
        direction_at(&state.x)?
    };
    if momentum > 0.0 {
        for ((x, v), gi) in state.x.iter_mut().zip(state.velocity.iter_mut()).zip(&g) {
            *v = momentum * *v - lr * gi;
            *x += *v;
        }
    } else {
        for (x, gi) in state.x.iter_mut().zip(&g) {
            *x -= lr * gi;
        }
    }
    finish_update(state)?;
    Ok(g)
}

fn adam_update(state: &mut OptimizerState, g: &[f64], lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<()> {
    let n = state.x.len();
    let moments = state.adam.get_or_insert_with(|| AdamMoments { m: alloc::vec![0.0; n], v: alloc::vec![0.0; n], t: 0 });
    moments.t += 1;
    let c1 = 1.0 - libm::pow(beta1, moments.t as f64);
    let c2 = 1.0 - libm::pow(beta2, moments.t as f64);
    for i in 0..n {
        moments.m[i] = beta1 * moments.m[i] + (1.0 - beta1) * g[i];
        moments.v[i] = beta2 * moments.v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = moments.m[i] / c1;
        let v_hat = moments.v[i] / c2;
        state.x[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
    }
    finish_update(state)
}

fn finish_update(state: &mut OptimizerState) -> Result<()> {
    state.t += 1;
    if all_finite(&state.x) {
        Ok(())
    } else {
        Err(Error::Divergence { step: state.t })
    }
}

fn batch_gradient<O: Objective + ?Sized>(obj: &O, at: &[f64], m: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let batch = sample_minibatch(obj.num_samples(), m, rng)?;
    let seed = child_seed(rng);
    let mut g = alloc::vec![0.0; at.len()];
    obj.batch_loss_grad(at, &batch, Noise::Seeded(seed), &mut g)?;
    Ok(g)
}

/// Mini-batch gradient at `x` with a fresh batch, for angle diagnostics.
pub fn vanilla_gradient<O: Objective + ?Sized>(obj: &O, x: &[f64], m: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    batch_gradient(obj, x, m, rng)
}

fn entropy_direction<M: LocalMean + ?Sized>(
    est: &M,
    at: &[f64],
    gamma: f64,
    rescale: bool,
    rng: &mut Rng,
    inner: &mut Option<SgldDiagnostics>,
) -> Result<Vec<f64>> {
    let (mu, diag) = est.local_mean(at, gamma, rng)?;
    *inner = diag;
    Ok(if rescale {
        at.iter().zip(&mu).map(|(x, m)| x - m).collect()
    } else {
        at.iter().zip(&mu).map(|(x, m)| gamma * (x - m)).collect()
    })
}

/// One Entropy-SGD update with `µ` supplied by `est`.
pub fn entropy_sgd_step_with<M: LocalMean + ?Sized>(
    state: &mut OptimizerState,
    est: &M,
    cfg: &EntropySgdConfig,
    rng: &mut Rng,
) -> Result<StepReport> {
    let gamma = cfg.schedule.gamma_at(state.t);
    let lr = cfg.eta * cfg.lr_decay.multiplier(state.epoch);
    let mut inner = None;
    let direction = momentum_update(state, lr, cfg.momentum, cfg.nesterov, |at| {
        entropy_direction(est, at, gamma, cfg.rescale_gradient, rng, &mut inner)
    })?;
    Ok(StepReport { gamma: Some(gamma), direction, inner, zero_scope: gamma == 0.0 && !cfg.rescale_gradient })
}

/// One Entropy-SGD update: L Langevin iterations estimate `µ`, then the
/// weights move along `γ (x − µ)` (or `x − µ` when rescaled).
pub fn entropy_sgd_step<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    obj: &O,
    cfg: &EntropySgdConfig,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<StepReport> {
    let est = SgldMean { objective: obj, config: cfg.inner, batch_size };
    entropy_sgd_step_with(state, &est, cfg, rng)
}

pub fn entropy_adam_step_with<M: LocalMean + ?Sized>(
    state: &mut OptimizerState,
    est: &M,
    cfg: &EntropyAdamConfig,
    rng: &mut Rng,
) -> Result<StepReport> {
    let e = &cfg.entropy;
    let gamma = e.schedule.gamma_at(state.t);
    let lr = e.eta * e.lr_decay.multiplier(state.epoch);
    let mut inner = None;
    let direction = entropy_direction(est, &state.x, gamma, e.rescale_gradient, rng, &mut inner)?;
    adam_update(state, &direction, lr, cfg.beta1, cfg.beta2, cfg.eps)?;
    Ok(StepReport { gamma: Some(gamma), direction, inner, zero_scope: gamma == 0.0 && !e.rescale_gradient })
}

/// Adam driven by the local-entropy direction.
pub fn entropy_adam_step<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    obj: &O,
    cfg: &EntropyAdamConfig,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<StepReport> {
    let est = SgldMean { objective: obj, config: cfg.entropy.inner, batch_size };
    entropy_adam_step_with(state, &est, cfg, rng)
}

pub fn sgd_step<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    obj: &O,
    cfg: &SgdConfig,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<StepReport> {
    let lr = cfg.lr * cfg.lr_decay.multiplier(state.epoch);
    let direction = momentum_update(state, lr, cfg.momentum, cfg.nesterov, |at| batch_gradient(obj, at, batch_size, rng))?;
    Ok(StepReport { gamma: None, direction, inner: None, zero_scope: false })
}

pub fn adam_step<O: Objective + ?Sized>(
    state: &mut OptimizerState,
    obj: &O,
    cfg: &AdamConfig,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<StepReport> {
    let lr = cfg.lr * cfg.lr_decay.multiplier(state.epoch);
    let g = batch_gradient(obj, &state.x, batch_size, rng)?;
    adam_update(state, &g, lr, cfg.beta1, cfg.beta2, cfg.eps)?;
    Ok(StepReport { gamma: None, direction: g, inner: None, zero_scope: false })
}
