//! Stochastic gradient Langevin dynamics.
//!
//! [`estimate_mu`] runs the inner loop of Entropy-SGD: Langevin iterations on
//! the mini-batch energy plus a quadratic coupling `γ/2 ‖x − x′‖²` to the
//! anchor `x`, with an exponential average `µ` of the iterates. The estimate
//! of the local-entropy gradient is then `−∇F ≈ γ (x − µ)`.
//!
//! [`sgld_optimize`] is the standalone posterior sampler used as a baseline,
//! with the decaying step `η_t = η₀ / (1 + t)^b`.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::objective::{sample_minibatch, Noise, Objective};
use crate::param::{all_finite, distance, norm, ParamVector};
use crate::rng::{child_seed, fill_standard_normal, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgldConfig {
    /// Step size η′.
    pub eta_prime: f64,
    /// Thermal noise ε multiplying `√η′ · N(0, I)`.
    pub epsilon: f64,
    /// Averaging weight α of `µ ← (1 − α) µ + α x′`.
    pub alpha: f64,
    /// Number of Langevin iterations L.
    pub steps: usize,
    /// Scope γ of the coupling to the anchor.
    pub gamma: f64,
    /// Nesterov momentum of the inner loop.
    pub momentum: f64,
}

impl Default for SgldConfig {
    fn default() -> Self {
        Self { eta_prime: 0.1, epsilon: 1e-3, alpha: 0.75, steps: 20, gamma: 1e-4, momentum: 0.0 }
    }
}

impl SgldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_prime > 0.0 && self.eta_prime.is_finite()) {
            return Err(invalid("eta_prime must be positive"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha must lie in (0, 1]"));
        }
        if self.steps == 0 {
            return Err(invalid("the inner loop needs at least one step"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("inner momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Inner-loop state: the Langevin iterate `x′` and its running average `µ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgldState {
    pub x_prime: Vec<f64>,
    pub mu: Vec<f64>,
    pub step: u64,
    velocity: Vec<f64>,
    grad: Vec<f64>,
    noise: Vec<f64>,
}

impl SgldState {
    /// `x′, µ ← x`.
    pub fn new(anchor: &[f64]) -> Self {
        Self {
            x_prime: anchor.to_vec(),
            mu: anchor.to_vec(),
            step: 0,
            velocity: alloc::vec![0.0; anchor.len()],
            grad: alloc::vec![0.0; anchor.len()],
            noise: alloc::vec![0.0; anchor.len()],
        }
    }

    pub fn reset(&mut self, anchor: &[f64]) {
        self.x_prime.copy_from_slice(anchor);
        self.mu.copy_from_slice(anchor);
        self.velocity.fill(0.0);
        self.step = 0;
    }
}

/// One Langevin iteration. Returns `‖dx′‖`.
///
/// Stream layout per step: the mini-batch indices, one `u64` seed for the
/// objective's own noise, then (when `ε > 0`) one Gaussian per coordinate.
pub fn sgld_step<O: Objective + ?Sized>(
    state: &mut SgldState,
    anchor: &[f64],
    obj: &O,
    cfg: &SgldConfig,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let n = obj.dim();
    if state.x_prime.len() != n || anchor.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: anchor.len().min(state.x_prime.len()) });
    }
    let batch = sample_minibatch(obj.num_samples(), batch_size, rng)?;
    let seed = child_seed(rng);
    obj.batch_loss_grad(&state.x_prime, &batch, Noise::Seeded(seed), &mut state.grad)?;

    // dx′ = ∇f(x′) − γ (x − x′)
    let dx = &mut state.grad;
    for ((d, &xp), &a) in dx.iter_mut().zip(&state.x_prime).zip(anchor) {
        *d -= cfg.gamma * (a - xp);
    }
    let dx_norm = norm(dx);
    if cfg.momentum > 0.0 {
        for (v, d) in state.velocity.iter_mut().zip(dx.iter_mut()) {
            *v = cfg.momentum * *v + *d;
            *d += cfg.momentum * *v;
        }
    }
    let root = libm::sqrt(cfg.eta_prime);
    if cfg.epsilon > 0.0 {
        fill_standard_normal(rng, &mut state.noise);
        for ((xp, d), z) in state.x_prime.iter_mut().zip(dx.iter()).zip(&state.noise) {
            *xp = *xp - cfg.eta_prime * d + root * cfg.epsilon * z;
        }
    } else {
        for (xp, d) in state.x_prime.iter_mut().zip(dx.iter()) {
            *xp -= cfg.eta_prime * d;
        }
    }
    state.step += 1;
    if !all_finite(&state.x_prime) {
        return Err(Error::Divergence { step: state.step });
    }
    for (m, &xp) in state.mu.iter_mut().zip(&state.x_prime) {
        *m = (1.0 - cfg.alpha) * *m + cfg.alpha * xp;
    }
    Ok(dx_norm)
}

/// Per-estimate summary, one record per outer iteration when tracing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SgldDiagnostics {
    /// Mean `‖dx′‖` over the L iterations.
    pub grad_norm: f64,
    /// Final `‖x′ − x‖`.
    pub dist_to_anchor: f64,
    /// `‖µ − x‖`.
    pub mu_drift: f64,
}

/// Runs `cfg.steps` Langevin iterations from a fresh state anchored at `anchor`
/// and returns the average `µ ≈ ⟨x′⟩`.
pub fn estimate_mu<O: Objective + ?Sized>(
    anchor: &[f64],
    obj: &O,
    cfg: &SgldConfig,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<(ParamVector, SgldDiagnostics)> {
    cfg.validate()?;
    let mut state = SgldState::new(anchor);
    let mut total = 0.0;
    for _ in 0..cfg.steps {
        total += sgld_step(&mut state, anchor, obj, cfg, batch_size, rng)?;
    }
    let diag = SgldDiagnostics {
        grad_norm: total / cfg.steps as f64,
        dist_to_anchor: distance(&state.x_prime, anchor),
        mu_drift: distance(&state.mu, anchor),
    };
    Ok((ParamVector::new(state.mu)?, diag))
}

/// Source of `⟨x′⟩` under the modified Gibbs measure centred at an anchor.
pub trait LocalMean {
    fn local_mean(&self, anchor: &[f64], gamma: f64, rng: &mut Rng) -> Result<(Vec<f64>, Option<SgldDiagnostics>)>;

    /// Mini-batches consumed per estimate.
    fn batches_per_estimate(&self) -> usize;
}

/// [`LocalMean`] by Langevin iterations on an objective.
#[derive(Debug, Clone, Copy)]
pub struct SgldMean<'o, O: ?Sized> {
    pub objective: &'o O,
    /// Settings for the inner loop; `gamma` is replaced per call.
    pub config: SgldConfig,
    pub batch_size: usize,
}

impl<O: Objective + ?Sized> LocalMean for SgldMean<'_, O> {
    fn local_mean(&self, anchor: &[f64], gamma: f64, rng: &mut Rng) -> Result<(Vec<f64>, Option<SgldDiagnostics>)> {
        let cfg = SgldConfig { gamma, ..self.config };
        let (mu, diag) = estimate_mu(anchor, self.objective, &cfg, self.batch_size, rng)?;
        Ok((mu.into_inner(), Some(diag)))
    }

    fn batches_per_estimate(&self) -> usize {
        self.config.steps
    }
}

/// Step-size schedule `η_t = η₀ / (1 + t)^b` of the standalone sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinSchedule {
    pub eta0: f64,
    /// Decay exponent `b`; 0 gives a constant step.
    pub decay: f64,
    /// Multiplier on the injected noise; 1 samples the posterior `∝ exp(−N f)`.
    pub temperature: f64,
}

impl LangevinSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(invalid("eta0 must be positive"));
        }
        if !(self.decay == 0.0 || (self.decay > 0.5 && self.decay <= 1.0)) {
            return Err(invalid("decay exponent must be 0 or lie in (0.5, 1]"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(invalid("temperature must be non-negative"));
        }
        Ok(())
    }

    pub fn step_size(&self, t: u64) -> f64 {
        self.eta0 / libm::pow(1.0 + t as f64, self.decay)
    }
}

/// One standalone SGLD update with the mini-batch gradient rescaled to the
/// full-data sum: `x ← x − (η_t/2)·N·ḡ + T·√η_t·N(0, I)` under a flat prior.
/// Returns the mini-batch loss.
pub fn sgld_update<O: Objective + ?Sized>(
    x: &mut [f64],
    obj: &O,
    schedule: &LangevinSchedule,
    t: u64,
    batch_size: usize,
    rng: &mut Rng,
    grad: &mut [f64],
) -> Result<f64> {
    let batch = sample_minibatch(obj.num_samples(), batch_size, rng)?;
    let seed = child_seed(rng);
    let loss = obj.batch_loss_grad(x, &batch, Noise::Seeded(seed), grad)?;
    let eta = schedule.step_size(t);
    let drift = 0.5 * eta * obj.num_samples() as f64;
    if schedule.temperature > 0.0 {
        let scale = schedule.temperature * libm::sqrt(eta);
        for (xi, g) in x.iter_mut().zip(grad.iter()) {
            *xi = *xi - drift * g + scale * crate::rng::standard_normal(rng);
        }
    } else {
        for (xi, g) in x.iter_mut().zip(grad.iter()) {
            *xi -= drift * g;
        }
    }
    if !all_finite(x) {
        return Err(Error::Divergence { step: t + 1 });
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgldTrajectory {
    pub x: ParamVector,
    /// Full loss before training and after each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Runs `epochs · ⌈N/m⌉` standalone SGLD updates.
pub fn sgld_optimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    schedule: &LangevinSchedule,
    epochs: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<SgldTrajectory> {
    schedule.validate()?;
    let mut x = x0.to_vec();
    let mut grad = alloc::vec![0.0; x.len()];
    let per_epoch = obj.num_samples().div_ceil(batch_size);
    let mut epoch_losses = alloc::vec![obj.full_loss(&x)?];
    let mut t = 0;
    for _ in 0..epochs {
        for _ in 0..per_epoch {
            sgld_update(&mut x, obj, schedule, t, batch_size, rng, &mut grad)?;
            t += 1;
        }
        epoch_losses.push(obj.full_loss(&x)?);
    }
    Ok(SgldTrajectory { x: ParamVector::new(x)?, epoch_losses, steps: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Flat, QuadraticObjective};
    use crate::rng::seeded;
    use alloc::vec;

    fn cfg(eta_prime: f64, epsilon: f64, alpha: f64, steps: usize, gamma: f64) -> SgldConfig {
        SgldConfig { eta_prime, epsilon, alpha, steps, gamma, momentum: 0.0 }
    }

    #[test]
    fn config_bounds() {
        assert!(cfg(0.0, 0.0, 1.0, 1, 0.0).validate().is_err());
        assert!(cfg(0.1, -1.0, 1.0, 1, 0.0).validate().is_err());
        assert!(cfg(0.1, 0.0, 0.0, 1, 0.0).validate().is_err());
        assert!(cfg(0.1, 0.0, 1.0, 0, 0.0).validate().is_err());
        assert!(cfg(0.1, 0.0, 1.0, 1, -1.0).validate().is_err());
        assert!(SgldConfig { momentum: 1.0, ..SgldConfig::default() }.validate().is_err());
        assert!(SgldConfig::default().validate().is_ok());
    }

    #[test]
    fn reset_sets_x_prime_and_mu_to_anchor() {
        let mut s = SgldState::new(&[1.0, 2.0]);
        s.x_prime[0] = 5.0;
        s.mu[1] = -3.0;
        s.step = 4;
        s.reset(&[1.0, 2.0]);
        assert_eq!(s, SgldState::new(&[1.0, 2.0]));
    }

    #[test]
    fn no_forcing_no_noise_is_plain_sgd() {
        let q = QuadraticObjective::diagonal(&[1.0, 3.0]).unwrap();
        let c = cfg(0.1, 0.0, 1.0, 5, 0.0);
        let mut s = SgldState::new(&[1.0, -1.0]);
        let mut x = vec![1.0, -1.0];
        let mut rng = seeded(0);
        for _ in 0..5 {
            sgld_step(&mut s, &[1.0, -1.0], &q, &c, 1, &mut rng).unwrap();
            let g = q.gradient(&x).unwrap();
            x.iter_mut().zip(&g).for_each(|(a, g)| *a -= 0.1 * g);
        }
        assert_eq!(s.x_prime, x);
    }

    #[test]
    fn flat_energy_relaxes_geometrically_to_anchor() {
        let f = Flat { dim: 1, value: 0.0 };
        let (eta, gamma) = (0.1, 2.0);
        let c = cfg(eta, 0.0, 1.0, 1, gamma);
        let anchor = [3.0];
        let mut s = SgldState::new(&anchor);
        s.x_prime[0] = 1.0;
        let mut rng = seeded(0);
        for k in 1..=10 {
            sgld_step(&mut s, &anchor, &f, &c, 1, &mut rng).unwrap();
            let expect = 3.0 + (1.0 - 3.0) * libm::pow(1.0 - eta * gamma, k as f64);
            assert!((s.x_prime[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_full_weight_average_is_the_iterate() {
        let q = QuadraticObjective::diagonal(&[1.0]).unwrap();
        let c = cfg(0.05, 1.0, 1.0, 1, 1.0);
        let (mu, _) = estimate_mu(&[2.0], &q, &c, 1, &mut seeded(4)).unwrap();
        let mut s = SgldState::new(&[2.0]);
        sgld_step(&mut s, &[2.0], &q, &c, 1, &mut seeded(4)).unwrap();
        assert_eq!(mu[0], s.x_prime[0]);
    }

    #[test]
    fn flat_energy_has_zero_entropy_gradient() {
        let f = Flat { dim: 3, value: 1.0 };
        let anchor = [0.5, -1.0, 2.0];
        let (mu, d) = estimate_mu(&anchor, &f, &cfg(0.1, 0.0, 0.75, 20, 0.3), 1, &mut seeded(1)).unwrap();
        assert_eq!(&*mu, &anchor);
        assert_eq!(d.mu_drift, 0.0);
    }

    #[test]
    fn divergence_carries_step_index() {
        let q = QuadraticObjective::diagonal(&[1e300]).unwrap();
        let c = cfg(1.0, 0.0, 1.0, 10, 0.0);
        let err = estimate_mu(&[1e10], &q, &c, 1, &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1 }), "{err:?}");
    }

    #[test]
    fn schedule_bounds_and_monotonicity() {
        let bad = LangevinSchedule { eta0: 0.1, decay: 0.3, temperature: 1.0 };
        assert!(bad.validate().is_err());
        let s = LangevinSchedule { eta0: 0.1, decay: 0.55, temperature: 1.0 };
        s.validate().unwrap();
        let steps: Vec<f64> = (0..50).map(|t| s.step_size(t)).collect();
        assert!(steps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert_eq!(s.step_size(0), 0.1);
    }

    #[test]
    fn noiseless_constant_schedule_is_sgd() {
        let q = QuadraticObjective::diagonal(&[1.0, 2.0]).unwrap();
        let s = LangevinSchedule { eta0: 0.2, decay: 0.0, temperature: 0.0 };
        let traj = sgld_optimize(&q, &[1.0, 1.0], &s, 3, 1, &mut seeded(0)).unwrap();
        let mut x = [1.0, 1.0];
        for _ in 0..3 {
            let g = q.gradient(&x).unwrap();
            for (a, g) in x.iter_mut().zip(&g) {
                *a -= 0.1 * g;
            }
        }
        assert_eq!(&*traj.x, &x);
        assert_eq!(traj.epoch_losses.len(), 4);
    }
}
