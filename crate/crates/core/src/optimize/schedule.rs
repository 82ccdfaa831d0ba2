use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Scope γ as a function of the parameter-update index `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScopingSchedule {
    /// `γ0`
    Constant { gamma0: f64 },
    /// `γ0 (1 + γ1)^t`
    Exponential { gamma0: f64, gamma1: f64 },
    /// `γ0 (1 + γ1 t)`
    Linear { gamma0: f64, gamma1: f64 },
    /// `γ0 (1 + γ1 t)²`
    Quadratic { gamma0: f64, gamma1: f64 },
    /// `γ0 (1 − e^{−τ t})`
    BoundedExponential { gamma0: f64, tau: f64 },
}

impl ScopingSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        let valid = match *self {
            Self::Constant { gamma0 } => ok(gamma0),
            Self::Exponential { gamma0, gamma1 } | Self::Linear { gamma0, gamma1 } | Self::Quadratic { gamma0, gamma1 } => {
                ok(gamma0) && ok(gamma1)
            }
            Self::BoundedExponential { gamma0, tau } => ok(gamma0) && tau > 0.0 && tau.is_finite(),
        };
        if valid {
            Ok(())
        } else {
            Err(invalid(alloc::format!("invalid scoping schedule {self:?}")))
        }
    }

    pub fn gamma_at(&self, t: u64) -> f64 {
        let t = t as f64;
        match *self {
            Self::Constant { gamma0 } => gamma0,
            Self::Exponential { gamma0, gamma1 } => gamma0 * libm::pow(1.0 + gamma1, t),
            Self::Linear { gamma0, gamma1 } => gamma0 * (1.0 + gamma1 * t),
            Self::Quadratic { gamma0, gamma1 } => {
                let s = 1.0 + gamma1 * t;
                gamma0 * s * s
            }
            Self::BoundedExponential { gamma0, tau } => gamma0 * (1.0 - libm::exp(-tau * t)),
        }
    }
}

/// Step decay: the rate is multiplied by `factor` once for every boundary
/// `b ≤ epoch` (epochs counted from 0).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LrDecay {
    pub boundaries: Vec<usize>,
    pub factor: f64,
}

impl LrDecay {
    pub fn none() -> Self {
        Self { boundaries: Vec::new(), factor: 1.0 }
    }

    /// Boundaries at `every, 2·every, …` below `until`.
    pub fn every(every: usize, factor: f64, until: usize) -> Self {
        let boundaries = if every == 0 { Vec::new() } else { (1..).map(|k| k * every).take_while(|&b| b < until).collect() };
        Self { boundaries, factor }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor.is_finite()) && !self.boundaries.is_empty() {
            return Err(invalid("learning-rate decay factor must be positive"));
        }
        Ok(())
    }

    pub fn multiplier(&self, epoch: usize) -> f64 {
        let k = self.boundaries.iter().filter(|&&b| b <= epoch).count();
        libm::pow(self.factor, k as f64)
    }
}
