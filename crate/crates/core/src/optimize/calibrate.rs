//! Picks an initial scope so the local-entropy gradient has roughly the
//! magnitude of the plain mini-batch gradient.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::objective::{sample_minibatch, Noise, Objective};
use crate::param::{norm, ParamVector};
use crate::rng::{child_seed, seeded, Rng};
use crate::sampler::{LocalMean, SgldConfig, SgldMean};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    /// Independent probes per scope; the median ratio is used.
    pub probes: usize,
    /// Accepted band for `‖γ(x − µ)‖ / ‖∇f_batch‖`.
    pub band: (f64, f64),
    /// Search range for γ.
    pub range: (f64, f64),
    /// Scan density in points per decade.
    pub per_decade: usize,
    pub bisection_steps: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { probes: 5, band: (0.5, 2.0), range: (1e-8, 1e4), per_decade: 2, bisection_steps: 40 }
    }
}

impl CalibrationSettings {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range;
        if self.probes == 0 || self.per_decade == 0 {
            return Err(invalid("calibration needs at least one probe and one point per decade"));
        }
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(invalid("calibration range must satisfy 0 < lo < hi"));
        }
        if !(self.band.0 > 0.0 && self.band.1 > self.band.0) {
            return Err(invalid("calibration band must satisfy 0 < lo < hi"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub gamma: f64,
    /// Median ratio at `gamma`.
    pub ratio: f64,
    /// Every `(γ, median ratio)` evaluated, in evaluation order.
    pub curve: Vec<(f64, f64)>,
}

/// Scans a log-spaced grid for the first scope whose median ratio falls in
/// the band, then bisects (in log γ) against the preceding out-of-band point
/// and returns the in-band end.
///
/// Every scope reuses the same probe seeds, so the ratio curve is a smooth
/// function of γ. A diverging inner loop counts as out of band.
pub fn calibrate_gamma_with<O: Objective + ?Sized, M: LocalMean + ?Sized>(
    obj: &O,
    est: &M,
    x: &ParamVector,
    batch_size: usize,
    settings: &CalibrationSettings,
    rng: &mut Rng,
) -> Result<Calibration> {
    settings.validate()?;
    let seeds: Vec<u64> = (0..settings.probes).map(|_| child_seed(rng)).collect();
    let mut curve = Vec::new();
    let mut ratio_at = |gamma: f64| -> Result<f64> {
        let r = median_ratio(obj, est, x, gamma, batch_size, &seeds)?;
        curve.push((gamma, r));
        Ok(r)
    };
    let in_band = |r: f64| r >= settings.band.0 && r <= settings.band.1;

    let (lo, hi) = (libm::log10(settings.range.0), libm::log10(settings.range.1));
    let count = libm::ceil((hi - lo) * settings.per_decade as f64) as usize + 1;
    let mut prev: Option<f64> = None;
    let mut found = None;
    for j in 0..count {
        let e = (lo + j as f64 / settings.per_decade as f64).min(hi);
        let gamma = libm::pow(10.0, e);
        let r = ratio_at(gamma)?;
        if in_band(r) {
            found = Some((gamma, r));
            break;
        }
        prev = Some(gamma);
    }
    let Some((mut good, mut good_ratio)) = found else {
        return Err(Error::Calibration { curve });
    };
    if let Some(bad) = prev {
        let (mut a, mut b) = (libm::log(bad), libm::log(good));
        for _ in 0..settings.bisection_steps {
            let mid = 0.5 * (a + b);
            let gamma = libm::exp(mid);
            let r = ratio_at(gamma)?;
            if in_band(r) {
                b = mid;
                good = gamma;
                good_ratio = r;
            } else {
                a = mid;
            }
        }
    }
    Ok(Calibration { gamma: good, ratio: good_ratio, curve })
}

fn median_ratio<O: Objective + ?Sized, M: LocalMean + ?Sized>(
    obj: &O,
    est: &M,
    x: &[f64],
    gamma: f64,
    batch_size: usize,
    seeds: &[u64],
) -> Result<f64> {
    let mut ratios = Vec::with_capacity(seeds.len());
    let mut grad = alloc::vec![0.0; x.len()];
    for &seed in seeds {
        let mut rng = seeded(seed);
        let batch = sample_minibatch(obj.num_samples(), batch_size, &mut rng)?;
        let noise = Noise::Seeded(child_seed(&mut rng));
        obj.batch_loss_grad(x, &batch, noise, &mut grad)?;
        let g = norm(&grad);
        let r = match est.local_mean(x, gamma, &mut rng) {
            Ok((mu, _)) => {
                let d: Vec<f64> = x.iter().zip(&mu).map(|(a, m)| gamma * (a - m)).collect();
                norm(&d) / g
            }
            Err(Error::Divergence { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        ratios.push(r);
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    let k = ratios.len();
    Ok(if k % 2 == 1 { ratios[k / 2] } else { 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]) })
}

/// Calibration with Langevin estimates of `µ` using the inner-loop settings
/// in `cfg` (its `gamma` is ignored).
pub fn heuristic_gamma_calibration<O: Objective + ?Sized>(
    obj: &O,
    x: &ParamVector,
    cfg: &SgldConfig,
    batch_size: usize,
    settings: &CalibrationSettings,
    rng: &mut Rng,
) -> Result<Calibration> {
    SgldConfig { gamma: 0.0, ..*cfg }.validate()?;
    let est = SgldMean { objective: obj, config: *cfg, batch_size };
    calibrate_gamma_with(obj, &est, x, batch_size, settings, rng)
}
