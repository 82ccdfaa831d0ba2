//! Post-training instruments: eigenvalue spectra, gradient angles and
//! sampled Lipschitz constants of gradient fields.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{invalid, Error, Result};
use crate::param::{distance, dot, norm};
use crate::rng::{fill_standard_normal, Rng};

/// Thresholds reported by default for near-zero eigenvalue fractions.
pub const DEFAULT_ZERO_THRESHOLDS: [f64; 3] = [1e-2, 1e-4, 1e-5];

const EIGEN_EPS: f64 = 1e-14;
/// Implicit QR sweeps allowed per row before giving up.
const EIGEN_SWEEPS_PER_ROW: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumSource {
    ExactHessian,
    FisherDiagonal,
}

impl SpectrumSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ExactHessian => "exact_hessian",
            Self::FisherDiagonal => "fisher_diagonal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub source: SpectrumSource,
}

/// One histogram bin `[lo, hi)`; the last bin of a range is closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl SpectrumReport {
    /// Full symmetric eigendecomposition of a (symmetrized) dense matrix.
    pub fn from_matrix(h: &DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() || h.nrows() == 0 {
            return Err(invalid("spectrum needs a non-empty square matrix"));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let eig = nalgebra::SymmetricEigen::try_new(h.clone(), EIGEN_EPS, EIGEN_SWEEPS_PER_ROW * h.nrows()).ok_or(Error::NoConvergence)?;
        Ok(Self::sorted(eig.eigenvalues.iter().copied().collect(), SpectrumSource::ExactHessian))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        if d.is_empty() || d.iter().any(|v| !v.is_finite()) {
            return Err(invalid("diagonal must be non-empty and finite"));
        }
        Ok(Self::sorted(d.to_vec(), SpectrumSource::FisherDiagonal))
    }

    fn sorted(mut eigenvalues: Vec<f64>, source: SpectrumSource) -> Self {
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        Self { eigenvalues, source }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eig(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eig(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Fraction with `|λ| ≤ threshold`.
    pub fn frac_near_zero(&self, threshold: f64) -> f64 {
        let lo = self.eigenvalues.partition_point(|&v| v < -threshold);
        let hi = self.eigenvalues.partition_point(|&v| v <= threshold);
        hi.saturating_sub(lo) as f64 / self.n() as f64
    }

    /// `bins` equal-width bins over `[min, max]`. Bins may be empty.
    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        let bins = bins.max(1);
        let (lo, hi) = (self.min_eig(), self.max_eig());
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut out: Vec<HistogramBin> = (0..bins)
            .map(|k| HistogramBin { lo: lo + k as f64 * width, hi: if k + 1 == bins { hi.max(lo + width) } else { lo + (k + 1) as f64 * width }, count: 0 })
            .collect();
        for &v in &self.eigenvalues {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            out[k].count += 1;
        }
        out
    }

    /// Counts in nested bands `|λ| ≤ t` for each threshold, ascending.
    pub fn zero_bins(&self, thresholds: &[f64]) -> Vec<(f64, usize)> {
        let mut t: Vec<f64> = thresholds.to_vec();
        t.sort_by(|a, b| a.total_cmp(b));
        t.into_iter()
            .map(|t| (t, libm::round(self.frac_near_zero(t) * self.n() as f64) as usize))
            .collect()
    }
}

/// Angle in degrees between two nonzero vectors, `arccos` of their cosine
/// similarity. Evaluated as `2·atan2(‖u − v‖, ‖u + v‖)` on the unit vectors,
/// which stays accurate near 0° and 180°.
pub fn gradient_angle(a: &[f64], b: &[f64]) -> Result<f64> {
    crate::error::check_dim(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::UndefinedAngle);
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let angle = 2.0 * libm::atan2(libm::sqrt(diff), libm::sqrt(sum));
    Ok(angle.to_degrees().clamp(0.0, 180.0))
}

/// Cosine similarity clamped to `[−1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    crate::error::check_dim(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Minimum number of sampled pairs for a smoothness estimate.
pub const MIN_PAIRS: usize = 100;

/// Largest `‖∇(x) − ∇(y)‖ / ‖x − y‖` over `pairs` pairs drawn uniformly
/// from the ball of `radius` around `center`.
pub fn empirical_smoothness(
    mut gradient: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    center: &[f64],
    radius: f64,
    pairs: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if pairs < MIN_PAIRS {
        return Err(invalid(alloc::format!("need at least {MIN_PAIRS} pairs")));
    }
    if !(radius > 0.0 && radius.is_finite()) || center.is_empty() {
        return Err(invalid("sampling region must have positive radius"));
    }
    let mut best = 0.0_f64;
    for _ in 0..pairs {
        let x = ball_point(center, radius, rng);
        let y = ball_point(center, radius, rng);
        let d = distance(&x, &y);
        if d == 0.0 {
            continue;
        }
        let (gx, gy) = (gradient(&x)?, gradient(&y)?);
        best = best.max(distance(&gx, &gy) / d);
    }
    Ok(best)
}

fn ball_point(center: &[f64], radius: f64, rng: &mut Rng) -> Vec<f64> {
    let n = center.len();
    let mut z = alloc::vec![0.0; n];
    loop {
        fill_standard_normal(rng, &mut z);
        let len = norm(&z);
        if len > 0.0 {
            let u: f64 = rng.random();
            let r = radius * libm::pow(u, 1.0 / n as f64) / len;
            return center.iter().zip(&z).map(|(c, v)| c + r * v).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use alloc::vec;
    use nalgebra::DVector;

    #[test]
    fn diagonal_matrix_spectrum() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let r = SpectrumReport::from_matrix(&h).unwrap();
        assert_eq!(r.eigenvalues.len(), 3);
        for (a, b) in r.eigenvalues.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((r.trace() - 6.0).abs() < 1e-13);
        assert_eq!(r.source, SpectrumSource::ExactHessian);
    }

    #[test]
    fn near_zero_fraction_uses_closed_band() {
        let r = SpectrumReport::from_diagonal(&[-1e-2, -1e-3, 0.0, 1e-2, 0.5]).unwrap();
        assert_eq!(r.frac_near_zero(1e-2), 0.8);
        assert_eq!(r.frac_near_zero(1e-3), 0.4);
        assert_eq!(r.frac_near_zero(0.0), 0.2);
        assert_eq!(r.zero_bins(&[1e-2, 1e-3]), vec![(1e-3, 2), (1e-2, 4)]);
    }

    #[test]
    fn histogram_counts_everything() {
        let r = SpectrumReport::from_diagonal(&[0.0, 0.0, 0.0, 1.0, 10.0]).unwrap();
        let h = r.histogram(10);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h[0].count, 3);
        assert_eq!(h[1].count, 1);
        assert_eq!(h[9].count, 1);
        assert!(h[2..9].iter().all(|b| b.count == 0));
    }

    #[test]
    fn angles() {
        assert!(gradient_angle(&[1.0, 2.0], &[1.0, 2.0]).unwrap().abs() < 1e-6);
        assert!((gradient_angle(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() - 180.0).abs() < 1e-6);
        assert!((gradient_angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(gradient_angle(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::UndefinedAngle));
    }

    #[test]
    fn constant_field_is_zero_smooth() {
        let mut rng = seeded(0);
        let l = empirical_smoothness(|_| Ok(vec![1.0, -2.0]), &[0.0, 0.0], 1.0, 100, &mut rng).unwrap();
        assert_eq!(l, 0.0);
        assert!(empirical_smoothness(|_| Ok(vec![0.0]), &[0.0], 0.0, 100, &mut rng).is_err());
        assert!(empirical_smoothness(|_| Ok(vec![0.0]), &[0.0], 1.0, 99, &mut rng).is_err());
    }
}
