use alloc::vec::Vec;

use super::{Noise, Objective};
use crate::error::{check_dim, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWell {
    pub center: f64,
    pub width: f64,
    pub depth: f64,
}

impl GaussianWell {
    fn value(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        self.depth * libm::exp(-0.5 * z * z)
    }

    fn slope(&self, x: f64) -> f64 {
        -self.value(x) * (x - self.center) / (self.width * self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandscapeKind {
    DoubleWell,
    Custom,
}

/// One-dimensional energy
/// `f(x) = offset + ½·curvature·(x − curvature_center)² − Σ depthᵢ·exp(−(x − cᵢ)² / (2σᵢ²))`.
///
/// The double-well default has a wide shallow well at −2 and a sharp, deeper
/// global minimum at +2.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape1D {
    pub kind: LandscapeKind,
    pub offset: f64,
    pub curvature: f64,
    pub curvature_center: f64,
    pub wells: Vec<GaussianWell>,
}

impl Default for Landscape1D {
    fn default() -> Self {
        Self::double_well(-2.0, 1.0, 0.8, 2.0, 0.05, 1.0).expect("default parameters are valid")
    }
}

impl Landscape1D {
    /// Wide well (`c_w`, `σ_w`, `h_w`) plus sharp well (`c_s`, `σ_s`, `h_s`) on a unit plateau.
    pub fn double_well(c_w: f64, sigma_w: f64, h_w: f64, c_s: f64, sigma_s: f64, h_s: f64) -> Result<Self> {
        if !(sigma_w > sigma_s && sigma_s > 0.0) {
            return Err(invalid("double well needs sigma_w > sigma_s > 0"));
        }
        Ok(Self {
            kind: LandscapeKind::DoubleWell,
            offset: 1.0,
            curvature: 0.0,
            curvature_center: 0.0,
            wells: alloc::vec![
                GaussianWell { center: c_w, width: sigma_w, depth: h_w },
                GaussianWell { center: c_s, width: sigma_s, depth: h_s },
            ],
        })
    }

    /// `f(x) = ½ a x²`.
    pub fn quadratic(a: f64) -> Self {
        Self { kind: LandscapeKind::Custom, offset: 0.0, curvature: a, curvature_center: 0.0, wells: Vec::new() }
    }

    pub fn custom(offset: f64, wells: Vec<GaussianWell>) -> Result<Self> {
        if wells.iter().any(|w| !(w.width > 0.0)) {
            return Err(invalid("well widths must be positive"));
        }
        Ok(Self { kind: LandscapeKind::Custom, offset, curvature: 0.0, curvature_center: 0.0, wells })
    }

    /// The same landscape moved right by `shift`.
    pub fn translated(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.curvature_center += shift;
        for w in out.wells.iter_mut() {
            w.center += shift;
        }
        out
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = x - self.curvature_center;
        self.offset + 0.5 * self.curvature * d * d - self.wells.iter().map(|w| w.value(x)).sum::<f64>()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.curvature * (x - self.curvature_center) - self.wells.iter().map(|w| w.slope(x)).sum::<f64>()
    }

    /// `offset − Σ max(depth, 0)` when curvature is non-negative.
    pub fn lower_bound(&self) -> f64 {
        if self.curvature < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.offset - self.wells.iter().map(|w| w.depth.max(0.0)).sum::<f64>()
    }

    pub fn smallest_width(&self) -> Option<f64> {
        self.wells.iter().map(|w| w.width).reduce(f64::min)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(1, x.len())?;
        Ok(self.value(x[0]))
    }
}

impl Objective for Landscape1D {
    fn dim(&self) -> usize {
        1
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn batch_loss_grad(&self, x: &[f64], _batch: &[usize], _noise: Noise, grad: &mut [f64]) -> Result<f64> {
        check_dim(1, grad.len())?;
        let v = self.eval(x)?;
        grad[0] = self.derivative(x[0]);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_values_at_well_centers() {
        let f = Landscape1D::default();
        // sharp well bottom plus the wide well's tail 0.8·e^{-8}
        let tail = 0.8 * libm::exp(-8.0);
        assert!((f.eval(&[2.0]).unwrap() - (0.0 - tail)).abs() < 1e-12);
        // wide well bottom; the sharp well's tail e^{-3200} underflows
        assert!((f.eval(&[-2.0]).unwrap() - 0.2).abs() < 1e-12);
        assert!(f.lower_bound() <= f.value(2.0));
    }

    #[test]
    fn rejects_inverted_widths() {
        assert!(Landscape1D::double_well(-2.0, 0.05, 0.8, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(Landscape1D::default().eval(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn default_has_two_minima_with_global_in_sharp_well() {
        let f = Landscape1D::default();
        let (lo, hi, n) = (-6.0, 6.0, 240_001);
        let h = (hi - lo) / (n - 1) as f64;
        let vals: alloc::vec::Vec<f64> = (0..n).map(|i| f.value(lo + i as f64 * h)).collect();
        let minima: alloc::vec::Vec<usize> = (1..n - 1).filter(|&i| vals[i] < vals[i - 1] && vals[i] < vals[i + 1]).collect();
        assert_eq!(minima.len(), 2);
        let global = *minima.iter().min_by(|&&a, &&b| vals[a].total_cmp(&vals[b])).unwrap();
        assert!((lo + global as f64 * h - 2.0).abs() < 0.05);
    }

    #[test]
    fn translation_moves_values() {
        let f = Landscape1D::default();
        let g = f.translated(1.5);
        for x in [-3.0, -0.5, 0.7, 2.2] {
            assert!((f.value(x) - g.value(x + 1.5)).abs() < 1e-15);
        }
    }
}
