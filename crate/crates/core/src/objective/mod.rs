//! Energy functions: the [`Objective`] interface, datasets and mini-batches,
//! analytic quadratics and one-dimensional test landscapes.

mod dataset;
mod landscape;
mod quadratic;

pub use dataset::{sample_minibatch, subsample, Dataset, MiniBatch};
pub use landscape::{GaussianWell, Landscape1D, LandscapeKind};
pub use quadratic::QuadraticObjective;

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::param::max_abs;

/// Randomness inside a loss evaluation (dropout masks).
///
/// `Off` evaluates the deterministic inference-mode function; `Seeded` draws
/// any masks from a stream seeded by the given value, so an evaluation is a
/// pure function of `(x, batch, seed)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Off,
    Seeded(u64),
}

/// Batch size used when the full-dataset functions walk the data in chunks.
pub const EVAL_CHUNK: usize = 1024;

/// An energy `f(x) = (1/N) Σ_k f(x; ξ_k)` over `num_samples()` samples.
///
/// Analytic objectives report `num_samples() == 1` and ignore batch contents.
/// Implementations hold no interior mutability, so concurrent evaluation at
/// different points is safe.
pub trait Objective {
    fn dim(&self) -> usize;

    fn num_samples(&self) -> usize;

    /// Mean loss over `batch`, writing its gradient into `grad`.
    fn batch_loss_grad(&self, x: &[f64], batch: &[usize], noise: Noise, grad: &mut [f64]) -> Result<f64>;

    fn batch_loss(&self, x: &[f64], batch: &[usize], noise: Noise) -> Result<f64> {
        let mut scratch = alloc::vec![0.0; self.dim()];
        self.batch_loss_grad(x, batch, noise, &mut scratch)
    }

    fn full_loss(&self, x: &[f64]) -> Result<f64> {
        let n = self.num_samples();
        let mut total = 0.0;
        for chunk in full_chunks(n) {
            total += self.batch_loss(x, &chunk, Noise::Off)? * chunk.len() as f64;
        }
        Ok(total / n as f64)
    }

    fn full_loss_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dim(self.dim(), grad.len())?;
        let n = self.num_samples();
        let mut part = alloc::vec![0.0; self.dim()];
        grad.fill(0.0);
        let mut total = 0.0;
        for chunk in full_chunks(n) {
            let w = chunk.len() as f64;
            total += self.batch_loss_grad(x, &chunk, Noise::Off, &mut part)? * w;
            for (g, p) in grad.iter_mut().zip(&part) {
                *g += p * w;
            }
        }
        let inv = 1.0 / n as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok(total * inv)
    }
}

fn full_chunks(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).step_by(EVAL_CHUNK).map(move |s| (s..(s + EVAL_CHUNK).min(n)).collect())
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_samples(&self) -> usize {
        (**self).num_samples()
    }
    fn batch_loss_grad(&self, x: &[f64], batch: &[usize], noise: Noise, grad: &mut [f64]) -> Result<f64> {
        (**self).batch_loss_grad(x, batch, noise, grad)
    }
    fn batch_loss(&self, x: &[f64], batch: &[usize], noise: Noise) -> Result<f64> {
        (**self).batch_loss(x, batch, noise)
    }
    fn full_loss(&self, x: &[f64]) -> Result<f64> {
        (**self).full_loss(x)
    }
    fn full_loss_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        (**self).full_loss_grad(x, grad)
    }
}

/// The constant energy `f ≡ value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flat {
    pub dim: usize,
    pub value: f64,
}

impl Objective for Flat {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn batch_loss_grad(&self, x: &[f64], _batch: &[usize], _noise: Noise, grad: &mut [f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, grad.len())?;
        grad.fill(0.0);
        Ok(self.value)
    }
}

/// Default cap on the parameter count for dense Hessians.
pub const DEFAULT_HESSIAN_CAP: usize = 5000;

/// Relative asymmetry above which a Hessian estimate is flagged.
pub const ASYMMETRY_WARNING: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct HessianEstimate {
    /// Symmetrized matrix `(H + Hᵀ) / 2`.
    pub matrix: DMatrix<f64>,
    /// `max|H - Hᵀ| / max|H|` of the raw column estimate.
    pub raw_asymmetry: f64,
}

impl HessianEstimate {
    pub fn asymmetry_warning(&self) -> bool {
        self.raw_asymmetry > ASYMMETRY_WARNING
    }
}

/// Dense Hessian of the full-dataset loss, assembled column by column from
/// central differences of the analytic gradient with step
/// `h = 1e-4 · max(1, ‖x‖∞)`.
///
/// Columns are independent; the result does not depend on evaluation order.
pub fn finite_difference_hessian<O: Objective + ?Sized>(obj: &O, x: &[f64], cap: usize) -> Result<HessianEstimate> {
    let n = obj.dim();
    check_dim(n, x.len())?;
    if n > cap {
        return Err(Error::ResourceLimit { what: "hessian dimension", requested: n, cap });
    }
    let h = 1e-4 * max_abs(x).max(1.0);
    let mut raw = DMatrix::<f64>::zeros(n, n);
    let mut probe: Vec<f64> = x.to_vec();
    let mut g_plus = alloc::vec![0.0; n];
    let mut g_minus = alloc::vec![0.0; n];
    for j in 0..n {
        let (up, down) = (x[j] + h, x[j] - h);
        probe[j] = up;
        obj.full_loss_grad(&probe, &mut g_plus)?;
        probe[j] = down;
        obj.full_loss_grad(&probe, &mut g_minus)?;
        probe[j] = x[j];
        let step = up - down;
        for i in 0..n {
            raw[(i, j)] = (g_plus[i] - g_minus[i]) / step;
        }
    }
    let scale = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((raw[(i, j)] - raw[(j, i)]).abs());
            let avg = 0.5 * (raw[(i, j)] + raw[(j, i)]);
            raw[(i, j)] = avg;
            raw[(j, i)] = avg;
        }
    }
    let raw_asymmetry = if scale > 0.0 { asym / scale } else { 0.0 };
    Ok(HessianEstimate { matrix: raw, raw_asymmetry })
}

/// Per-coordinate population variance of mini-batch gradients, a diagonal
/// Fisher proxy: `E[g²] - (E g)²` accumulated with Welford's update so every
/// entry is non-negative.
///
/// Each pass shuffles the samples and walks them in batches of `m` (the last
/// batch may be short). Gradients are evaluated with noise off.
pub fn fisher_diagonal<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    m: usize,
    passes: usize,
    rng: &mut crate::rng::Rng,
) -> Result<Vec<f64>> {
    use rand::seq::SliceRandom;

    let n = obj.dim();
    check_dim(n, x.len())?;
    let population = obj.num_samples();
    if passes == 0 || m == 0 || m > population {
        return Err(crate::error::invalid("fisher_diagonal needs passes >= 1 and 1 <= m <= N"));
    }
    let mut mean = alloc::vec![0.0; n];
    let mut m2 = alloc::vec![0.0; n];
    let mut g = alloc::vec![0.0; n];
    let mut count = 0.0;
    let mut order: Vec<usize> = (0..population).collect();
    for _ in 0..passes {
        order.shuffle(rng);
        for batch in order.chunks(m) {
            obj.batch_loss_grad(x, batch, Noise::Off, &mut g)?;
            count += 1.0;
            for i in 0..n {
                let delta = g[i] - mean[i];
                mean[i] += delta / count;
                m2[i] += delta * (g[i] - mean[i]);
            }
        }
    }
    Ok(m2.into_iter().map(|v| (v / count).max(0.0)).collect())
}
