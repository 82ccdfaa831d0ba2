//! Reference values for local entropy: composite Simpson quadrature on
//! one- and two-dimensional landscapes, the closed form for quadratics and
//! the saddle-point approximation of its gradient.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Error, Result};
use crate::objective::{finite_difference_hessian, Landscape1D, Objective, QuadraticObjective};
use crate::param::ParamVector;
use crate::rng::Rng;
use crate::sampler::{LocalMean, SgldDiagnostics};

/// Minimum number of quadrature nodes.
pub const MIN_POINTS: usize = 2001;
/// Half-width of the required coverage in standard deviations of the coupling.
pub const COVERAGE_SIGMAS: f64 = 8.0;
/// Largest relative mass tolerated in the outer strips of a grid.
pub const MAX_TAIL_MASS: f64 = 1e-10;
/// Fraction of the grid on each side audited for tail mass.
const TAIL_FRACTION: f64 = 0.05;
/// Upper limit on nodes per axis for the two-dimensional rule.
pub const MAX_POINTS_2D: usize = 4001;
/// Upper limit on nodes for automatically sized windows.
const MAX_AUTO_POINTS: usize = 2_000_001;
/// Log-weights within this distance of the peak count as the bulk.
const BULK_LOG_RANGE: f64 = 40.0;

/// Modified Gibbs density `∝ exp(−β f(x′) − β γ/2 ‖x − x′‖²)` centred at `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    pub beta: f64,
    pub gamma: f64,
    pub center: ParamVector,
}

impl GibbsSpec {
    pub fn new(beta: f64, gamma: f64, center: ParamVector) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta must be positive"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma must be non-negative"));
        }
        Ok(Self { beta, gamma, center })
    }

    /// Unit inverse temperature, as used by local entropy.
    pub fn local(gamma: f64, center: ParamVector) -> Result<Self> {
        Self::new(1.0, gamma, center)
    }

    /// 1D convenience constructor at unit inverse temperature.
    pub fn at(gamma: f64, x: f64) -> Result<Self> {
        Self::local(gamma, ParamVector::new(alloc::vec![x])?)
    }

    fn require_unit_beta(&self) -> Result<()> {
        if self.beta == 1.0 {
            Ok(())
        } else {
            Err(invalid("local entropy is defined at beta = 1"))
        }
    }

    fn scalar_center(&self) -> Result<f64> {
        check_dim(1, self.center.len())?;
        Ok(self.center[0])
    }

    /// Standard deviation of the Gaussian coupling, infinite when γ = 0.
    pub fn coupling_sigma(&self) -> f64 {
        1.0 / libm::sqrt(self.beta * self.gamma)
    }
}

/// Uniform grid of `points` nodes on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl QuadratureGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid("grid needs finite lo < hi"));
        }
        if points < 3 || points.is_multiple_of(2) {
            return Err(invalid("Simpson's rule needs an odd number of nodes"));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.node(i))
    }

    /// Integration window containing `center ± 8σ` of the coupling and the
    /// bulk of the integrand, with spacing that resolves both the coupling
    /// and the narrowest feature of `f`.
    ///
    /// The window starts at `center ± 8σ` and each side is widened until
    /// every node within `e^{-40}` of the peak lies clear of the audited
    /// edge strips.
    pub fn covering(f: &Landscape1D, spec: &GibbsSpec) -> Result<Self> {
        let x = spec.scalar_center()?;
        if !(spec.gamma > 0.0) {
            return Err(invalid("an automatic window needs gamma > 0"));
        }
        let sigma = spec.coupling_sigma();
        let mut scale = sigma;
        if f.curvature > 0.0 {
            scale = scale.min(1.0 / libm::sqrt(spec.beta * (f.curvature + spec.gamma)));
        }
        if let Some(w) = f.smallest_width() {
            scale = scale.min(w);
        }
        let resolution = scale / 10.0;
        let half = COVERAGE_SIGMAS * sigma * 1.02;
        let (mut lo, mut hi) = (x - half, x + half);
        for _ in 0..64 {
            let grid = Self::with_resolution(lo, hi, resolution)?;
            let logw: Vec<f64> = grid.nodes().map(|y| log_weight(f, spec, x, y)).collect();
            let peak = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !peak.is_finite() {
                return Err(invalid("integrand vanishes or overflows on the grid"));
            }
            let bulk = |l: &f64| *l >= peak - BULK_LOG_RANGE;
            let first = logw.iter().position(bulk).unwrap_or(0);
            let last = logw.iter().rposition(bulk).unwrap_or(grid.points - 1);
            let strip = libm::ceil(grid.points as f64 * TAIL_FRACTION) as usize + 1;
            let width = hi - lo;
            let (grow_lo, grow_hi) = (first < strip, last + strip >= grid.points);
            if !grow_lo && !grow_hi {
                return Ok(grid);
            }
            if grow_lo {
                lo -= 0.5 * width;
            }
            if grow_hi {
                hi += 0.5 * width;
            }
        }
        Err(Error::GridCoverage(alloc::format!("integrand mass not contained near {x}")))
    }

    fn with_resolution(lo: f64, hi: f64, resolution: f64) -> Result<Self> {
        let wanted = libm::ceil((hi - lo) / resolution) as usize + 1;
        let mut points = wanted.max(MIN_POINTS);
        if points.is_multiple_of(2) {
            points += 1;
        }
        if points > MAX_AUTO_POINTS {
            return Err(Error::ResourceLimit { what: "quadrature nodes", requested: points, cap: MAX_AUTO_POINTS });
        }
        Self::new(lo, hi, points)
    }

    fn check_for(&self, x: f64, spec: &GibbsSpec) -> Result<()> {
        if self.points < MIN_POINTS {
            return Err(invalid(alloc::format!("quadrature needs at least {MIN_POINTS} nodes")));
        }
        if spec.gamma > 0.0 {
            let reach = COVERAGE_SIGMAS * spec.coupling_sigma();
            if self.lo > x - reach || self.hi < x + reach {
                return Err(Error::GridCoverage(alloc::format!(
                    "[{}, {}] does not contain {x} ± {reach}",
                    self.lo,
                    self.hi
                )));
            }
        }
        Ok(())
    }
}

fn simpson_coefficient(i: usize, points: usize) -> f64 {
    if i == 0 || i + 1 == points {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

fn log_weight(f: &Landscape1D, spec: &GibbsSpec, x: f64, y: f64) -> f64 {
    let d = x - y;
    -spec.beta * f.value(y) - 0.5 * spec.beta * spec.gamma * d * d
}

/// Moments of the modified Gibbs density on a 1D grid.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    log_z: f64,
    mean: f64,
    /// `⟨−β f(x′) − β γ/2 (x − x′)²⟩`
    mean_log_weight: f64,
}

fn moments_1d(f: &Landscape1D, spec: &GibbsSpec, grid: &QuadratureGrid) -> Result<Moments> {
    let x = spec.scalar_center()?;
    grid.check_for(x, spec)?;
    let logw: Vec<f64> = grid.nodes().map(|y| log_weight(f, spec, x, y)).collect();
    if logw.iter().any(|v| v.is_nan()) {
        return Err(invalid("landscape produced NaN on the grid"));
    }
    let peak = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(invalid("integrand vanishes or overflows on the grid"));
    }
    let n = grid.points;
    let strip = libm::ceil(n as f64 * TAIL_FRACTION) as usize;
    let (mut total, mut tail, mut first, mut second) = (0.0, 0.0, 0.0, 0.0);
    for (i, (&l, y)) in logw.iter().zip(grid.nodes()).enumerate() {
        let w = simpson_coefficient(i, n) * libm::exp(l - peak);
        total += w;
        first += w * y;
        second += w * l;
        if i < strip || i >= n - strip {
            tail += w;
        }
    }
    if tail > MAX_TAIL_MASS * total {
        return Err(Error::GridCoverage(alloc::format!(
            "relative mass {:.3e} in the outer strips exceeds {MAX_TAIL_MASS:e}",
            tail / total
        )));
    }
    Ok(Moments {
        log_z: peak + libm::log(total * grid.step() / 3.0),
        mean: first / total,
        mean_log_weight: second / total,
    })
}

/// `log ∫ exp(−β f(x′) − β γ/2 (x − x′)²) dx′` for any β.
pub fn log_partition_quadrature(f: &Landscape1D, spec: &GibbsSpec, grid: &QuadratureGrid) -> Result<f64> {
    Ok(moments_1d(f, spec, grid)?.log_z)
}

/// Local entropy `F(x, γ)` by composite Simpson quadrature.
pub fn local_entropy_quadrature(f: &Landscape1D, spec: &GibbsSpec, grid: &QuadratureGrid) -> Result<f64> {
    spec.require_unit_beta()?;
    Ok(moments_1d(f, spec, grid)?.log_z)
}

/// `∂F/∂x = −γ (x − ⟨x′⟩)` with the mean taken by quadrature.
pub fn local_entropy_grad_quadrature(f: &Landscape1D, spec: &GibbsSpec, grid: &QuadratureGrid) -> Result<f64> {
    spec.require_unit_beta()?;
    let m = moments_1d(f, spec, grid)?;
    Ok(-spec.gamma * (spec.center[0] - m.mean))
}

/// `⟨x′⟩` under the modified Gibbs density.
pub fn local_mean_quadrature(f: &Landscape1D, spec: &GibbsSpec, grid: &QuadratureGrid) -> Result<f64> {
    Ok(moments_1d(f, spec, grid)?.mean)
}

/// Differential entropy `−∫ P log P` of the modified Gibbs density.
pub fn classical_entropy_quadrature(f: &Landscape1D, spec: &GibbsSpec, grid: &QuadratureGrid) -> Result<f64> {
    let m = moments_1d(f, spec, grid)?;
    Ok(m.log_z - m.mean_log_weight)
}

/// `(F, ∇F, ⟨x′⟩)` of a quadratic objective.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticEntropy {
    pub value: f64,
    pub grad: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Exact local entropy of `f(x′) = ½ x′ᵀA x′ + bᵀx′`.
///
/// With `P = A + γI` and `h = γx − b`:
/// `⟨x′⟩ = P⁻¹h`, `∇F = −γ(x − ⟨x′⟩)` and
/// `F = n/2·log 2π − ½ log det P + ½ hᵀP⁻¹h − γ/2 ‖x‖²`.
pub fn local_entropy_quadratic_closed_form(a: &DMatrix<f64>, b: &[f64], spec: &GibbsSpec) -> Result<QuadraticEntropy> {
    spec.require_unit_beta()?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(invalid("curvature matrix must be square"));
    }
    check_dim(n, b.len())?;
    check_dim(n, spec.center.len())?;
    let gamma = spec.gamma;
    let x = DVector::from_column_slice(&spec.center);
    let mut p = a.clone();
    for i in 0..n {
        p[(i, i)] += gamma;
    }
    let chol = p
        .cholesky()
        .ok_or_else(|| Error::Singular(alloc::format!("A + {gamma}·I is not positive definite")))?;
    let h = &x * gamma - DVector::from_column_slice(b);
    let mean = chol.solve(&h);
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| libm::log(*d)).sum::<f64>();
    let value = 0.5 * n as f64 * libm::log(2.0 * PI) - 0.5 * log_det + 0.5 * h.dot(&mean) - 0.5 * gamma * x.dot(&x);
    let grad = x.iter().zip(mean.iter()).map(|(xi, mi)| -gamma * (xi - mi)).collect();
    Ok(QuadraticEntropy { value, grad, mean: mean.iter().copied().collect() })
}

/// `γ (H + γI)⁻¹ g`, the saddle-point approximation of `−∇F` from a Hessian
/// `H` and gradient `g` at the same point.
pub fn saddle_point_grad_from(hessian: &DMatrix<f64>, grad: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let n = hessian.nrows();
    if hessian.ncols() != n {
        return Err(invalid("Hessian must be square"));
    }
    check_dim(n, grad.len())?;
    let mut m = hessian.clone();
    for i in 0..n {
        m[(i, i)] += gamma;
    }
    let g = DVector::from_column_slice(grad);
    let y = m
        .lu()
        .solve(&g)
        .ok_or_else(|| Error::Singular(alloc::format!("H + {gamma}·I is singular")))?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(alloc::format!("H + {gamma}·I is numerically singular")));
    }
    Ok(y.iter().map(|v| gamma * v).collect())
}

/// Saddle-point approximation at `x`, with a finite-difference Hessian of the
/// full loss.
pub fn saddle_point_grad<O: Objective + ?Sized>(obj: &O, x: &[f64], gamma: f64, hessian_cap: usize) -> Result<Vec<f64>> {
    let h = finite_difference_hessian(obj, x, hessian_cap)?;
    let mut g = alloc::vec![0.0; x.len()];
    obj.full_loss_grad(x, &mut g)?;
    saddle_point_grad_from(&h.matrix, &g, gamma)
}

/// `−F(·, γ)` sampled on a query grid for one scope.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingCurve {
    pub gamma: f64,
    pub xs: Vec<f64>,
    pub neg_f: Vec<f64>,
    /// Query point with the smallest `−F`.
    pub argmin: f64,
}

/// Evaluates `−F(x, γ)` at every node of `query` for each γ, integrating
/// over a window sized for each query point.
pub fn smoothing_family(f: &Landscape1D, gammas: &[f64], query: &QuadratureGrid) -> Result<Vec<SmoothingCurve>> {
    if gammas.len() < 2 {
        return Err(invalid("a smoothing family needs at least two scopes"));
    }
    gammas
        .iter()
        .map(|&gamma| {
            let xs: Vec<f64> = query.nodes().collect();
            let mut neg_f = Vec::with_capacity(xs.len());
            for &x in &xs {
                let spec = GibbsSpec::at(gamma, x)?;
                let window = QuadratureGrid::covering(f, &spec)?;
                neg_f.push(-local_entropy_quadrature(f, &spec, &window)?);
            }
            let best = neg_f
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            Ok(SmoothingCurve { gamma, argmin: xs[best], xs, neg_f })
        })
        .collect()
}

/// Local entropy and mean of a 2D energy by a tensor-product Simpson rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropy2D {
    pub value: f64,
    pub mean: [f64; 2],
    pub grad: [f64; 2],
}

pub fn local_entropy_quadrature_2d(
    f: impl Fn(f64, f64) -> f64,
    spec: &GibbsSpec,
    gx: &QuadratureGrid,
    gy: &QuadratureGrid,
) -> Result<Entropy2D> {
    spec.require_unit_beta()?;
    check_dim(2, spec.center.len())?;
    for g in [gx, gy] {
        if g.points > MAX_POINTS_2D {
            return Err(Error::ResourceLimit { what: "nodes per axis", requested: g.points, cap: MAX_POINTS_2D });
        }
    }
    let (cx, cy) = (spec.center[0], spec.center[1]);
    gx.check_for(cx, spec)?;
    gy.check_for(cy, spec)?;
    let gamma = spec.gamma;
    let log_weight = |x: f64, y: f64| {
        let (dx, dy) = (cx - x, cy - y);
        -f(x, y) - 0.5 * gamma * (dx * dx + dy * dy)
    };
    let mut peak = f64::NEG_INFINITY;
    for x in gx.nodes() {
        for y in gy.nodes() {
            peak = peak.max(log_weight(x, y));
        }
    }
    if !peak.is_finite() {
        return Err(invalid("integrand vanishes or overflows on the grid"));
    }
    let (sx, sy) = (
        libm::ceil(gx.points as f64 * TAIL_FRACTION) as usize,
        libm::ceil(gy.points as f64 * TAIL_FRACTION) as usize,
    );
    let (mut total, mut tail, mut mx, mut my) = (0.0, 0.0, 0.0, 0.0);
    for (i, x) in gx.nodes().enumerate() {
        let ci = simpson_coefficient(i, gx.points);
        for (j, y) in gy.nodes().enumerate() {
            let w = ci * simpson_coefficient(j, gy.points) * libm::exp(log_weight(x, y) - peak);
            total += w;
            mx += w * x;
            my += w * y;
            if i < sx || i >= gx.points - sx || j < sy || j >= gy.points - sy {
                tail += w;
            }
        }
    }
    if tail > MAX_TAIL_MASS * total {
        return Err(Error::GridCoverage(alloc::format!("relative edge mass {:.3e}", tail / total)));
    }
    let mean = [mx / total, my / total];
    Ok(Entropy2D {
        value: peak + libm::log(total * gx.step() * gy.step() / 9.0),
        mean,
        grad: [-gamma * (cx - mean[0]), -gamma * (cy - mean[1])],
    })
}

/// Lipschitz constant of `∇F` for a quadratic with the given curvature
/// spectrum: `max λγ / (λ + γ)`.
pub fn quadratic_entropy_smoothness(eigenvalues: &[f64], gamma: f64) -> f64 {
    eigenvalues.iter().map(|&l| l * gamma / (l + gamma)).fold(0.0, f64::max)
}

/// [`LocalMean`] from the closed form, for exact-mean experiments.
#[derive(Debug, Clone, Copy)]
pub struct ExactQuadraticMean<'q> {
    pub objective: &'q QuadraticObjective,
}

impl LocalMean for ExactQuadraticMean<'_> {
    fn local_mean(&self, anchor: &[f64], gamma: f64, _rng: &mut Rng) -> Result<(Vec<f64>, Option<SgldDiagnostics>)> {
        let spec = GibbsSpec::local(gamma, ParamVector::new(anchor.to_vec())?)?;
        let e = local_entropy_quadratic_closed_form(self.objective.curvature(), self.objective.linear(), &spec)?;
        Ok((e.mean, None))
    }

    fn batches_per_estimate(&self) -> usize {
        0
    }
}
