//! Quadrature reference computations exposed on the command line.

use lentropy::objective::Landscape1D;
use lentropy::oracle::{
    local_entropy_grad_quadrature, local_entropy_quadratic_closed_form, local_entropy_quadrature, smoothing_family,
    GibbsSpec, QuadratureGrid, SmoothingCurve,
};
use lentropy::ParamVector;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;

/// `−F(·, γ)` of the default double well on `points` nodes of `[lo, hi]`.
pub fn double_well_smoothing(gammas: &[f64], lo: f64, hi: f64, points: usize) -> Result<Vec<SmoothingCurve>> {
    let grid = QuadratureGrid::new(lo, hi, points)?;
    Ok(smoothing_family(&Landscape1D::default(), gammas, &grid)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureCheck {
    pub a: f64,
    pub gamma: f64,
    pub x: f64,
    pub value_error: f64,
    pub grad_error: f64,
}

/// Absolute errors of quadrature `F` and `∇F` against the closed form for
/// `f = ½ a x²`, over every `(a, γ)` pair at the anchor `x`.
pub fn quadratic_quadrature_checks(curvatures: &[f64], gammas: &[f64], x: f64) -> Result<Vec<QuadratureCheck>> {
    let mut out = Vec::new();
    for &a in curvatures {
        let f = Landscape1D::quadratic(a);
        for &gamma in gammas {
            let spec = GibbsSpec::at(gamma, x)?;
            let grid = QuadratureGrid::covering(&f, &spec)?;
            let value = local_entropy_quadrature(&f, &spec, &grid)?;
            let grad = local_entropy_grad_quadrature(&f, &spec, &grid)?;
            let exact = local_entropy_quadratic_closed_form(
                &DMatrix::from_element(1, 1, a),
                &[0.0],
                &GibbsSpec::local(gamma, ParamVector::new(vec![x])?)?,
            )?;
            out.push(QuadratureCheck {
                a,
                gamma,
                x,
                value_error: (value - exact.value).abs(),
                grad_error: (grad - exact.grad[0]).abs(),
            });
        }
    }
    Ok(out)
}
