//! Quadrature, closed forms and the saddle-point formula checked against
//! each other and against Gaussian integrals done by hand.

use lentropy::analysis::empirical_smoothness;
use lentropy::objective::{GaussianWell, Landscape1D, QuadraticObjective};
use lentropy::oracle::*;
use lentropy::rng::seeded;
use lentropy::ParamVector;
use nalgebra::DMatrix;

fn covering(f: &Landscape1D, gamma: f64, x: f64) -> (GibbsSpec, QuadratureGrid) {
    let spec = GibbsSpec::at(gamma, x).unwrap();
    let grid = QuadratureGrid::covering(f, &spec).unwrap();
    (spec, grid)
}

fn closed_1d(a: f64, gamma: f64, x: f64) -> QuadraticEntropy {
    let spec = GibbsSpec::at(gamma, x).unwrap();
    local_entropy_quadratic_closed_form(&DMatrix::from_element(1, 1, a), &[0.0], &spec).unwrap()
}

#[test]
fn quadrature_matches_closed_form_on_quadratics() {
    for a in [0.1, 1.0, 10.0] {
        let f = Landscape1D::quadratic(a);
        for gamma in [0.1, 1.0, 10.0] {
            for x in [-1.5, 0.0, 0.7, 2.0] {
                let (spec, grid) = covering(&f, gamma, x);
                let exact = closed_1d(a, gamma, x);
                let v = local_entropy_quadrature(&f, &spec, &grid).unwrap_or_else(|e| panic!("a={a} γ={gamma} x={x} {grid:?}: {e}"));
                let g = local_entropy_grad_quadrature(&f, &spec, &grid).unwrap();
                assert!((v - exact.value).abs() < 1e-8, "F a={a} γ={gamma} x={x}: {v} vs {}", exact.value);
                assert!((g - exact.grad[0]).abs() < 1e-8, "∇F a={a} γ={gamma} x={x}: {g} vs {}", exact.grad[0]);
                // ½ log(2π/(a+γ)) − aγ x² / (2(a+γ))
                let by_hand = 0.5 * (2.0 * std::f64::consts::PI / (a + gamma)).ln() - a * gamma * x * x / (2.0 * (a + gamma));
                assert!((exact.value - by_hand).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn closed_form_reference_values() {
    assert!((closed_1d(1.0, 1.0, 0.0).value - 0.572_364_942_924_700_1).abs() < 1e-12);
    let e = closed_1d(1.0, 1.0, 2.0);
    assert!((e.mean[0] - 1.0).abs() < 1e-15);
    assert!((e.grad[0] + 1.0).abs() < 1e-15);

    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 100.0]));
    let spec = GibbsSpec::local(1.0, ParamVector::new(vec![1.0, 1.0]).unwrap()).unwrap();
    let e = local_entropy_quadratic_closed_form(&a, &[0.0, 0.0], &spec).unwrap();
    assert!((e.grad[0] / e.grad[1] - 0.5 / (100.0 / 101.0)).abs() < 1e-14);
}

#[test]
fn gradient_is_the_derivative_of_the_value() {
    let landscapes = [Landscape1D::default(), Landscape1D::quadratic(2.0)];
    for f in &landscapes {
        for gamma in [0.1, 1.0, 5.0] {
            for x in [-2.5, -0.3, 1.9, 2.2] {
                let (spec, grid) = covering(f, gamma, x);
                let g = local_entropy_grad_quadrature(f, &spec, &grid).unwrap();
                let h = 1e-4;
                // same node layout shifted with the centre keeps the rule identical
                let shifted = |d: f64| {
                    let s = GibbsSpec::at(gamma, x + d).unwrap();
                    let w = QuadratureGrid::new(grid.lo + d, grid.hi + d, grid.points).unwrap();
                    local_entropy_quadrature(f, &s, &w).unwrap()
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                assert!((g - fd).abs() < 1e-8, "γ={gamma} x={x}: {g} vs {fd}");
            }
        }
    }
}

#[test]
fn even_landscape_has_zero_gradient_at_origin() {
    let f = Landscape1D::custom(
        0.5,
        vec![
            GaussianWell { center: -1.0, width: 0.4, depth: 1.0 },
            GaussianWell { center: 1.0, width: 0.4, depth: 1.0 },
        ],
    )
    .unwrap();
    let (spec, grid) = covering(&f, 0.5, 0.0);
    assert!(local_entropy_grad_quadrature(&f, &spec, &grid).unwrap().abs() < 1e-12);
}

#[test]
fn local_entropy_prefers_the_wide_well() {
    let f = Landscape1D::default();
    let at = |x: f64| {
        let (spec, grid) = covering(&f, 0.1, x);
        local_entropy_quadrature(&f, &spec, &grid).unwrap()
    };
    assert!(at(-2.0) > at(2.0));
    assert!(f.value(2.0) < f.value(-2.0));
}

#[test]
fn smoothing_family_moves_from_wide_to_sharp_minimum() {
    let f = Landscape1D::default();
    let query = QuadratureGrid::new(-4.0, 4.0, 801).unwrap();
    let curves = smoothing_family(&f, &[0.1, 1e6], &query).unwrap();
    assert!((curves[0].argmin + 2.0).abs() < 0.5, "{}", curves[0].argmin);
    assert!((curves[1].argmin - 2.0).abs() <= query.step() + 1e-12, "{}", curves[1].argmin);
    // −F + ½ log(2π/γ) approaches f as γ grows
    let c = &curves[1];
    let shift = 0.5 * (2.0 * std::f64::consts::PI / c.gamma).ln();
    for (x, nf) in c.xs.iter().zip(&c.neg_f).step_by(37) {
        assert!((nf + shift - f.value(*x)).abs() < 1e-3, "x={x}");
    }
}

#[test]
fn smoothing_is_translation_invariant() {
    let f = Landscape1D::default();
    let moved = f.translated(1.25);
    let q = QuadratureGrid::new(-3.0, 3.0, 61).unwrap();
    let q_moved = QuadratureGrid::new(-1.75, 4.25, 61).unwrap();
    let a = smoothing_family(&f, &[0.3, 3.0], &q).unwrap();
    let b = smoothing_family(&moved, &[0.3, 3.0], &q_moved).unwrap();
    for (ca, cb) in a.iter().zip(&b) {
        for (u, v) in ca.neg_f.iter().zip(&cb.neg_f) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}

#[test]
fn small_scope_flattens_the_landscape() {
    let f = Landscape1D::default();
    let q = QuadratureGrid::new(-4.0, 4.0, 41).unwrap();
    let curves = smoothing_family(&f, &[10.0, 1.0, 0.1, 0.01], &q).unwrap();
    let spread: Vec<f64> = curves
        .iter()
        .map(|c| {
            let hi = c.neg_f.iter().copied().fold(f64::MIN, f64::max);
            let lo = c.neg_f.iter().copied().fold(f64::MAX, f64::min);
            hi - lo
        })
        .collect();
    assert!(spread.windows(2).all(|w| w[1] < w[0]), "{spread:?}");
}

#[test]
fn gaussian_entropy_shrinks_with_scope() {
    let f = Landscape1D::custom(0.0, vec![]).unwrap();
    let mut last = f64::INFINITY;
    for gamma in [0.1, 1.0, 10.0, 100.0] {
        let (spec, grid) = covering(&f, gamma, 0.0);
        let s = classical_entropy_quadrature(&f, &spec, &grid).unwrap();
        let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E / gamma).ln();
        assert!((s - exact).abs() < 1e-9);
        assert!(s < last);
        last = s;
    }
}

#[test]
fn classical_and_local_entropy_rank_regions_differently() {
    // plateau on the left, wide shallow well in the middle, sharp deep well on the right
    let f = Landscape1D::custom(
        1.0,
        vec![
            GaussianWell { center: 0.0, width: 1.0, depth: 0.6 },
            GaussianWell { center: 4.0, width: 0.05, depth: 1.5 },
        ],
    )
    .unwrap();
    let gamma = 1.0;
    let eval = |x: f64| {
        let (spec, grid) = covering(&f, gamma, x);
        (
            classical_entropy_quadrature(&f, &spec, &grid).unwrap(),
            -local_entropy_quadrature(&f, &spec, &grid).unwrap(),
        )
    };
    let (s_plateau, nf_plateau) = eval(-5.0);
    let (s_wide, nf_wide) = eval(0.0);
    let (s_sharp, nf_sharp) = eval(4.0);
    // measured ordering: S is largest on the plateau, −F is smallest in the wide well
    assert!(s_plateau > s_wide && s_plateau > s_sharp, "{s_plateau} {s_wide} {s_sharp}");
    assert!(nf_wide < nf_plateau && nf_wide < nf_sharp, "{nf_plateau} {nf_wide} {nf_sharp}");
}

#[test]
fn tensor_quadrature_matches_closed_form_in_two_dimensions() {
    let spec = GibbsSpec::local(1.0, ParamVector::new(vec![0.8, -0.5]).unwrap()).unwrap();
    let (a1, a2) = (1.0, 4.0);
    let g = |c: f64| QuadratureGrid::new(c - 9.0, c + 9.0, 1201).unwrap();
    let q = local_entropy_quadrature_2d(|x, y| 0.5 * (a1 * x * x + a2 * y * y), &spec, &g(0.8), &g(-0.5));
    // fewer than the minimum nodes per axis is rejected; use the minimum
    assert!(q.is_err());
    let g = |c: f64| QuadratureGrid::new(c - 9.0, c + 9.0, 2001).unwrap();
    let q = local_entropy_quadrature_2d(|x, y| 0.5 * (a1 * x * x + a2 * y * y), &spec, &g(0.8), &g(-0.5)).unwrap();
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a1, a2]));
    let e = local_entropy_quadratic_closed_form(&a, &[0.0, 0.0], &spec).unwrap();
    assert!((q.value - e.value).abs() < 1e-8);
    assert!((q.grad[0] - e.grad[0]).abs() < 1e-8 && (q.grad[1] - e.grad[1]).abs() < 1e-8);
}

#[test]
fn tensor_quadrature_has_a_node_cap() {
    let spec = GibbsSpec::local(1.0, ParamVector::new(vec![0.0, 0.0]).unwrap()).unwrap();
    let big = QuadratureGrid::new(-9.0, 9.0, 4003).unwrap();
    let ok = QuadratureGrid::new(-9.0, 9.0, 2001).unwrap();
    let err = local_entropy_quadrature_2d(|_, _| 0.0, &spec, &big, &ok).unwrap_err();
    assert!(matches!(err, lentropy::Error::ResourceLimit { .. }));
}

#[test]
fn saddle_point_formula_is_exact_for_quadratics() {
    let basis = DMatrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7 + (i == j) as u8 as f64);
    let q = QuadraticObjective::with_spectrum(&[0.3, 1.0, 2.5, 7.0], basis, vec![0.2, -0.1, 0.4, 0.0]).unwrap();
    let x = [0.5, -1.0, 0.25, 2.0];
    for gamma in [0.1, 1.0, 10.0] {
        let sp = saddle_point_grad_from(q.curvature(), &q.gradient(&x).unwrap(), gamma).unwrap();
        let spec = GibbsSpec::local(gamma, ParamVector::new(x.to_vec()).unwrap()).unwrap();
        let e = local_entropy_quadratic_closed_form(q.curvature(), q.linear(), &spec).unwrap();
        for (s, g) in sp.iter().zip(&e.grad) {
            assert!((s + g).abs() < 1e-12, "{s} vs {}", -g);
        }
        let fd = saddle_point_grad(&q, &x, gamma, 100).unwrap();
        for (s, f) in sp.iter().zip(&fd) {
            assert!((s - f).abs() < 1e-7);
        }
    }
}

#[test]
fn entropy_gradient_is_smoother_than_the_loss_gradient() {
    let eigs = [0.5, 1.2, 2.0];
    let q = QuadraticObjective::diagonal(&eigs).unwrap();
    let center = [0.3, -0.2, 0.1];
    for gamma in [0.5, 1.0, 5.0] {
        let expected = quadratic_entropy_smoothness(&eigs, gamma);
        assert!((expected - 2.0 * gamma / (2.0 + gamma)).abs() < 1e-15);
        assert!(expected <= 2.0 / (1.0 + 0.5 / gamma) + 1e-15);
        let mut rng = seeded(17);
        let field = |x: &[f64]| {
            let spec = GibbsSpec::local(gamma, ParamVector::new(x.to_vec()).unwrap()).unwrap();
            Ok(local_entropy_quadratic_closed_form(q.curvature(), q.linear(), &spec)?.grad)
        };
        let est = empirical_smoothness(field, &center, 1.0, 4000, &mut rng).unwrap();
        assert!(est <= expected * (1.0 + 1e-12));
        assert!(est > 0.95 * expected, "γ={gamma}: {est} vs {expected}");
        let plain = empirical_smoothness(|x| q.gradient(x), &center, 1.0, 4000, &mut seeded(17)).unwrap();
        assert!(est < plain);
    }
}
