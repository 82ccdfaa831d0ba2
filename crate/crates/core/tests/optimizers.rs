//! Outer-loop behaviour on quadratics where the local-entropy mean is known.

use lentropy::net::{MlpObjective, MlpSpec};
use lentropy::objective::{Dataset, Flat, QuadraticObjective};
use lentropy::optimize::*;
use lentropy::oracle::ExactQuadraticMean;
use lentropy::rng::seeded;
use lentropy::sampler::SgldConfig;
use lentropy::{distance, Error, ParamVector};
use nalgebra::DMatrix;

fn config(gamma: f64, eta: f64, rescale: bool, steps: usize) -> EntropySgdConfig {
    EntropySgdConfig {
        inner: SgldConfig { eta_prime: 1e-3, epsilon: 0.0, alpha: 0.75, steps, gamma: 0.0, momentum: 0.0 },
        eta,
        schedule: ScopingSchedule::Constant { gamma0: gamma },
        momentum: 0.0,
        nesterov: false,
        rescale_gradient: rescale,
        lr_decay: LrDecay::none(),
    }
}

fn convex_quadratic(n: usize) -> QuadraticObjective {
    let eigs: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 * 0.35).collect();
    let basis = DMatrix::from_fn(n, n, |i, j| ((i * 13 + j * 7) % 11) as f64 / 11.0 - 0.5 + 2.0 * (i == j) as u8 as f64);
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.9).sin()).collect();
    QuadraticObjective::with_spectrum(&eigs, basis, b).unwrap()
}

#[test]
fn exact_entropy_descent_keeps_the_convex_minimizer() {
    let q = convex_quadratic(10);
    let x_star = q.minimizer().unwrap();
    let est = ExactQuadraticMean { objective: &q };
    let cfg = config(1.0, 1.0, false, 1);
    let mut state = OptimizerState::new(ParamVector::new(vec![1.0; 10]).unwrap());
    let mut rng = seeded(0);
    for _ in 0..2000 {
        entropy_sgd_step_with(&mut state, &est, &cfg, &mut rng).unwrap();
    }
    assert!(distance(&state.x, &x_star) < 1e-8, "{}", distance(&state.x, &x_star));
}

#[test]
fn sampled_direction_is_a_preconditioned_gradient() {
    // A = aI, exact mean γx/(a+γ): rescaled direction is a/(a+γ)·x
    let (a, gamma) = (2.0, 0.5);
    let q = QuadraticObjective::diagonal(&[a, a, a]).unwrap();
    let x = vec![1.0, -0.5, 0.25];
    let cfg = EntropySgdConfig { inner: SgldConfig { epsilon: 1e-4, ..config(gamma, 1e-3, true, 20_000).inner }, ..config(gamma, 1e-3, true, 20_000) };
    let mut state = OptimizerState::new(ParamVector::new(x.clone()).unwrap());
    let r = entropy_sgd_step(&mut state, &q, &cfg, 1, &mut seeded(3)).unwrap();
    for (d, xi) in r.direction.iter().zip(&x) {
        let expect = a / (a + gamma) * xi;
        assert!((d - expect).abs() < 1e-3 * expect.abs().max(1e-3), "{d} vs {expect}");
    }
}

#[test]
fn large_scope_recovers_the_plain_gradient() {
    let q = convex_quadratic(4);
    let est = ExactQuadraticMean { objective: &q };
    let x = vec![0.3, -1.0, 2.0, 0.5];
    let mut state = OptimizerState::new(ParamVector::new(x.clone()).unwrap());
    let r = entropy_sgd_step_with(&mut state, &est, &config(1e6, 1e-3, false, 1), &mut seeded(0)).unwrap();
    let g = q.gradient(&x).unwrap();
    let rel = distance(&r.direction, &g) / lentropy::norm(&g);
    assert!(rel < 1e-3, "{rel}");
}

#[test]
fn one_update_consumes_l_minibatches() {
    let q = QuadraticObjective::diagonal(&[1.0]).unwrap();
    let cfg = config(1.0, 0.1, true, 17);
    let est = lentropy::sampler::SgldMean { objective: &q, config: cfg.inner, batch_size: 1 };
    use lentropy::sampler::LocalMean;
    assert_eq!(est.batches_per_estimate(), 17);
}

#[test]
fn calibration_on_isotropic_quadratic_returns_the_curvature() {
    for a in [0.01, 1.0, 30.0] {
        let q = QuadraticObjective::diagonal(&[a, a]).unwrap();
        let est = ExactQuadraticMean { objective: &q };
        let x = ParamVector::new(vec![1.0, 2.0]).unwrap();
        let c = calibrate_gamma_with(&q, &est, &x, 1, &CalibrationSettings::default(), &mut seeded(0)).unwrap();
        assert!(c.gamma >= a && c.gamma <= a * (1.0 + 1e-9), "a={a}: {}", c.gamma);
        assert!((c.ratio - c.gamma / (a + c.gamma)).abs() < 1e-12);
    }
}

#[test]
fn calibration_fails_on_a_flat_energy() {
    let f = Flat { dim: 2, value: 1.0 };
    let x = ParamVector::new(vec![0.0, 0.0]).unwrap();
    let cfg = SgldConfig { steps: 5, ..SgldConfig::default() };
    let err = heuristic_gamma_calibration(&f, &x, &cfg, 1, &CalibrationSettings::default(), &mut seeded(0)).unwrap_err();
    match err {
        Error::Calibration { curve } => assert!(!curve.is_empty()),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn calibration_on_a_network_is_finite_and_reproducible() {
    let mut rng = seeded(1);
    let n = 60;
    let inputs: Vec<f64> = (0..n * 4).map(|_| lentropy::rng::standard_normal(&mut rng)).collect();
    let labels: Vec<usize> = (0..n).map(|i| usize::from(inputs[i * 4] + inputs[i * 4 + 1] > 0.0)).collect();
    let data = Dataset::new(inputs, labels, 4, 2).unwrap();
    let spec = MlpSpec::new(vec![4, 8, 2], vec![]).unwrap();
    let x = spec.init_params(&mut seeded(2));
    let obj = MlpObjective::new(spec, &data).unwrap();
    let cfg = SgldConfig { steps: 20, ..SgldConfig::default() };
    let run = || heuristic_gamma_calibration(&obj, &x, &cfg, 10, &CalibrationSettings::default(), &mut seeded(3)).unwrap();
    let (a, b) = (run(), run());
    assert!(a.gamma.is_finite() && a.gamma > 0.0);
    assert_eq!(a, b);
}

#[test]
fn nesterov_momentum_converges_on_a_quadratic() {
    let q = convex_quadratic(6);
    let x_star = q.minimizer().unwrap();
    let cfg = SgdConfig { lr: 0.1, momentum: 0.9, nesterov: true, lr_decay: LrDecay::none() };
    let mut state = OptimizerState::new(ParamVector::new(vec![0.0; 6]).unwrap());
    let mut rng = seeded(0);
    for _ in 0..3000 {
        sgd_step(&mut state, &q, &cfg, 1, &mut rng).unwrap();
    }
    assert!(distance(&state.x, &x_star) < 1e-8);
}
