//! Property tests for invariants that hold for every input.

use lentropy::analysis::{gradient_angle, SpectrumReport};
use lentropy::objective::{sample_minibatch, subsample, Dataset, QuadraticObjective};
use lentropy::optimize::{adam_step, AdamConfig, LrDecay, OptimizerState, ScopingSchedule};
use lentropy::rng::seeded;
use lentropy::ParamVector;
use proptest::prelude::*;

fn schedules() -> impl Strategy<Value = ScopingSchedule> {
    (1e-6..10.0f64, 0.0..0.5f64).prop_flat_map(|(gamma0, gamma1)| {
        prop_oneof![
            Just(ScopingSchedule::Constant { gamma0 }),
            Just(ScopingSchedule::Exponential { gamma0, gamma1 }),
            Just(ScopingSchedule::Linear { gamma0, gamma1 }),
            Just(ScopingSchedule::Quadratic { gamma0, gamma1 }),
        ]
    })
}

proptest! {
    #[test]
    fn scoping_never_decreases(s in schedules(), t in 0u64..5000) {
        prop_assert!(s.gamma_at(t + 1) >= s.gamma_at(t));
    }

    #[test]
    fn bounded_scope_stays_below_its_ceiling(gamma0 in 1e-6..10.0f64, tau in 1e-4..5.0f64, t in 0u64..100_000) {
        let s = ScopingSchedule::BoundedExponential { gamma0, tau };
        let g = s.gamma_at(t);
        prop_assert!((0.0..=gamma0).contains(&g));
        prop_assert!(s.gamma_at(t + 1) >= g);
    }

    #[test]
    fn lr_multiplier_is_piecewise_constant(every in 1usize..10, factor in 0.01..1.0f64, epoch in 0usize..60) {
        let d = LrDecay::every(every, factor, 50);
        let m = d.multiplier(epoch);
        prop_assert!(m > 0.0 && m <= 1.0);
        prop_assert!(d.multiplier(epoch + 1) <= m);
    }

    #[test]
    fn angle_is_bounded_and_scale_invariant(
        u in prop::collection::vec(-10.0..10.0f64, 3),
        v in prop::collection::vec(-10.0..10.0f64, 3),
        a in 1e-3..1e3f64,
        b in 1e-3..1e3f64,
    ) {
        prop_assume!(lentropy::norm(&u) > 1e-6 && lentropy::norm(&v) > 1e-6);
        let base = gradient_angle(&u, &v).unwrap();
        prop_assert!((0.0..=180.0).contains(&base));
        let su: Vec<f64> = u.iter().map(|x| a * x).collect();
        let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
        prop_assert!((gradient_angle(&su, &sv).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn near_zero_fraction_is_a_monotone_cdf(d in prop::collection::vec(-5.0..5.0f64, 1..50), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64) {
        let r = SpectrumReport::from_diagonal(&d).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let (a, b) = (r.frac_near_zero(lo), r.frac_near_zero(hi));
        prop_assert!((0.0..=1.0).contains(&a) && a <= b);
        prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let count = d.iter().filter(|x| x.abs() <= lo).count();
        prop_assert_eq!(a, count as f64 / d.len() as f64);
    }

    #[test]
    fn minibatches_are_distinct_and_in_range(n in 1usize..200, m in 1usize..200, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        match sample_minibatch(n, m, &mut rng) {
            Ok(b) => {
                prop_assert!(m <= n);
                prop_assert_eq!(b.len(), m);
                let mut v = b.to_vec();
                v.sort_unstable();
                v.dedup();
                prop_assert_eq!(v.len(), m);
                prop_assert!(v.iter().all(|&i| i < n));
            }
            Err(_) => prop_assert!(m > n),
        }
    }

    #[test]
    fn stratified_subsample_balances_classes(per_class in prop::collection::vec(1usize..40, 2..5), k in 1usize..60, seed in any::<u64>()) {
        let labels: Vec<usize> = per_class.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let total = labels.len();
        prop_assume!(k <= total);
        let inputs: Vec<f64> = (0..total).map(|i| i as f64).collect();
        let data = Dataset::new(inputs, labels, 1, per_class.len()).unwrap();
        let s = subsample(&data, k, seed, true).unwrap();
        prop_assert_eq!(s.len(), k);
        let counts = s.class_counts();
        // every class gets its full quota or is exhausted
        let quota_max = *counts.iter().max().unwrap();
        for (c, &n) in counts.iter().enumerate() {
            prop_assert!(n == per_class[c] || n + 1 >= quota_max);
        }
    }

    #[test]
    fn param_vectors_reject_non_finite(v in prop::collection::vec(prop::num::f64::ANY, 1..8)) {
        let ok = v.iter().all(|x| x.is_finite());
        prop_assert_eq!(ParamVector::new(v).is_ok(), ok);
    }

    #[test]
    fn adam_second_moments_stay_non_negative(x0 in prop::collection::vec(-5.0..5.0f64, 3), seed in any::<u64>()) {
        let q = QuadraticObjective::diagonal(&[0.5, 1.0, 4.0]).unwrap();
        let mut s = OptimizerState::new(ParamVector::new(x0).unwrap());
        let mut rng = seeded(seed);
        for _ in 0..20 {
            adam_step(&mut s, &q, &AdamConfig::new(1e-2), 1, &mut rng).unwrap();
        }
        prop_assert!(s.second_moments().unwrap().iter().all(|&v| v >= 0.0));
    }
}
