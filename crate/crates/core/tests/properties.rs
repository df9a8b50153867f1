//! Property tests for the structural invariants: predictor normalization,
//! scale equivariance of the CV minimizer, KS bounds and symmetry,
//! piecewise-function calculus, and the time-change linearity.

use proptest::prelude::*;

use seqcv_core::anscombe::TimeChange;
use seqcv_core::change_model::PiecewiseFn;
use seqcv_core::crossval::{argmin_grid, decompose, CvConfig};
use seqcv_core::harness::ks_two_sample;
use seqcv_core::kernel::{KernelFamily, KernelSpec};
use seqcv_core::monitor::{predict, PredictConfig};

fn exp_kernel() -> KernelSpec {
    KernelSpec::new(KernelFamily::Exponential)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // K > 0 keeps the predictor a convex combination of its window
    #[test]
    fn predictor_is_convex_combination(
        y in prop::collection::vec(-50.0f64..50.0, 30..60),
        xi in 1.0f64..40.0,
        pick in 0usize..1000,
    ) {
        let t = y.len();
        let cfg = PredictConfig { gamma: 0.1, t, h: t as f64 / xi };
        let low = (t as f64 * 0.1).floor() as usize;
        let i = low + 1 + pick % (t - low);
        let v = predict(&y, &exp_kernel(), &cfg, i).unwrap();
        let window = &y[low - 1..i - 1];
        let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }

    // multiplying the data by a nonzero constant rescales CV, L, Q by its
    // square and leaves the minimizing xi unchanged
    #[test]
    fn cv_scale_equivariance(
        y in prop::collection::vec(-5.0f64..5.0, 40..80),
        scale in prop::sample::select(vec![-3.0f64, -0.5, 0.25, 2.0, 10.0]),
    ) {
        let cfg = CvConfig::new(0.1, 0.3).unwrap();
        let xi_grid = [4.0, 9.0, 18.0];
        let scaled: Vec<f64> = y.iter().map(|v| scale * v).collect();
        let base = decompose(&y, &exp_kernel(), &cfg, &[1.0], &xi_grid).unwrap();
        let big = decompose(&scaled, &exp_kernel(), &cfg, &[1.0], &xi_grid).unwrap();
        let s2 = scale * scale;
        for c in 0..xi_grid.len() {
            prop_assert!((big.cv[0][c] - s2 * base.cv[0][c]).abs() <= 1e-9 * (1.0 + big.cv[0][c].abs()));
            prop_assert!((big.l[0][c] - s2 * base.l[0][c]).abs() <= 1e-9 * (1.0 + big.l[0][c].abs()));
            prop_assert!((big.q[0][c] - s2 * base.q[0][c]).abs() <= 1e-9 * (1.0 + big.q[0][c].abs()));
        }
        let a = argmin_grid(&base.c[0], &xi_grid).unwrap();
        let b = argmin_grid(&big.c[0], &xi_grid).unwrap();
        prop_assert_eq!(a, b);
    }

    // KS is symmetric, lands in [0, 1], and is zero on identical samples
    #[test]
    fn ks_contract(
        x in prop::collection::vec(-100.0f64..100.0, 1..120),
        y in prop::collection::vec(-100.0f64..100.0, 1..120),
    ) {
        let a = ks_two_sample(&x, &y).unwrap();
        let b = ks_two_sample(&y, &x).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(ks_two_sample(&x, &x).unwrap(), 0.0);
    }

    // Riemann sums of a step function obey the Koksma bound V(f)/T
    #[test]
    fn step_function_koksma(
        at in 0.05f64..0.95,
        before in -4.0f64..4.0,
        after in -4.0f64..4.0,
        t in 10usize..400,
        u in 0.05f64..1.0,
    ) {
        let f = PiecewiseFn::step(at, before, after).unwrap();
        let v = f.total_variation();
        let upper = (t as f64 * u).floor() as usize;
        let mut sum = 0.0;
        for i in 1..=upper {
            sum += f.eval(i as f64 / t as f64);
        }
        let err = (sum / t as f64 - f.integral_to(u).unwrap()).abs();
        prop_assert!(err <= v / t as f64 + 1e-9, "err {} > {}", err, v / t as f64);
    }

    // integral is additive and consistent with evaluation on constants
    #[test]
    fn piecewise_integral_additivity(
        at in 0.1f64..0.9,
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
        u in 0.0f64..1.0,
    ) {
        let f = PiecewiseFn::step(at, c1, c2).unwrap();
        let direct = f.integral_to(u).unwrap();
        let expected = if u <= at { c1 * u } else { c1 * at + c2 * (u - at) };
        prop_assert!((direct - expected).abs() < 1e-12);
    }

    // the time change is linear: increments scale exactly with the ratio
    #[test]
    fn time_change_linearity(
        tau in 1u64..400,
        extra in 0u64..400,
        s in 0.0f64..1.0,
        sp in 0.0f64..1.0,
    ) {
        let t_prime = tau + extra;
        let tc = TimeChange::new(tau, t_prime).unwrap();
        let lhs = tc.phi(sp) - tc.phi(s);
        let rhs = tc.ratio * (sp - s);
        prop_assert!((lhs - rhs).abs() <= 1e-15 * (1.0 + rhs.abs()));
        prop_assert!(tc.ratio <= 1.0);
    }
}
