use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qhmc_core::rng::{seeded, standard_normal, uniform};
use qhmc_core::targets::{
    finite_diff_check, DoubleWell, GaussianMixtureTarget, GaussianTarget, LpTarget, QuadraticRecords,
    QuadraticTarget, StochasticTarget, Target,
};

fn random_points(n: usize, dim: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..n).map(|_| (0..dim).map(|_| scale * standard_normal(&mut rng)).collect()).collect()
}

#[test]
fn smooth_targets_match_finite_differences() {
    let mixture = GaussianMixtureTarget::new(
        vec![0.5, 0.5],
        vec![
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 100.0])),
            DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1.0])),
        ],
    )
    .unwrap();
    let gaussian = GaussianTarget::new(DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0])).unwrap();
    let cases: Vec<(&dyn Target, f64)> = vec![(&DoubleWell, 1.5), (&mixture, 5.0), (&gaussian, 2.0)];
    for (target, scale) in cases {
        for x in random_points(100, target.dim(), scale, 1) {
            let check = finite_diff_check(target, &x, 1e-5);
            assert!(check.max_relative_error() < 1e-5, "{x:?}: {check:?}");
        }
    }
}

#[test]
fn quadratic_central_differences_are_exact() {
    let mut rng = seeded(2);
    let b = DMatrix::from_fn(5, 5, |_, _| standard_normal(&mut rng));
    let a = &b + b.transpose();
    let t = QuadraticTarget::new(a).unwrap();
    let x: Vec<f64> = (0..5).map(|_| standard_normal(&mut rng)).collect();
    assert!(finite_diff_check(&t, &x, 1e-5).max_relative_error() <= 1e-8);
}

#[test]
fn lp_gradients_away_from_zero() {
    let l1 = LpTarget::new(1.0, 2.0, 4, 1e-8).unwrap();
    let half = LpTarget::new(0.5, 1.0, 4, 0.0).unwrap();
    let mut rng = seeded(3);
    for _ in 0..100 {
        let x: Vec<f64> = (0..4)
            .map(|_| {
                let v = standard_normal(&mut rng);
                v.signum() * (v.abs() + 1e-3 + 1e-5)
            })
            .collect();
        assert!(finite_diff_check(&l1, &x, 1e-5).max_relative_error() <= 1e-6);
        let far: Vec<f64> = x.iter().map(|v| v.signum() * (v.abs() + 0.05)).collect();
        assert!(finite_diff_check(&half, &far, 1e-6).max_relative_error() <= 1e-5);
    }
}

#[test]
fn full_batch_equals_deterministic_target() {
    let recs = QuadraticRecords::split_standard_normal(300, 3, 2.0, &mut seeded(4)).unwrap();
    let st = StochasticTarget::new(recs.clone(), 300).unwrap();
    let batch = st.full_batch();
    let view = st.on_batch(&batch);
    let mut rng = seeded(5);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| 4.0 * uniform(&mut rng) - 2.0).collect();
        let u = st.potential(&x);
        assert!((view.potential(&x) - u).abs() <= 1e-10 * u.abs());
        let closed_form = 0.5 * x.iter().map(|v| v * v).sum::<f64>() + 0.5 * 3.0 * 4.0;
        assert!((u - closed_form).abs() <= 1e-10 * closed_form);
    }
}

proptest! {
    #[test]
    fn lp_potential_is_even(x in proptest::collection::vec(-50.0f64..50.0, 1..6), p in 0.05f64..=1.0) {
        let t = LpTarget::new(p, 1.3, x.len(), 1e-8).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(t.potential(&x), t.potential(&neg));
    }
}
