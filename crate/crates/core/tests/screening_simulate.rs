mod common;

use common::{gaussian_matrix, linear_data, rng};
use esubset::model::Dataset;
use esubset::screening::{default_target, sis_screen};
use esubset::simulate::{evaluate, generate, SimConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn exact_copy_ranks_first_with_unit_score() {
    let x = gaussian_matrix(50, 3, &mut rng(1));
    let y = x.column(0).into_owned();
    let res = sis_screen(&Dataset::unnamed(y, x).unwrap(), 1).unwrap();
    assert_eq!(res.kept, vec![0]);
    assert!((res.scores[0] - 1.0).abs() < 1e-12);
    assert_eq!(res.ranking()[0], 0);
}

#[test]
fn oversized_target_keeps_everything() {
    let data = linear_data(30, &[1.0, 0.0, 0.0, 0.5], 1.0, 2);
    assert_eq!(sis_screen(&data, 10).unwrap().kept, vec![0, 1, 2, 3]);
    assert_eq!(default_target(&data), 29);
    assert!(sis_screen(&data, 0).is_err());
}

#[test]
fn constant_column_scores_zero_and_is_flagged() {
    let mut x = gaussian_matrix(40, 3, &mut rng(3));
    x.column_mut(1).fill(2.5);
    let y = x.column(0) + x.column(2);
    let res = sis_screen(&Dataset::unnamed(y, x).unwrap(), 2).unwrap();
    assert_eq!(res.scores[1], 0.0);
    assert_eq!(res.constant_columns, vec![1]);
    assert_eq!(res.kept, vec![0, 2]);
}

#[test]
fn sure_screening_on_the_high_dim_design() {
    let cfg = SimConfig::linear_high_dim(0.5);
    let truth = cfg.true_support();
    let mut hits = 0;
    for r in 0..100 {
        let data = generate(&cfg, r).unwrap().train;
        let kept = sis_screen(&data, 59).unwrap().kept;
        hits += usize::from(truth.iter().all(|j| kept.contains(j)));
    }
    assert!(hits >= 95, "{hits}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn screening_is_scale_invariant(
        seed in 0u64..1000,
        scales in prop::collection::vec(0.01f64..100.0, 8),
        ys in 0.01f64..100.0,
        k in 1usize..8,
    ) {
        let data = linear_data(40, &[1.0, 0.5, 0.0, 0.0, -0.7, 0.0, 0.2, 0.0], 1.0, seed);
        let mut x = data.x().clone();
        for (j, s) in scales.iter().enumerate() {
            x.column_mut(j).scale_mut(*s);
        }
        let scaled = Dataset::unnamed(data.y() * ys, x).unwrap();
        prop_assert_eq!(sis_screen(&data, k).unwrap().kept, sis_screen(&scaled, k).unwrap().kept);
    }

    #[test]
    fn kept_sets_are_nested(seed in 0u64..1000, k in 1usize..12) {
        let x = gaussian_matrix(30, 12, &mut rng(seed));
        let y = x.column(0) * 0.3 + x.column(5) * 0.1 + gaussian_matrix(30, 1, &mut rng(seed + 1)).column(0);
        let data = Dataset::unnamed(y, x).unwrap();
        let small = sis_screen(&data, k).unwrap().kept;
        let big = sis_screen(&data, k + 1).unwrap().kept;
        prop_assert_eq!(big.len(), k + 1);
        prop_assert!(small.iter().all(|j| big.contains(j)));
    }
}

#[test]
fn independent_columns_are_nearly_uncorrelated() {
    let cfg = SimConfig { p: 10, beta0: vec![1.0; 10], ..SimConfig::linear_low_dim(0.0) };
    let x = generate(&cfg, 0).unwrap().train.x().clone();
    let bound = 3.0 / (cfg.n as f64).sqrt();
    for a in 0..10 {
        for b in a + 1..10 {
            let c = corr(x.column(a).as_slice(), x.column(b).as_slice());
            assert!(c.abs() < bound, "corr({a},{b}) = {c}");
        }
    }
}

#[test]
fn strong_ar1_correlation_is_reproduced() {
    let cfg = SimConfig::linear_low_dim(0.9);
    let x = generate(&cfg, 1).unwrap().train.x().clone();
    for j in 0..cfg.p - 1 {
        let c = corr(x.column(j).as_slice(), x.column(j + 1).as_slice());
        assert!((c - 0.9).abs() < 0.05, "corr({j},{}) = {c}", j + 1);
    }
}

#[test]
fn mixed_within_group_covariance_matches_the_model() {
    let cfg = SimConfig::mixed_intercept(500, 5);
    let data = generate(&cfg, 0).unwrap().train;
    let delta = cfg.lmm.as_ref().unwrap().delta_matrix();
    let z = data.random_design().unwrap();
    let resid = data.y() - data.x() * cfg.beta0_vector();
    let k = 5;
    let mut empirical = DMatrix::zeros(k, k);
    let mut model = DMatrix::zeros(k, k);
    for rows in data.group_rows().unwrap() {
        let r = DVector::from_iterator(k, rows.iter().map(|&i| resid[i]));
        let zg = DMatrix::from_fn(k, z.ncols(), |a, c| z[(rows[a], c)]);
        empirical += &r * r.transpose();
        model += &zg * &delta * zg.transpose() + DMatrix::identity(k, k);
    }
    for a in 0..k {
        for b in 0..k {
            let scale = (model[(a, a)] * model[(b, b)]).sqrt();
            let err = (empirical[(a, b)] - model[(a, b)]).abs() / scale;
            assert!(err < 0.15, "entry ({a},{b}): {} vs {}", empirical[(a, b)] / 500.0, model[(a, b)] / 500.0);
        }
    }
}

#[test]
fn generation_is_reproducible_and_test_sets_differ() {
    for cfg in [SimConfig::linear_low_dim(0.5), SimConfig::linear_high_dim(0.5), SimConfig::mixed_intercept(30, 5)] {
        let a = generate(&cfg, 3).unwrap();
        let b = generate(&cfg, 3).unwrap();
        assert_eq!(a.train.x(), b.train.x());
        assert_eq!(a.train.y(), b.train.y());
        assert_eq!(a.test.y(), b.test.y());
        assert_ne!(a.train.y(), a.test.y());
        assert_ne!(a.train.y(), generate(&cfg, 4).unwrap().train.y());
        assert_eq!(a.train.n(), cfg.n);
        assert_eq!(a.train.p(), cfg.p);
    }
}

fn small_truth() -> SimConfig {
    SimConfig { p: 6, beta0: vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0], ..SimConfig::linear_low_dim(0.5) }
}

#[test]
fn perfect_selection_has_zero_error_rates() {
    let cfg = small_truth();
    let test = generate(&cfg, 0).unwrap().test;
    let m = evaluate(&[0, 1], &cfg.beta0_vector(), &cfg, &test).unwrap();
    assert_eq!((m.fpr_pct, m.fnr_pct, m.pe, m.sparsity), (0.0, 0.0, 0.0, 2));
    assert!(m.correct);
}

#[test]
fn hand_enumerated_error_rates() {
    let cfg = small_truth();
    let test = generate(&cfg, 0).unwrap().test;
    let zeros = DVector::zeros(6);
    let empty = evaluate(&[], &zeros, &cfg, &test).unwrap();
    assert_eq!((empty.fnr_pct, empty.fpr_pct, empty.sparsity), (100.0, 0.0, 0));
    assert!((empty.pe - 1.0).abs() < 1e-12);
    assert!(!empty.correct);

    let beta = DVector::from_vec(vec![1.0, 0.0, 0.3, 0.2, 0.0, 0.0]);
    let m = evaluate(&[0, 2, 3], &beta, &cfg, &test).unwrap();
    assert_eq!(m.fpr_pct, 50.0);
    assert_eq!(m.fnr_pct, 50.0);
    assert_eq!(m.sparsity, 3);
    assert!((m.pe_squared - m.pe * m.pe).abs() < 1e-15);

    let all = evaluate(&[0, 1, 2, 3, 4, 5], &DVector::from_element(6, 1.0), &cfg, &test).unwrap();
    assert_eq!((all.fpr_pct, all.fnr_pct), (100.0, 0.0));
}

#[test]
fn forced_columns_are_outside_the_rates() {
    let cfg = SimConfig::mixed_intercept(30, 5);
    let test = generate(&cfg, 0).unwrap().test;
    let mut beta = cfg.beta0_vector();
    beta[0] = 0.4;
    let m = evaluate(&[1, 2], &beta, &cfg, &test).unwrap();
    assert_eq!((m.fpr_pct, m.fnr_pct, m.sparsity), (0.0, 0.0, 2));
    assert!(m.correct);
    assert!(evaluate(&[0, 1, 2], &beta, &cfg, &test).is_err());
}

#[test]
fn zero_signal_truth_is_rejected() {
    let cfg = SimConfig { beta0: vec![0.0; 6], ..small_truth() };
    assert!(
        generate(&cfg, 0).is_err() || {
            let test = generate(&cfg, 0).unwrap().test;
            evaluate(&[], &DVector::zeros(6), &cfg, &test).is_err()
        }
    );
}
