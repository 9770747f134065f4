mod common;

use common::{linear_data, normal, rng};
use esubset::model::{
    self, fit_lmm, fit_ols, gls_estimate, plugin_estimate, CandidateModel, Dataset, FitSpec, Nuisance, OlsOptions,
};
use esubset::simulate::{generate, SimConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn ols_solves_its_estimating_equation() {
    let data = linear_data(300, &[1.0, -2.0, 0.5, 0.0], 1.0, 4);
    let fit = fit_ols(&data, false).unwrap();
    let resid = data.y() - data.x() * &fit.theta_hat;
    let eq = data.x().transpose() * resid;
    assert!(eq.norm() <= 1e-6 * (data.x().transpose() * data.y()).norm());
    let total: DVector<f64> = fit.parts.scores.row_sum().transpose();
    assert!(total.norm() < 1e-8);
}

#[test]
fn ols_noise_variance_on_low_dim_design() {
    let cfg = SimConfig::linear_low_dim(0.5);
    let mut within = 0;
    let mut total = 0.0;
    for r in 0..100 {
        let data = generate(&cfg, r).unwrap().train;
        let fit = fit_ols(&data, false).unwrap();
        let Nuisance::Ols { sigma2 } = fit.nuisance else { panic!() };
        within += usize::from((sigma2 - 1.0).abs() < 0.1);
        total += sigma2;
    }
    // one replicate has sd sqrt(2 / 940) ~ 0.046, so about 3% fall outside 10%
    assert!((total / 100.0 - 1.0).abs() < 0.1);
    assert!(within >= 90, "{within}/100");
}

#[test]
fn plug_in_covariance_matches_sampling_covariance() {
    // fixed design, 200 response draws
    let n = 200;
    let beta = [1.0, 0.5, -1.0];
    let mut r = rng(5);
    let x = DMatrix::from_fn(n, 3, |_, _| normal(&mut r));
    let mut draws = DMatrix::zeros(200, 3);
    let mut mean_v = DMatrix::zeros(3, 3);
    for k in 0..200 {
        let mut y = &x * DVector::from_column_slice(&beta);
        for v in y.iter_mut() {
            *v += normal(&mut r);
        }
        let fit = fit_ols(&Dataset::unnamed(y, x.clone()).unwrap(), false).unwrap();
        let z = (&fit.theta_hat - DVector::from_column_slice(&beta)) * (n as f64).sqrt();
        draws.set_row(k, &z.transpose());
        mean_v += &fit.v_n / 200.0;
    }
    let emp = draws.transpose() * &draws / 200.0;
    for i in 0..3 {
        let rel = (emp[(i, i)] - mean_v[(i, i)]).abs() / mean_v[(i, i)];
        assert!(rel < 0.25, "diagonal {i}: {rel}");
        for j in 0..3 {
            let scale = (mean_v[(i, i)] * mean_v[(j, j)]).sqrt();
            assert!((emp[(i, j)] - mean_v[(i, j)]).abs() < 0.25 * scale);
        }
    }
    let eig = mean_v.symmetric_eigenvalues();
    assert!(eig.iter().all(|&e| e >= 0.0));
}

fn grouped(m: usize, k: usize, tau: f64, beta: &[f64], seed: u64) -> Dataset {
    let mut r = rng(seed);
    let p = beta.len();
    let n = m * k;
    let x = DMatrix::from_fn(n, p, |_, _| normal(&mut r));
    let mut y = &x * DVector::from_column_slice(beta);
    let mut labels = Vec::new();
    for g in 0..m {
        let b = tau * normal(&mut r);
        for i in g * k..(g + 1) * k {
            y[i] += b + normal(&mut r);
            labels.push(g);
        }
    }
    Dataset::unnamed(y, x).unwrap().with_groups(&labels).unwrap()
}

#[test]
fn lmm_reduces_to_ols_without_random_effects() {
    let mut checked = 0;
    for seed in 0..10 {
        let data = grouped(40, 5, 0.0, &[1.0, -1.0, 0.5], seed);
        let lmm = fit_lmm(&data).unwrap();
        let ols = fit_ols(&data, false).unwrap();
        let Nuisance::Mixed { delta, .. } = &lmm.nuisance else { panic!() };
        if delta[0][0] < 1e-3 {
            assert!((&lmm.theta_hat - &ols.theta_hat).amax() < 1e-3);
            checked += 1;
        }
    }
    assert!(checked >= 3, "only {checked} fits hit the boundary");
}

#[test]
fn single_group_compound_symmetry_matches_gls() {
    let data = grouped(1, 40, 1.0, &[0.5, 2.0], 3);
    let fit = model::fit_lmm(&data).unwrap();
    let Nuisance::Mixed { sigma2, delta, .. } = &fit.nuisance else { panic!() };
    let d = DMatrix::from_fn(1, 1, |i, j| delta[i][j]);
    let gls = gls_estimate(&data, &d, *sigma2, false).unwrap();
    assert!((&fit.theta_hat - gls).amax() < 1e-6);
}

#[test]
fn lmm_recovers_mixed_design_coefficients() {
    let cfg = SimConfig::mixed_intercept(60, 10);
    let beta0 = cfg.beta0_vector();
    let mut good = 0;
    for r in 0..100 {
        let data = generate(&cfg, r).unwrap().train;
        let fit = fit_lmm(&data).unwrap();
        let err = (&fit.theta_hat - &beta0).amax();
        good += usize::from(err < 0.75);
    }
    assert!(good >= 90, "{good}/100 within tolerance");
}

#[test]
fn mixed_slopes_are_estimated_within_tolerance() {
    // slope coefficients only; the intercept absorbs the random-intercept variance
    let cfg = SimConfig::mixed_intercept(60, 10);
    let beta0 = cfg.beta0_vector();
    let mut good = 0;
    for r in 0..100 {
        let data = generate(&cfg, r).unwrap().train;
        let fit = fit_lmm(&data).unwrap();
        let err = (1..9).map(|j| (fit.theta_hat[j] - beta0[j]).abs()).fold(0.0, f64::max);
        good += usize::from(err < 0.5);
    }
    assert!(good >= 90, "{good}/100 within tolerance");
}

#[test]
fn refit_places_coefficients_and_handles_empty_support() {
    let data = linear_data(100, &[2.0, 0.0, -1.0], 0.1, 9);
    let spec = FitSpec::Ols(OlsOptions { intercept: true, ..Default::default() });
    let r = model::refit(&data, &[0, 2], &spec).unwrap();
    assert_eq!(r.coefficients[1], 0.0);
    assert!((r.coefficients[0] - 2.0).abs() < 0.1 && (r.coefficients[2] + 1.0).abs() < 0.1);
    let empty = model::refit(&data, &[], &spec).unwrap();
    assert_eq!(empty.intercept, Some(data.y().mean()));
    assert!(empty.coefficients.iter().all(|&v| v == 0.0));
}

#[test]
fn plugin_examples() {
    let v = DVector::from_column_slice(&[3.0, 4.0, 5.0]);
    assert_eq!(plugin_estimate(&v, &CandidateModel::full(3)).unwrap(), v);
    let m = CandidateModel::new(3, vec![0, 2]).unwrap();
    assert_eq!(plugin_estimate(&v, &m).unwrap().as_slice(), &[3.0, 0.0, 5.0]);
    let empty = CandidateModel::new(3, vec![]).unwrap();
    assert_eq!(plugin_estimate(&v, &empty).unwrap(), DVector::zeros(3));
    assert_eq!(empty.constants(), vec![0.0; 3]);
}

proptest! {
    #[test]
    fn plugin_is_idempotent(
        v in prop::collection::vec(-10.0f64..10.0, 1..8),
        mask in prop::collection::vec(any::<bool>(), 8),
    ) {
        let p = v.len();
        let support: Vec<usize> = (0..p).filter(|&j| mask[j]).collect();
        let m = CandidateModel::new(p, support).unwrap();
        let v = DVector::from_vec(v);
        let once = plugin_estimate(&v, &m).unwrap();
        let twice = plugin_estimate(&once, &m).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(m.constants().len(), p - m.support().len());
    }
}
