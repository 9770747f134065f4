//! Synthetic data generators and selection metrics.
//!
//! Three designs are provided: a low-dimensional and a high-dimensional
//! linear model with AR(1)-correlated Gaussian covariates, and a grouped
//! linear mixed model with correlated random effects.

mod presets;
mod study;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::model::Dataset;
use crate::rng::{substream, tag, StreamRng};
use crate::{Error, Result};

pub use presets::{reference, StudyTable, Reference, TABLE1_TAUS, TABLE2_TAUS, TABLE3_TAUS};
pub use study::{run_study, ReplicateOutcome, StudyConfig, StudyResult, StudySummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LinearLowDim,
    LinearHighDim,
    MixedIntercept,
}

/// Grouped design: `groups` clusters of `per_group` rows each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmDesign {
    pub groups: usize,
    pub per_group: usize,
    /// Random-effects covariance, row-major `q x q`. The random-effects
    /// design is the first `q` columns of the fixed-effects design.
    pub delta: Vec<f64>,
    pub q: usize,
}

impl LmmDesign {
    pub fn delta_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.q, self.q, &self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    /// Observations per dataset (`groups * per_group` for mixed designs).
    pub n: usize,
    pub p: usize,
    /// AR(1) correlation of adjacent covariates.
    pub rho: f64,
    pub beta0: Vec<f64>,
    pub noise_sd: f64,
    pub lmm: Option<LmmDesign>,
    /// Columns kept in every model and never scored, such as an intercept
    /// column. They do not count towards selection metrics.
    #[serde(default)]
    pub forced: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
}

fn leading_ones(p: usize, k: usize) -> Vec<f64> {
    (0..p).map(|j| if j < k { 1.0 } else { 0.0 }).collect()
}

impl SimConfig {
    /// `n = 1000`, `p = 60`, five unit coefficients.
    pub fn linear_low_dim(rho: f64) -> Self {
        Self {
            scenario: Scenario::LinearLowDim,
            n: 1000,
            p: 60,
            rho,
            beta0: leading_ones(60, 5),
            noise_sd: 1.0,
            lmm: None,
            forced: Vec::new(),
            replicates: 100,
            seed: 1,
        }
    }

    /// `n = 60`, `p = 1000`, five unit coefficients.
    pub fn linear_high_dim(rho: f64) -> Self {
        Self {
            scenario: Scenario::LinearHighDim,
            n: 60,
            p: 1000,
            rho,
            beta0: leading_ones(1000, 5),
            noise_sd: 1.0,
            lmm: None,
            forced: Vec::new(),
            replicates: 100,
            seed: 1,
        }
    }

    /// Mixed design with `groups` clusters of `per_group`: an intercept
    /// column plus eight `U(-2, 2)` covariates, random effects on the first
    /// four columns and true coefficients `(0, 1, 1, 0, ..., 0)`. The
    /// intercept column is forced into every model.
    pub fn mixed_intercept(groups: usize, per_group: usize) -> Self {
        #[rustfmt::skip]
        let delta = vec![
            9.0, 4.8, 0.6, 0.0,
            4.8, 4.0, 1.0, 0.0,
            0.6, 1.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ];
        let mut beta0 = vec![0.0; 9];
        beta0[1] = 1.0;
        beta0[2] = 1.0;
        Self {
            scenario: Scenario::MixedIntercept,
            n: groups * per_group,
            p: 9,
            rho: 0.0,
            beta0,
            noise_sd: 1.0,
            lmm: Some(LmmDesign { groups, per_group, delta, q: 4 }),
            forced: vec![0],
            replicates: 100,
            seed: 1,
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.beta0.len() != self.p {
            return bad(format!("beta0 has {} entries for p = {}", self.beta0.len(), self.p));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise sd must be finite and non-negative, got {}", self.noise_sd));
        }
        if self.n < 2 || self.p == 0 {
            return bad(format!("need n >= 2 and p >= 1, got n = {}, p = {}", self.n, self.p));
        }
        if let Some(&j) = self.forced.iter().find(|&&j| j >= self.p) {
            return bad(format!("forced column {j} is out of range"));
        }
        match (&self.scenario, &self.lmm) {
            (Scenario::MixedIntercept, Some(d)) => {
                if d.groups * d.per_group != self.n {
                    return bad("n must equal groups * per_group".into());
                }
                if d.delta.len() != d.q * d.q || d.q > self.p {
                    return bad("random-effects covariance has the wrong shape".into());
                }
                if d.delta_matrix().symmetric_eigenvalues().iter().any(|&e| e < -1e-10) {
                    return bad("random-effects covariance is not positive semidefinite".into());
                }
            }
            (Scenario::MixedIntercept, None) => return bad("mixed scenario needs a design".into()),
            (_, Some(_)) => return bad("only the mixed scenario takes a grouped design".into()),
            _ => {}
        }
        Ok(())
    }

    /// Indices of the nonzero true coefficients, excluding forced columns.
    pub fn true_support(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.beta0[j] != 0.0 && !self.forced.contains(&j)).collect()
    }

    /// Columns eligible for selection.
    pub fn candidates(&self) -> Vec<usize> {
        (0..self.p).filter(|j| !self.forced.contains(j)).collect()
    }

    pub fn beta0_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta0)
    }
}

/// Training and independent test data for one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub train: Dataset,
    pub test: Dataset,
}

/// Generate replicate `replicate`; deterministic in `(config.seed, replicate)`.
pub fn generate(config: &SimConfig, replicate: usize) -> Result<Replicate> {
    config.validate()?;
    let train = draw(config, &mut substream(config.seed, tag::SIMULATION, replicate as u64))?;
    let test = draw(config, &mut substream(config.seed, tag::SIMULATION_TEST, replicate as u64))?;
    Ok(Replicate { train, test })
}

fn draw(config: &SimConfig, rng: &mut StreamRng) -> Result<Dataset> {
    match config.scenario {
        Scenario::LinearLowDim | Scenario::LinearHighDim => draw_linear(config, rng),
        Scenario::MixedIntercept => draw_mixed(config, rng),
    }
}

/// Rows with `corr(x_j, x_k) = rho^|j - k|`, by the AR(1) recursion (the
/// Cholesky factor of that correlation matrix in closed form).
pub fn ar1_design(n: usize, p: usize, rho: f64, rng: &mut StreamRng) -> DMatrix<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = prev;
        for j in 1..p {
            let z: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innov * z;
            x[(i, j)] = prev;
        }
    }
    x
}

fn draw_linear(config: &SimConfig, rng: &mut StreamRng) -> Result<Dataset> {
    let x = ar1_design(config.n, config.p, config.rho, rng);
    let mut y = &x * config.beta0_vector();
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += config.noise_sd * e;
    }
    Dataset::unnamed(y, x)
}

fn draw_mixed(config: &SimConfig, rng: &mut StreamRng) -> Result<Dataset> {
    let design = config.lmm.as_ref().expect("validated");
    let (m, k, q) = (design.groups, design.per_group, design.q);
    let n = m * k;
    let unif = Uniform::new(-2.0, 2.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut x = DMatrix::zeros(n, config.p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..config.p {
            x[(i, j)] = unif.sample(rng);
        }
    }
    let delta_root = psd_root(&design.delta_matrix());
    let mut y = &x * config.beta0_vector();
    let mut labels = Vec::with_capacity(n);
    for g in 0..m {
        let u = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = &delta_root * u;
        for r in g * k..(g + 1) * k {
            let zb: f64 = (0..q).map(|c| x[(r, c)] * b[c]).sum();
            let e: f64 = rng.sample(StandardNormal);
            y[r] += zb + config.noise_sd * e;
            labels.push(g);
        }
    }
    let z = x.columns(0, q).into_owned();
    Dataset::unnamed(y, x)?.with_groups(&labels)?.with_random_design(z)
}

/// Symmetric square root of a positive semidefinite matrix.
fn psd_root(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Per-replicate selection metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// Number of nonzero estimated coefficients.
    pub sparsity: usize,
    /// `||X (b - b0)|| / ||X b0||` on the test design.
    pub pe: f64,
    /// Square of `pe`.
    pub pe_squared: f64,
    pub fpr_pct: f64,
    pub fnr_pct: f64,
    /// The selected set equals the true support.
    pub correct: bool,
}

/// Metrics of a selection. `beta_hat` holds the refit coefficients with
/// zeros outside `selected` and the forced columns; `selected` lists the
/// chosen candidates only.
pub fn evaluate(selected: &[usize], beta_hat: &DVector<f64>, truth: &SimConfig, test: &Dataset) -> Result<MetricSet> {
    let p = truth.p;
    if beta_hat.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: beta_hat.len() });
    }
    if test.p() != p {
        return Err(Error::DimensionMismatch { expected: p, got: test.p() });
    }
    if let Some(&bad) = selected.iter().find(|&&j| j >= p) {
        return Err(Error::DimensionMismatch { expected: p, got: bad + 1 });
    }
    let beta0 = truth.beta0_vector();
    let signal = (test.x() * &beta0).norm();
    if signal == 0.0 {
        return Err(Error::InvalidInput("true signal X beta0 is zero".into()));
    }
    let pe = (test.x() * (beta_hat - &beta0)).norm() / signal;
    let support = truth.true_support();
    if let Some(&j) = selected.iter().find(|j| truth.forced.contains(j)) {
        return Err(Error::InvalidInput(format!("forced column {j} listed as selected")));
    }
    let false_pos = selected.iter().filter(|j| !support.contains(j)).count();
    let false_neg = support.iter().filter(|j| !selected.contains(j)).count();
    let nulls = truth.candidates().len() - support.len();
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    let mut sel = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    Ok(MetricSet {
        sparsity: (0..p).filter(|&j| beta_hat[j] != 0.0 && !truth.forced.contains(&j)).count(),
        pe,
        pe_squared: pe * pe,
        fpr_pct: pct(false_pos, nulls),
        fnr_pct: pct(false_neg, support.len()),
        correct: sel == support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        SimConfig::linear_low_dim(0.5).validate().unwrap();
        SimConfig::linear_high_dim(0.9).validate().unwrap();
        SimConfig::mixed_intercept(30, 5).validate().unwrap();
        assert_eq!(SimConfig::mixed_intercept(30, 5).true_support(), vec![1, 2]);
    }

    #[test]
    fn metric_algebra() {
        let truth = SimConfig { n: 10, p: 4, beta0: vec![1.0, 1.0, 0.0, 0.0], ..SimConfig::linear_low_dim(0.0) };
        let test = generate(&truth, 0).unwrap().test;
        let b = DVector::from_column_slice(&[1.0, 0.0, 0.5, 0.0]);
        let m = evaluate(&[0, 2], &b, &truth, &test).unwrap();
        assert_eq!(m.fpr_pct, 50.0);
        assert_eq!(m.fnr_pct, 50.0);
        assert!(!m.correct);
        assert_eq!(m.sparsity, 2);
        let m = evaluate(&[], &DVector::zeros(4), &truth, &test).unwrap();
        assert_eq!(m.fnr_pct, 100.0);
        assert!((m.pe - 1.0).abs() < 1e-12);
        let m = evaluate(&[0, 1], &truth.beta0_vector(), &truth, &test).unwrap();
        assert_eq!(m.pe, 0.0);
        assert!(m.correct);
    }

    #[test]
    fn zero_signal_is_rejected() {
        let truth = SimConfig { n: 10, p: 2, beta0: vec![0.0, 0.0], ..SimConfig::linear_low_dim(0.0) };
        let test = generate(&truth, 0).unwrap().test;
        assert!(evaluate(&[], &DVector::zeros(2), &truth, &test).is_err());
    }
}
