//! Full-model estimation.
//!
//! A [`ModelFit`] carries the full-model estimate together with everything
//! the one-step bootstrap needs: per-unit score contributions and a
//! factorization of the per-unit Hessian contributions, both evaluated once
//! at the estimate. A *unit* is one observation for least squares and one
//! group for the mixed model.

mod lmm;
mod ols;
mod optim;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use lmm::{fit_lmm, fit_lmm_with, gls_estimate, LmmOptions};
pub use ols::{fit_ols, fit_ols_with, OlsOptions};

pub const INTERCEPT_NAME: &str = "(intercept)";

/// Response, design and optional grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    /// Group index per row, normalized to `0..groups` in order of first appearance.
    groups: Option<Vec<usize>>,
    n_groups: usize,
    /// Within-group random-effects design; `None` means a random intercept.
    z: Option<DMatrix<f64>>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 observations, got {n}")));
        }
        if x.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.nrows() });
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch { expected: x.ncols(), got: names.len() });
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset has non-finite entries".into()));
        }
        Ok(Self { y, x, groups: None, n_groups: 0, z: None, names })
    }

    /// Dataset with default covariate names `x1, x2, ...`.
    pub fn unnamed(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(y, x, names)
    }

    /// Attach group labels; any labels are accepted and renumbered.
    pub fn with_groups<L: Eq + std::hash::Hash + Clone>(mut self, labels: &[L]) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: labels.len() });
        }
        let mut seen: HashMap<L, usize> = HashMap::new();
        let groups = labels
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(l.clone()).or_insert(next)
            })
            .collect();
        self.n_groups = seen.len();
        self.groups = Some(groups);
        Ok(self)
    }

    /// Random-effects design for mixed models, one row per observation.
    pub fn with_random_design(mut self, z: DMatrix<f64>) -> Result<Self> {
        if z.nrows() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: z.nrows() });
        }
        if z.ncols() == 0 || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("random-effects design must be finite and non-empty".into()));
        }
        self.z = Some(z);
        Ok(self)
    }

    pub fn random_design(&self) -> Option<&DMatrix<f64>> {
        self.z.as_ref()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.groups.as_deref()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    /// Row indices of each group, in group order.
    pub fn group_rows(&self) -> Option<Vec<Vec<usize>>> {
        let groups = self.groups.as_ref()?;
        let mut out = vec![Vec::new(); self.n_groups];
        for (i, &g) in groups.iter().enumerate() {
            out[g].push(i);
        }
        Some(out)
    }

    /// Keep the listed covariate columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.p()) {
            return Err(Error::DimensionMismatch { expected: self.p(), got: bad + 1 });
        }
        let x = self.x.select_columns(cols.iter());
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        Ok(Dataset {
            y: self.y.clone(),
            x,
            groups: self.groups.clone(),
            n_groups: self.n_groups,
            z: self.z.clone(),
            names,
        })
    }

    /// Keep the listed rows. Group labels are renumbered.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::DimensionMismatch { expected: self.n(), got: bad + 1 });
        }
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r]));
        let x = self.x.select_rows(rows.iter());
        let mut out = Dataset::new(y, x, self.names.clone())?;
        if let Some(z) = &self.z {
            out.z = Some(z.select_rows(rows.iter()));
        }
        match &self.groups {
            Some(g) => out.with_groups(&rows.iter().map(|&r| g[r]).collect::<Vec<_>>()),
            None => Ok(out),
        }
    }

    /// Design matrix with a leading column of ones.
    pub(crate) fn design(&self, intercept: bool) -> (DMatrix<f64>, Vec<String>) {
        if !intercept {
            return (self.x.clone(), self.names.clone());
        }
        let n = self.n();
        let mut x = DMatrix::from_element(n, self.p() + 1, 1.0);
        x.view_mut((0, 1), (n, self.p())).copy_from(&self.x);
        let mut names = Vec::with_capacity(self.p() + 1);
        names.push(INTERCEPT_NAME.to_string());
        names.extend(self.names.iter().cloned());
        (x, names)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LinearOls,
    LinearMixedReml,
}

/// Family-specific nuisance estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Nuisance {
    Ols { sigma2: f64 },
    Mixed { sigma2: f64, delta: Vec<Vec<f64>>, iterations: usize },
}

/// Score and Hessian contributions at the full-model estimate.
///
/// `scores` row `k` is the negative energy gradient of unit `k`. The Hessian
/// of unit `k` is `B_k' B_k`, where `B_k` are the rows of `hess_factor`
/// whose entry in `factor_unit` is `k`.
#[derive(Debug, Clone)]
pub struct OneStepParts {
    pub scores: DMatrix<f64>,
    pub hess_factor: DMatrix<f64>,
    pub factor_unit: Vec<usize>,
    /// Sum of all unit Hessians (possibly ridge-regularized).
    pub hessian: DMatrix<f64>,
}

impl OneStepParts {
    pub fn units(&self) -> usize {
        self.scores.nrows()
    }

    /// `sum_k w_k H_k`.
    pub fn weighted_hessian(&self, weights: &[f64]) -> DMatrix<f64> {
        let p = self.hess_factor.ncols();
        let mut scaled = self.hess_factor.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= weights[self.factor_unit[i]].max(0.0).sqrt();
        }
        let h = scaled.transpose() * &scaled;
        debug_assert_eq!(h.nrows(), p);
        h
    }
}

/// The fitted full model.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub family: Family,
    pub theta_hat: DVector<f64>,
    /// Scaling rate of the estimator, `sqrt(n)`.
    pub a_n: f64,
    /// Plug-in covariance of `a_n (theta_hat - theta)`.
    pub v_n: DMatrix<f64>,
    pub nuisance: Nuisance,
    pub parts: OneStepParts,
    /// Coefficient names; includes the intercept when one was fitted.
    pub names: Vec<String>,
    /// Position of the intercept in `theta_hat`, if fitted.
    pub intercept: Option<usize>,
    pub n_obs: usize,
    /// A ridge was added to a singular Gram matrix.
    pub ridged: bool,
}

impl ModelFit {
    pub fn p(&self) -> usize {
        self.theta_hat.len()
    }

    /// Indices eligible for drop-one scoring: everything but the intercept.
    pub fn default_candidates(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| Some(j) != self.intercept).collect()
    }
}

/// How to fit a full model; shared by selection, refitting and validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FitSpec {
    Ols(OlsOptions),
    Mixed(LmmOptions),
}

impl FitSpec {
    pub fn fit(&self, data: &Dataset) -> Result<ModelFit> {
        match self {
            FitSpec::Ols(o) => fit_ols_with(data, o),
            FitSpec::Mixed(o) => fit_lmm_with(data, o),
        }
    }

    pub fn intercept(&self) -> bool {
        match self {
            FitSpec::Ols(o) => o.intercept,
            FitSpec::Mixed(o) => o.intercept,
        }
    }
}

/// Coefficients of a model refitted on a covariate subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    /// One entry per dataset column, zero outside the support.
    pub coefficients: DVector<f64>,
    pub intercept: Option<f64>,
}

impl Refit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = x * &self.coefficients;
        if let Some(b0) = self.intercept {
            out.add_scalar_mut(b0);
        }
        out
    }
}

/// Refit on the dataset columns in `support`. An empty support yields the
/// intercept-only model (or zero prediction without an intercept).
pub fn refit(data: &Dataset, support: &[usize], spec: &FitSpec) -> Result<Refit> {
    let p = data.p();
    let mut coefficients = DVector::zeros(p);
    if support.is_empty() {
        let intercept = spec.intercept().then(|| data.y().mean());
        return Ok(Refit { coefficients, intercept });
    }
    let sub = data.select_columns(support)?;
    let fit = spec.fit(&sub)?;
    let offset = usize::from(fit.intercept.is_some());
    for (k, &j) in support.iter().enumerate() {
        coefficients[j] = fit.theta_hat[k + offset];
    }
    Ok(Refit { coefficients, intercept: fit.intercept.map(|i| fit.theta_hat[i]) })
}

/// Model that estimates the coordinates in `support` and fixes the rest at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateModel {
    p: usize,
    support: Vec<usize>,
}

impl CandidateModel {
    pub fn new(p: usize, mut support: Vec<usize>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if let Some(&bad) = support.iter().find(|&&j| j >= p) {
            return Err(Error::DimensionMismatch { expected: p, got: bad + 1 });
        }
        Ok(Self { p, support })
    }

    pub fn full(p: usize) -> Self {
        Self { p, support: (0..p).collect() }
    }

    /// Full model minus the listed coordinates.
    pub fn without(p: usize, dropped: &[usize]) -> Result<Self> {
        Self::new(p, (0..p).filter(|j| !dropped.contains(j)).collect())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Coordinates fixed at their constant (0).
    pub fn fixed(&self) -> Vec<usize> {
        (0..self.p).filter(|j| self.support.binary_search(j).is_err()).collect()
    }

    pub fn constants(&self) -> Vec<f64> {
        vec![0.0; self.p - self.support.len()]
    }
}

/// The candidate's estimate built from a full-model vector: coordinates in
/// the support are copied, the others take their constants.
pub fn plugin_estimate(fit_vector: &DVector<f64>, model: &CandidateModel) -> Result<DVector<f64>> {
    if fit_vector.len() != model.p() {
        return Err(Error::DimensionMismatch { expected: model.p(), got: fit_vector.len() });
    }
    let mut out = DVector::zeros(model.p());
    for &j in model.support() {
        out[j] = fit_vector[j];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plugin_copies_support_and_zeroes_the_rest() {
        let v = DVector::from_vec(vec![3.0, 4.0, 5.0]);
        let m = CandidateModel::new(3, vec![2, 0]).unwrap();
        assert_eq!(plugin_estimate(&v, &m).unwrap(), DVector::from_vec(vec![3.0, 0.0, 5.0]));
        assert_eq!(plugin_estimate(&v, &CandidateModel::full(3)).unwrap(), v);
        let empty = CandidateModel::new(3, vec![]).unwrap();
        assert_eq!(plugin_estimate(&v, &empty).unwrap(), DVector::zeros(3));
        assert_eq!(m.fixed(), vec![1]);
        assert_eq!(m.constants(), vec![0.0]);
    }

    #[test]
    fn candidate_rejects_out_of_range() {
        assert!(CandidateModel::new(2, vec![2]).is_err());
        let v = DVector::from_vec(vec![1.0]);
        assert!(plugin_estimate(&v, &CandidateModel::full(2)).is_err());
    }

    #[test]
    fn groups_are_renumbered() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let x = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let d = Dataset::unnamed(y, x).unwrap().with_groups(&["b", "a", "b", "c"]).unwrap();
        assert_eq!(d.groups().unwrap(), &[0, 1, 0, 2]);
        assert_eq!(d.group_rows().unwrap(), vec![vec![0, 2], vec![1], vec![3]]);
        let sub = d.select_rows(&[1, 3]).unwrap();
        assert_eq!(sub.groups().unwrap(), &[0, 1]);
    }

    #[test]
    fn dataset_validation() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(Dataset::unnamed(y.clone(), DMatrix::zeros(3, 1)).is_err());
        assert!(Dataset::unnamed(DVector::from_vec(vec![1.0]), DMatrix::zeros(1, 1)).is_err());
        let mut x = DMatrix::zeros(2, 1);
        x[(0, 0)] = f64::INFINITY;
        assert!(Dataset::unnamed(y, x).is_err());
    }
}
