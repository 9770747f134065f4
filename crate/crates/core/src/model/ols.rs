use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, Family, ModelFit, Nuisance, OneStepParts};
use crate::linalg::cholesky_ridged;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OlsOptions {
    pub intercept: bool,
    /// Add `1e-8 * trace(X'X) / p` to a singular Gram matrix instead of failing.
    pub allow_ridge: bool,
}

/// Least-squares fit of the full model.
pub fn fit_ols(data: &Dataset, intercept: bool) -> Result<ModelFit> {
    fit_ols_with(data, &OlsOptions { intercept, ..Default::default() })
}

pub fn fit_ols_with(data: &Dataset, options: &OlsOptions) -> Result<ModelFit> {
    let (x, names) = data.design(options.intercept);
    let n = x.nrows();
    let p = x.ncols();
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "least squares needs more observations than coefficients (n = {n}, p = {p})"
        )));
    }
    let gram = x.transpose() * &x;
    let (chol, ridged) = cholesky_ridged(&gram, options.allow_ridge, "X'X is rank deficient")?;
    let xty = x.transpose() * data.y();
    let theta_hat = chol.solve(&xty);
    let residuals = data.y() - &x * &theta_hat;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (n - p) as f64;
    let gram_inv = chol.inverse();
    let v_n = gram_inv * (sigma2 * n as f64);

    let mut scores = x.clone();
    for (i, mut row) in scores.row_iter_mut().enumerate() {
        row *= residuals[i];
    }
    let hessian = chol.l() * chol.l().transpose();
    let parts = OneStepParts { scores, hess_factor: x, factor_unit: (0..n).collect(), hessian };
    Ok(ModelFit {
        family: Family::LinearOls,
        theta_hat,
        a_n: (n as f64).sqrt(),
        v_n: symmetrize(v_n),
        nuisance: Nuisance::Ols { sigma2 },
        parts,
        names,
        intercept: options.intercept.then_some(0),
        n_obs: n,
        ridged,
    })
}

pub(super) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
