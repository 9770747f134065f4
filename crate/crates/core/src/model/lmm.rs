//! Linear mixed model fitted by restricted maximum likelihood.
//!
//! The relative random-effects covariance is parametrized by a lower
//! triangular factor, `Delta / sigma^2 = L L'`, so every iterate is positive
//! semi-definite. For a given `L` the fixed effects and `sigma^2` are
//! profiled out in closed form and the remaining REML deviance
//!
//! ```text
//! (N - p) log sigma2(L) + sum_g log|I + L' Z_g' Z_g L| + log|X' V(L)^-1 X|
//! ```
//!
//! is minimized over the entries of `L` with BFGS. Per-group cross products
//! are precomputed, so one evaluation costs `O(groups * q^2 * p)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::symmetrize;
use super::optim::{bfgs, Settings};
use super::{Dataset, Family, ModelFit, Nuisance, OneStepParts};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmmOptions {
    pub intercept: bool,
    pub max_iter: usize,
    /// Relative change of the REML criterion at which iteration stops.
    pub tol: f64,
}

impl Default for LmmOptions {
    fn default() -> Self {
        Self { intercept: false, max_iter: 500, tol: 1e-8 }
    }
}

pub fn fit_lmm(data: &Dataset) -> Result<ModelFit> {
    fit_lmm_with(data, &LmmOptions::default())
}

struct GroupStats {
    ztz: DMatrix<f64>,
    ztx: DMatrix<f64>,
    zty: DVector<f64>,
}

struct Problem {
    groups: Vec<GroupStats>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    n: usize,
    p: usize,
    q: usize,
}

struct Profile {
    criterion: f64,
    beta: DVector<f64>,
    sigma2: f64,
}

fn unpack(theta: &[f64], q: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(q, q);
    let mut k = 0;
    for j in 0..q {
        for i in j..q {
            l[(i, j)] = theta[k];
            k += 1;
        }
    }
    l
}

impl Problem {
    fn profile(&self, theta: &[f64]) -> Option<Profile> {
        let l = unpack(theta, self.q);
        let lt = l.transpose();
        let mut xtvx = self.xtx.clone();
        let mut xtvy = self.xty.clone();
        let mut ytvy = self.yty;
        let mut logdet = 0.0;
        for g in &self.groups {
            let mut m = &lt * &g.ztz * &l;
            for i in 0..self.q {
                m[(i, i)] += 1.0;
            }
            let chol = m.cholesky()?;
            logdet += 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let ztx_l = &lt * &g.ztx;
            let zty_l = &lt * &g.zty;
            let gx = chol.solve(&ztx_l);
            let gy = chol.solve(&zty_l);
            xtvx -= ztx_l.transpose() * &gx;
            xtvy -= ztx_l.transpose() * &gy;
            ytvy -= zty_l.dot(&gy);
        }
        let xchol = symmetrize(xtvx).cholesky()?;
        let beta = xchol.solve(&xtvy);
        let rss = ytvy - beta.dot(&xtvy);
        let dof = (self.n - self.p) as f64;
        let sigma2 = rss / dof;
        if sigma2.is_nan() || sigma2 <= 0.0 {
            return None;
        }
        let logdet_x = 2.0 * xchol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let criterion = dof * sigma2.ln() + logdet + logdet_x;
        criterion.is_finite().then_some(Profile { criterion, beta, sigma2 })
    }
}

fn random_design(data: &Dataset) -> DMatrix<f64> {
    data.random_design().cloned().unwrap_or_else(|| DMatrix::from_element(data.n(), 1, 1.0))
}

/// REML fit of `y = X beta + Z u + e` with one random-effects vector per
/// group. The random-effects design comes from the dataset (random
/// intercept when none is attached).
pub fn fit_lmm_with(data: &Dataset, options: &LmmOptions) -> Result<ModelFit> {
    let rows = data.group_rows().ok_or_else(|| Error::InvalidInput("mixed model requires group labels".into()))?;
    let (x, names) = data.design(options.intercept);
    let z = random_design(data);
    let y = data.y();
    let n = x.nrows();
    let p = x.ncols();
    let q = z.ncols();
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "mixed model needs more observations than fixed effects (n = {n}, p = {p})"
        )));
    }

    let blocks: Vec<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> = rows
        .iter()
        .map(|r| {
            (x.select_rows(r.iter()), z.select_rows(r.iter()), DVector::from_iterator(r.len(), r.iter().map(|&i| y[i])))
        })
        .collect();
    let problem = Problem {
        groups: blocks
            .iter()
            .map(|(xg, zg, yg)| GroupStats {
                ztz: zg.transpose() * zg,
                ztx: zg.transpose() * xg,
                zty: zg.transpose() * yg,
            })
            .collect(),
        xtx: x.transpose() * &x,
        xty: x.transpose() * y,
        yty: y.norm_squared(),
        n,
        p,
        q,
    };
    if problem.xtx.clone().cholesky().is_none() {
        return Err(Error::Singular("fixed-effects design is rank deficient".into()));
    }

    let mut start = Vec::with_capacity(q * (q + 1) / 2);
    for j in 0..q {
        for i in j..q {
            start.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    let objective = |t: &[f64]| problem.profile(t).map_or(f64::INFINITY, |pr| pr.criterion);
    let min = bfgs(objective, &start, &Settings { max_iter: options.max_iter, rel_tol: options.tol });
    if !min.converged {
        return Err(Error::NonConvergence { iterations: min.iterations });
    }
    let prof = problem.profile(&min.x).ok_or_else(|| Error::Singular("REML profile at the optimum".into()))?;
    let l = unpack(&min.x, q);
    let rel = &l * l.transpose();
    let sigma2 = prof.sigma2;
    let delta = symmetrize(&rel * sigma2);
    let beta = prof.beta;

    // One-step parts per group: V_g = sigma2 (I + Z_g L L' Z_g').
    let mut scores = DMatrix::zeros(rows.len(), p);
    let mut hess_factor = DMatrix::zeros(n, p);
    let mut factor_unit = Vec::with_capacity(n);
    let mut offset = 0;
    for (g, (xg, zg, yg)) in blocks.iter().enumerate() {
        let mut vg = zg * &rel * zg.transpose();
        for i in 0..vg.nrows() {
            vg[(i, i)] += 1.0;
        }
        vg *= sigma2;
        let chol = symmetrize(vg).cholesky().ok_or_else(|| Error::Singular(format!("covariance of group {g}")))?;
        let bg = chol
            .l_dirty()
            .solve_lower_triangular(xg)
            .ok_or_else(|| Error::Singular(format!("covariance of group {g}")))?;
        let resid = yg - xg * &beta;
        let rg = chol
            .l_dirty()
            .solve_lower_triangular(&resid)
            .ok_or_else(|| Error::Singular(format!("covariance of group {g}")))?;
        scores.set_row(g, &(bg.transpose() * rg).transpose());
        hess_factor.view_mut((offset, 0), (bg.nrows(), p)).copy_from(&bg);
        factor_unit.extend(std::iter::repeat_n(g, bg.nrows()));
        offset += bg.nrows();
    }
    let hessian = symmetrize(hess_factor.transpose() * &hess_factor);
    let hinv = hessian.clone().cholesky().ok_or_else(|| Error::Singular("X' V^-1 X".into()))?.inverse();
    let v_n = symmetrize(hinv * n as f64);

    Ok(ModelFit {
        family: Family::LinearMixedReml,
        theta_hat: beta,
        a_n: (n as f64).sqrt(),
        v_n,
        nuisance: Nuisance::Mixed {
            sigma2,
            delta: delta.row_iter().map(|r| r.iter().copied().collect()).collect(),
            iterations: min.iterations,
        },
        parts: OneStepParts { scores, hess_factor, factor_unit, hessian },
        names,
        intercept: options.intercept.then_some(0),
        n_obs: n,
        ridged: false,
    })
}

/// Generalized least squares for known variance components, with dense
/// per-group covariances `sigma2 I + Z_g delta Z_g'`. Used to cross-check
/// the profiled fit.
pub fn gls_estimate(data: &Dataset, delta: &DMatrix<f64>, sigma2: f64, intercept: bool) -> Result<DVector<f64>> {
    let rows = data.group_rows().ok_or_else(|| Error::InvalidInput("GLS requires group labels".into()))?;
    let (x, _) = data.design(intercept);
    let z = random_design(data);
    if delta.nrows() != z.ncols() || delta.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch { expected: z.ncols(), got: delta.nrows() });
    }
    let p = x.ncols();
    let mut xtvx = DMatrix::zeros(p, p);
    let mut xtvy = DVector::zeros(p);
    for r in &rows {
        let xg = x.select_rows(r.iter());
        let zg = z.select_rows(r.iter());
        let yg = DVector::from_iterator(r.len(), r.iter().map(|&i| data.y()[i]));
        let mut vg = &zg * delta * zg.transpose();
        for i in 0..vg.nrows() {
            vg[(i, i)] += sigma2;
        }
        let chol = symmetrize(vg).cholesky().ok_or_else(|| Error::Singular("group covariance".into()))?;
        let vx = chol.solve(&xg);
        xtvx += xg.transpose() * &vx;
        xtvy += vx.transpose() * &yg;
    }
    symmetrize(xtvx).cholesky().map(|c| c.solve(&xtvy)).ok_or_else(|| Error::Singular("X' V^-1 X".into()))
}
