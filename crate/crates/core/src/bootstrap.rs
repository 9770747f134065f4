//! Generalized-bootstrap weights and the one-step resampled ensemble.
//!
//! Resampled estimates are obtained without refitting. For weights `w` with
//! standard deviation `sd_w` on the units of a fit, draw `r` is
//!
//! ```text
//! theta_r = theta_hat + (tau / sd_w) (n / a_n^2) H^-1 sum_k w_k s_k
//! ```
//!
//! where `s_k` are the unit score contributions and `H` the summed Hessian,
//! both taken at `theta_hat`. Since `sum_k s_k = 0` the raw weights can be
//! used in place of centered ones. With Gamma weights (mean 1, sd `tau`)
//! this is `theta_hat + H^-1 sum_k w_k s_k`, whose spread is `tau` times the
//! sampling spread of `theta_hat`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::PointCloud;
use crate::model::ModelFit;
use crate::rng::{self, tag, StreamRng};
use crate::{Error, Result};

/// Distribution of the resampling weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum WeightScheme {
    /// i.i.d. Gamma weights with mean 1 and variance `tau^2`.
    GammaBayesian { tau: f64 },
    /// `(k/m) Multinomial(m, uniform)` counts over the `k` units.
    MoonMultinomial { m: usize },
    /// `1 + Gamma(1, 1)` weights (mean 2, variance 1) with an explicit
    /// multiplier `tau` on the perturbation; the mixed-model recipe.
    ShiftedGamma { tau: f64 },
}

impl WeightScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightScheme::GammaBayesian { tau } | WeightScheme::ShiftedGamma { tau }
                if !(tau > 0.0 && tau.is_finite()) =>
            {
                Err(Error::InvalidInput(format!("tau must be positive and finite, got {tau}")))
            }
            WeightScheme::MoonMultinomial { m: 0 } => Err(Error::InvalidInput("moon bootstrap needs m >= 1".into())),
            _ => Ok(()),
        }
    }

    /// Effective resampling scale `tau` for `units` units.
    pub fn tau(&self, units: usize) -> f64 {
        match *self {
            WeightScheme::GammaBayesian { tau } | WeightScheme::ShiftedGamma { tau } => tau,
            WeightScheme::MoonMultinomial { .. } => self.weight_sd(units),
        }
    }

    pub fn weight_mean(&self) -> f64 {
        match self {
            WeightScheme::ShiftedGamma { .. } => 2.0,
            _ => 1.0,
        }
    }

    pub fn weight_sd(&self, units: usize) -> f64 {
        match *self {
            WeightScheme::GammaBayesian { tau } => tau,
            WeightScheme::ShiftedGamma { .. } => 1.0,
            WeightScheme::MoonMultinomial { m } => {
                let k = units as f64;
                ((k / m as f64) * (1.0 - 1.0 / k)).sqrt()
            }
        }
    }

    /// Same scheme family at a different scale, for tuning sweeps.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        let s = match self {
            WeightScheme::GammaBayesian { .. } => WeightScheme::GammaBayesian { tau },
            WeightScheme::ShiftedGamma { .. } => WeightScheme::ShiftedGamma { tau },
            WeightScheme::MoonMultinomial { .. } => {
                return Err(Error::InvalidInput("the moon bootstrap scale is set by m, not tau".into()))
            }
        };
        s.validate()?;
        Ok(s)
    }

    fn fill(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        match *self {
            WeightScheme::GammaBayesian { tau } => {
                let var = tau * tau;
                let g = Gamma::new(1.0 / var, var).map_err(|e| Error::InvalidInput(e.to_string()))?;
                out.iter_mut().for_each(|w| *w = g.sample(rng));
            }
            WeightScheme::ShiftedGamma { .. } => {
                let g = Gamma::new(1.0, 1.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
                out.iter_mut().for_each(|w| *w = 1.0 + g.sample(rng));
            }
            WeightScheme::MoonMultinomial { m } => {
                let k = out.len();
                out.iter_mut().for_each(|w| *w = 0.0);
                for _ in 0..m {
                    out[rng.random_range(0..k)] += 1.0;
                }
                let scale = k as f64 / m as f64;
                out.iter_mut().for_each(|w| *w *= scale);
            }
        }
        Ok(())
    }
}

/// How a value of `tau` is derived from the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum TauSpec {
    /// `log n`.
    LogN,
    /// `n^k`.
    Power(f64),
    /// A fixed value.
    Fixed(f64),
}

impl TauSpec {
    pub fn resolve(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            TauSpec::LogN => n.ln(),
            TauSpec::Power(k) => n.powf(k),
            TauSpec::Fixed(v) => v,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TauSpec::LogN => "log n".into(),
            TauSpec::Power(k) => format!("n^{k}"),
            TauSpec::Fixed(v) => format!("{v}"),
        }
    }
}

impl std::str::FromStr for TauSpec {
    type Err = Error;

    /// `log` for `log n`, a bare number `k` for `n^k`, `=v` for a fixed value.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("log") {
            return Ok(TauSpec::LogN);
        }
        let parse =
            |t: &str| t.parse::<f64>().map_err(|_| Error::InvalidInput(format!("cannot parse tau value '{s}'")));
        if let Some(v) = s.strip_prefix('=') {
            Ok(TauSpec::Fixed(parse(v)?))
        } else {
            Ok(TauSpec::Power(parse(s)?))
        }
    }
}

/// Draw one weight vector of length `n`.
pub fn draw_weights(scheme: &WeightScheme, n: usize, seed: u64) -> Result<Vec<f64>> {
    scheme.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("need at least one weight".into()));
    }
    let mut rng = rng::substream(seed, tag::WEIGHTS, 0);
    let mut out = vec![0.0; n];
    scheme.fill(&mut rng, &mut out)?;
    Ok(out)
}

/// Whether the Hessian is reused from the fit or reweighted per draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// `H` evaluated once at the estimate and shared by every draw.
    #[default]
    Fixed,
    /// `sum_k (w_k / mean w) H_k` per draw. For least squares with Gamma
    /// weights this reproduces the weighted re-solve exactly.
    Weighted,
}

/// Resampled full-model estimates, one per row.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    pub draws: DMatrix<f64>,
    pub tau: f64,
    pub seed: u64,
    pub scheme: WeightScheme,
    pub names: Vec<String>,
    /// Draws whose weighted Hessian was singular and were redrawn.
    pub redrawn: usize,
}

impl BootstrapEnsemble {
    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.draws.clone())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names)?;
        for row in self.draws.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// One resampled estimate for an explicit weight vector over the fit's units.
pub fn one_step_draw(
    fit: &ModelFit,
    weights: &[f64],
    scheme: &WeightScheme,
    mode: HessianMode,
) -> Result<DVector<f64>> {
    let parts = &fit.parts;
    let units = parts.units();
    if weights.len() != units {
        return Err(Error::DimensionMismatch { expected: units, got: weights.len() });
    }
    let w = DVector::from_column_slice(weights);
    let gradient = parts.scores.transpose() * &w;
    let scale = scheme.tau(units) / scheme.weight_sd(units) * fit.n_obs as f64 / (fit.a_n * fit.a_n);
    let step = match mode {
        HessianMode::Fixed => parts
            .hessian
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("full-model Hessian".into()))?
            .solve(&gradient),
        HessianMode::Weighted => {
            let mean = scheme.weight_mean();
            let normalized: Vec<f64> = weights.iter().map(|v| v / mean).collect();
            parts
                .weighted_hessian(&normalized)
                .cholesky()
                .ok_or_else(|| Error::Singular("weighted Hessian".into()))?
                .solve(&gradient)
        }
    };
    Ok(&fit.theta_hat + step * scale)
}

/// `replicates` one-step draws. Draw `r` uses its own random stream derived
/// from `(seed, r)`, so the result does not depend on scheduling.
pub fn one_step_ensemble(
    fit: &ModelFit,
    scheme: &WeightScheme,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    one_step_ensemble_with(fit, scheme, replicates, seed, HessianMode::Fixed)
}

pub fn one_step_ensemble_with(
    fit: &ModelFit,
    scheme: &WeightScheme,
    replicates: usize,
    seed: u64,
    mode: HessianMode,
) -> Result<BootstrapEnsemble> {
    scheme.validate()?;
    if replicates < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 draws, got {replicates}")));
    }
    let units = fit.parts.units();
    let p = fit.p();
    let hess_chol = fit.parts.hessian.clone().cholesky().ok_or_else(|| Error::Singular("full-model Hessian".into()))?;
    let scale = scheme.tau(units) / scheme.weight_sd(units) * fit.n_obs as f64 / (fit.a_n * fit.a_n);

    let rows: Vec<Result<(DVector<f64>, bool)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut w = vec![0.0; units];
            let mut rng = rng::substream(seed, tag::WEIGHTS, r as u64);
            scheme.fill(&mut rng, &mut w)?;
            match mode {
                HessianMode::Fixed => {
                    let gradient = fit.parts.scores.transpose() * DVector::from_column_slice(&w);
                    Ok((&fit.theta_hat + hess_chol.solve(&gradient) * scale, false))
                }
                HessianMode::Weighted => match one_step_draw(fit, &w, scheme, mode) {
                    Ok(v) => Ok((v, false)),
                    Err(Error::Singular(_)) => {
                        let mut rng = rng::substream(seed, tag::REDRAW, r as u64);
                        scheme.fill(&mut rng, &mut w)?;
                        one_step_draw(fit, &w, scheme, mode).map(|v| (v, true))
                    }
                    Err(e) => Err(e),
                },
            }
        })
        .collect();

    let mut draws = DMatrix::zeros(replicates, p);
    let mut redrawn = 0;
    for (r, row) in rows.into_iter().enumerate() {
        let (v, again) = row?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular(format!("bootstrap draw {r} is not finite")));
        }
        redrawn += usize::from(again);
        draws.set_row(r, &v.transpose());
    }
    Ok(BootstrapEnsemble { draws, tau: scheme.tau(units), seed, scheme: *scheme, names: fit.names.clone(), redrawn })
}
