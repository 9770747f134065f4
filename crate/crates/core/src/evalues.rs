//! Bootstrap e-values and the drop-one selection rule.
//!
//! The e-value of a candidate model is the mean depth of its plug-in
//! estimates, built from a query ensemble, inside a reference ensemble of
//! full-model draws. A covariate `j` is selected exactly when the model
//! without `j` scores strictly below the full model.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{self, BootstrapEnsemble, HessianMode, TauSpec, WeightScheme};
use crate::depth::{DepthEvaluator, DepthKind, QueryBatch};
use crate::linalg::compensated_mean;
use crate::model::{CandidateModel, Dataset, FitSpec, ModelFit};
use crate::rng::{derive_seed, tag};
use crate::{Error, Result};

/// Default Monte Carlo size for both ensembles.
pub const DEFAULT_DRAWS: usize = 1000;

/// Settings for one selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub scheme: WeightScheme,
    /// Size of the reference ensemble.
    pub r: usize,
    /// Size of the query ensemble.
    pub r1: usize,
    pub kind: DepthKind,
    pub seed: u64,
    #[serde(default)]
    pub hessian: HessianMode,
    /// Coordinates to score; `None` means every non-intercept coordinate.
    #[serde(default)]
    pub candidates: Option<Vec<usize>>,
}

impl SelectConfig {
    /// Gamma weights with `tau = log n`, 1000 draws each, halfspace depth.
    pub fn for_fit(fit: &ModelFit) -> Self {
        Self {
            scheme: WeightScheme::GammaBayesian { tau: TauSpec::LogN.resolve(fit.n_obs) },
            r: DEFAULT_DRAWS,
            r1: DEFAULT_DRAWS,
            kind: DepthKind::halfspace(),
            seed: 0,
            hessian: HessianMode::Fixed,
            candidates: None,
        }
    }

    pub fn with_scheme(mut self, scheme: WeightScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_draws(mut self, r: usize, r1: usize) -> Self {
        self.r = r;
        self.r1 = r1;
        self
    }

    pub fn with_kind(mut self, kind: DepthKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.kind.validate()?;
        if self.r < 2 || self.r1 < 1 {
            return Err(Error::InvalidInput(format!(
                "ensemble sizes must satisfy R >= 2 and R1 >= 1, got ({}, {})",
                self.r, self.r1
            )));
        }
        Ok(())
    }
}

/// Mean depth of the plug-in estimates of `model`, one per row of `query`,
/// inside the cloud `reference`.
pub fn evalue(
    model: &CandidateModel,
    reference: &BootstrapEnsemble,
    query: &BootstrapEnsemble,
    kind: DepthKind,
    seed: u64,
) -> Result<f64> {
    if reference.dim() != query.dim() {
        return Err(Error::DimensionMismatch { expected: reference.dim(), got: query.dim() });
    }
    if model.p() != reference.dim() {
        return Err(Error::DimensionMismatch { expected: reference.dim(), got: model.p() });
    }
    if query.is_empty() {
        return Err(Error::InvalidInput("query ensemble is empty".into()));
    }
    let evaluator = DepthEvaluator::new(&reference.cloud()?, kind, seed)?;
    let batch = evaluator.prepare(&query.draws)?;
    mean_depth(&evaluator, &batch, &model.fixed())
}

fn mean_depth(evaluator: &DepthEvaluator, batch: &QueryBatch, zeroed: &[usize]) -> Result<f64> {
    Ok(compensated_mean(&evaluator.batch_depths(batch, zeroed)?))
}

/// Both ensembles of a fit and a depth evaluator with a fixed direction
/// set, ready to score any number of candidate models.
#[derive(Debug, Clone)]
pub struct Scorer {
    reference: BootstrapEnsemble,
    query: BootstrapEnsemble,
    evaluator: DepthEvaluator,
    batch: QueryBatch,
}

impl Scorer {
    /// Draws the reference and query ensembles on independent sub-seeds.
    pub fn new(fit: &ModelFit, config: &SelectConfig) -> Result<Self> {
        config.validate()?;
        let reference = bootstrap::one_step_ensemble_with(
            fit,
            &config.scheme,
            config.r,
            derive_seed(config.seed, tag::ENSEMBLE_REFERENCE, 0),
            config.hessian,
        )?;
        let query = bootstrap::one_step_ensemble_with(
            fit,
            &config.scheme,
            config.r1.max(2),
            derive_seed(config.seed, tag::ENSEMBLE_QUERY, 0),
            config.hessian,
        )?;
        let query = if config.r1 == 1 { truncate(query, 1) } else { query };
        Self::from_ensembles(reference, query, config.kind, config.seed)
    }

    pub fn from_ensembles(
        reference: BootstrapEnsemble,
        query: BootstrapEnsemble,
        kind: DepthKind,
        seed: u64,
    ) -> Result<Self> {
        if reference.dim() != query.dim() {
            return Err(Error::DimensionMismatch { expected: reference.dim(), got: query.dim() });
        }
        let evaluator = DepthEvaluator::new(&reference.cloud()?, kind, derive_seed(seed, tag::DIRECTIONS, 0))?;
        let batch = evaluator.prepare(&query.draws)?;
        Ok(Self { reference, query, evaluator, batch })
    }

    pub fn reference(&self) -> &BootstrapEnsemble {
        &self.reference
    }

    pub fn query(&self) -> &BootstrapEnsemble {
        &self.query
    }

    pub fn evaluator(&self) -> &DepthEvaluator {
        &self.evaluator
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    /// E-value of the model that fixes the coordinates in `zeroed` at 0.
    pub fn score_zeroed(&self, zeroed: &[usize]) -> Result<f64> {
        mean_depth(&self.evaluator, &self.batch, zeroed)
    }

    pub fn score(&self, model: &CandidateModel) -> Result<f64> {
        if model.p() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: model.p() });
        }
        self.score_zeroed(&model.fixed())
    }

    /// Full-model depths of the query rows.
    pub fn full_depths(&self) -> Result<Vec<f64>> {
        self.evaluator.batch_depths(&self.batch, &[])
    }
}

fn truncate(mut e: BootstrapEnsemble, rows: usize) -> BootstrapEnsemble {
    e.draws = e.draws.rows(0, rows).into_owned();
    e
}

/// E-value of one drop-one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedEvalue {
    /// Coordinate in the full coefficient vector.
    pub index: usize,
    pub name: String,
    pub e_value: f64,
}

/// Outcome of a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalueReport {
    pub e_full: f64,
    pub dropped: Vec<DroppedEvalue>,
    /// Coordinates whose drop-one e-value is strictly below `e_full`.
    pub selected: Vec<usize>,
    pub tau: f64,
    pub r: usize,
    pub r1: usize,
    pub depth_kind: DepthKind,
    pub seed: u64,
    /// Position of the intercept in the coefficient vector, if any.
    pub intercept: Option<usize>,
    /// Number of drop-one e-values exactly equal to `e_full`.
    pub ties: usize,
    /// The depth covariance was ridge-regularized.
    pub ridged: bool,
    /// Projection directions skipped for zero spread.
    pub skipped_directions: usize,
}

/// The selection rule: indices whose e-value is strictly below `e_full`.
pub fn selection_rule(e_full: f64, dropped: &[DroppedEvalue]) -> Vec<usize> {
    let mut out: Vec<usize> = dropped.iter().filter(|d| d.e_value < e_full).map(|d| d.index).collect();
    out.sort_unstable();
    out
}

/// One row of the e-value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Name of the dropped covariate, or `none` for the full model.
    pub dropped: String,
    pub e_value: f64,
    pub selected: bool,
}

impl EvalueReport {
    pub fn selected_names(&self) -> Vec<&str> {
        self.selected
            .iter()
            .filter_map(|j| self.dropped.iter().find(|d| d.index == *j))
            .map(|d| d.name.as_str())
            .collect()
    }

    /// Selected coordinates as dataset column indices (intercept removed).
    pub fn selected_columns(&self) -> Vec<usize> {
        self.selected
            .iter()
            .filter(|&&j| Some(j) != self.intercept)
            .map(|&j| match self.intercept {
                Some(i) if j > i => j - 1,
                _ => j,
            })
            .collect()
    }

    pub fn e_value_of(&self, index: usize) -> Option<f64> {
        self.dropped.iter().find(|d| d.index == index).map(|d| d.e_value)
    }

    /// Full model plus every drop-one model, ascending by e-value.
    pub fn table(&self) -> Vec<TableRow> {
        let mut rows: Vec<TableRow> = self
            .dropped
            .iter()
            .map(|d| TableRow {
                dropped: d.name.clone(),
                e_value: d.e_value,
                selected: self.selected.binary_search(&d.index).is_ok(),
            })
            .collect();
        rows.push(TableRow { dropped: "none".into(), e_value: self.e_full, selected: false });
        rows.sort_by(|a, b| a.e_value.total_cmp(&b.e_value));
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dropped", "e_value", "selected"])?;
        for row in self.table() {
            w.write_record([row.dropped, format!("{:.10}", row.e_value), row.selected.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON object with the report fields and the ascending table.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report is serializable");
        v["table"] = serde_json::to_value(self.table()).expect("table is serializable");
        v
    }
}

/// Score the full model and every drop-one model of `fit`.
pub fn select(fit: &ModelFit, config: &SelectConfig) -> Result<EvalueReport> {
    let scorer = Scorer::new(fit, config)?;
    select_with(fit, config, &scorer)
}

/// As [`select`], reusing ensembles already drawn for `fit`.
pub fn select_with(fit: &ModelFit, config: &SelectConfig, scorer: &Scorer) -> Result<EvalueReport> {
    if scorer.dim() != fit.p() {
        return Err(Error::DimensionMismatch { expected: fit.p(), got: scorer.dim() });
    }
    let candidates = match &config.candidates {
        Some(c) => {
            if let Some(&bad) = c.iter().find(|&&j| j >= fit.p()) {
                return Err(Error::DimensionMismatch { expected: fit.p(), got: bad + 1 });
            }
            c.clone()
        }
        None => fit.default_candidates(),
    };
    let e_full = scorer.score_zeroed(&[])?;
    let dropped = candidates
        .iter()
        .map(|&j| Ok(DroppedEvalue { index: j, name: fit.names[j].clone(), e_value: scorer.score_zeroed(&[j])? }))
        .collect::<Result<Vec<_>>>()?;
    let selected = selection_rule(e_full, &dropped);
    let ties = dropped.iter().filter(|d| d.e_value == e_full).count();
    Ok(EvalueReport {
        e_full,
        dropped,
        selected,
        tau: scorer.reference.tau,
        r: scorer.reference.len(),
        r1: scorer.query.len(),
        depth_kind: config.kind,
        seed: config.seed,
        intercept: fit.intercept,
        ties,
        ridged: fit.ridged || scorer.evaluator.ridged(),
        skipped_directions: scorer.evaluator.skipped_directions(),
    })
}

/// Result of one grid point of a tuning sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub tau_spec: TauSpec,
    pub tau: f64,
    pub report: EvalueReport,
    /// Selected dataset columns.
    pub support: Vec<usize>,
    /// Mean squared validation error of the refit on `support`.
    pub validation_pe: f64,
    /// Nothing was selected; the prediction is intercept-only or zero.
    pub empty_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Index into `entries` of the chosen tau.
    pub chosen: usize,
    pub n_train: usize,
    pub n_validation: usize,
}

impl SweepResult {
    pub fn chosen_entry(&self) -> &SweepEntry {
        &self.entries[self.chosen]
    }
}

/// Split rows into a leading training block and a trailing validation
/// block. Grouped data is split on whole groups, in order of first
/// appearance.
pub fn train_validation_split(data: &Dataset, validation: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(validation > 0.0 && validation < 1.0) {
        return Err(Error::InvalidInput(format!("validation fraction must lie in (0, 1), got {validation}")));
    }
    let units: Vec<Vec<usize>> = match data.group_rows() {
        Some(g) => g,
        None => (0..data.n()).map(|i| vec![i]).collect(),
    };
    let n_val = ((units.len() as f64) * validation).round() as usize;
    if n_val == 0 || n_val >= units.len() {
        return Err(Error::InvalidInput(format!(
            "validation fraction {validation} leaves an empty split of {} units",
            units.len()
        )));
    }
    let cut = units.len() - n_val;
    let train = units[..cut].concat();
    let val = units[cut..].concat();
    Ok((train, val))
}

/// Select on a training block for every tau in `taus`, refit on the
/// selected support and keep the tau with the lowest validation error.
/// Ties go to the smaller tau.
pub fn tau_sweep(
    data: &Dataset,
    taus: &[TauSpec],
    validation: f64,
    spec: &FitSpec,
    config: &SelectConfig,
) -> Result<SweepResult> {
    if taus.is_empty() {
        return Err(Error::InvalidInput("tau grid is empty".into()));
    }
    let (train_rows, val_rows) = train_validation_split(data, validation)?;
    let train = data.select_rows(&train_rows)?;
    let val = data.select_rows(&val_rows)?;
    let fit = spec.fit(&train)?;

    let mut entries = Vec::with_capacity(taus.len());
    for spec_tau in taus {
        let tau = spec_tau.resolve(train.n());
        let cfg = config.clone().with_scheme(config.scheme.with_tau(tau)?);
        let report = select(&fit, &cfg)?;
        let support = report.selected_columns();
        let refit = crate::model::refit(&train, &support, spec)?;
        let pred = refit.predict(val.x());
        let sq: Vec<f64> = pred.iter().zip(val.y().iter()).map(|(a, b)| (a - b) * (a - b)).collect();
        entries.push(SweepEntry {
            tau_spec: *spec_tau,
            tau,
            empty_support: support.is_empty(),
            support,
            validation_pe: compensated_mean(&sq),
            report,
        });
    }
    let chosen = (0..entries.len())
        .min_by(|&a, &b| {
            entries[a]
                .validation_pe
                .total_cmp(&entries[b].validation_pe)
                .then(entries[a].tau.total_cmp(&entries[b].tau))
        })
        .expect("grid is nonempty");
    Ok(SweepResult { entries, chosen, n_train: train.n(), n_validation: val.n() })
}

/// Exhaustive best subset by BIC for small `p`, used as a reference.
/// Returns the column indices of the best subset (no intercept).
pub fn best_subset_bic(data: &Dataset) -> Result<Vec<usize>> {
    let p = data.p();
    if p > 20 {
        return Err(Error::InvalidInput(format!("exhaustive search over p = {p} columns")));
    }
    let n = data.n() as f64;
    let x = data.x();
    let y = data.y();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let rss = if cols.is_empty() {
            y.norm_squared()
        } else {
            let xs: DMatrix<f64> = x.select_columns(cols.iter());
            let gram = xs.transpose() * &xs;
            let Some(chol) = gram.cholesky() else { continue };
            let beta = chol.solve(&(xs.transpose() * y));
            (y - xs * beta).norm_squared()
        };
        let bic = n * (rss / n).ln() + cols.len() as f64 * n.ln();
        if bic < best.0 {
            best = (bic, cols);
        }
    }
    Ok(best.1)
}
