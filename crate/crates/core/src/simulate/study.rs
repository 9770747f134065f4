//! Monte Carlo studies: generate, screen, fit, select, refit, score.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, generate, MetricSet, Scenario, SimConfig};
use crate::bootstrap::{TauSpec, WeightScheme};
use crate::depth::DepthKind;
use crate::evalues::{self, SelectConfig};
use crate::linalg::compensated_mean;
use crate::model::{self, FitSpec, LmmOptions, OlsOptions};
use crate::rng::{derive_seed, tag};
use crate::screening::sis_screen;
use crate::Result;

/// A simulation study over a grid of tau values. Every tau is run on the
/// same replicate datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub sim: SimConfig,
    pub taus: Vec<TauSpec>,
    pub r: usize,
    pub r1: usize,
    pub kind: DepthKind,
    /// Screen to this many columns before fitting.
    pub screen: Option<usize>,
}

impl StudyConfig {
    pub fn new(sim: SimConfig, taus: Vec<TauSpec>) -> Self {
        Self {
            sim,
            taus,
            r: evalues::DEFAULT_DRAWS,
            r1: evalues::DEFAULT_DRAWS,
            kind: DepthKind::halfspace(),
            screen: None,
        }
    }

    pub fn with_screen(mut self, target: usize) -> Self {
        self.screen = Some(target);
        self
    }

    pub fn with_draws(mut self, r: usize, r1: usize) -> Self {
        self.r = r;
        self.r1 = r1;
        self
    }

    fn fit_spec(&self) -> FitSpec {
        match self.sim.scenario {
            Scenario::MixedIntercept => FitSpec::Mixed(LmmOptions::default()),
            _ => FitSpec::Ols(OlsOptions::default()),
        }
    }

    fn scheme(&self, tau: f64) -> WeightScheme {
        match self.sim.scenario {
            Scenario::MixedIntercept => WeightScheme::ShiftedGamma { tau },
            _ => WeightScheme::GammaBayesian { tau },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub tau_index: usize,
    pub tau: f64,
    /// Selected columns of the generated design.
    pub selected: Vec<usize>,
    pub metrics: MetricSet,
    pub e_full: f64,
    /// True covariates surviving screening, when screening was used.
    pub screened_true: Option<usize>,
}

/// Averages over replicates for one tau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub tau_spec: TauSpec,
    pub tau: f64,
    pub replicates: usize,
    pub sparsity: f64,
    pub pe: f64,
    pub pe_squared: f64,
    pub fpr_pct: f64,
    pub fnr_pct: f64,
    pub model_size: f64,
    pub correct_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    /// Ordered by tau, then replicate.
    pub outcomes: Vec<ReplicateOutcome>,
    pub summaries: Vec<StudySummary>,
}

impl StudyResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "replicate",
            "tau",
            "size",
            "sparsity",
            "pe",
            "pe_squared",
            "fpr_pct",
            "fnr_pct",
            "correct",
            "e_full",
        ])?;
        for o in &self.outcomes {
            w.write_record([
                o.replicate.to_string(),
                format!("{}", o.tau),
                o.selected.len().to_string(),
                o.metrics.sparsity.to_string(),
                format!("{:e}", o.metrics.pe),
                format!("{:e}", o.metrics.pe_squared),
                format!("{}", o.metrics.fpr_pct),
                format!("{}", o.metrics.fnr_pct),
                o.metrics.correct.to_string(),
                format!("{}", o.e_full),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_replicate(config: &StudyConfig, replicate: usize) -> Result<Vec<ReplicateOutcome>> {
    let sim = &config.sim;
    let data = generate(sim, replicate)?;
    let train = &data.train;
    let (columns, screened_true) = match config.screen {
        Some(target) => {
            let kept = sis_screen(train, target)?.kept;
            let hits = sim.true_support().iter().filter(|j| kept.contains(j)).count();
            (kept, Some(hits))
        }
        None => ((0..sim.p).collect(), None),
    };
    let reduced = if config.screen.is_some() { train.select_columns(&columns)? } else { train.clone() };
    let spec = config.fit_spec();
    let fit = spec.fit(&reduced)?;
    let seed = derive_seed(sim.seed, tag::SELECTION, replicate as u64);
    let candidates: Vec<usize> = (0..columns.len()).filter(|&k| !sim.forced.contains(&columns[k])).collect();

    config
        .taus
        .iter()
        .enumerate()
        .map(|(tau_index, tau_spec)| {
            let tau = tau_spec.resolve(train.n());
            let select = SelectConfig {
                scheme: config.scheme(tau),
                r: config.r,
                r1: config.r1,
                kind: config.kind,
                seed,
                hessian: Default::default(),
                candidates: Some(candidates.clone()),
            };
            let report = evalues::select(&fit, &select)?;
            let selected: Vec<usize> = report.selected_columns().into_iter().map(|k| columns[k]).collect();
            let mut support = selected.clone();
            support.extend(sim.forced.iter().copied());
            support.sort_unstable();
            let refit = model::refit(train, &support, &spec)?;
            let metrics = evaluate(&selected, &refit.coefficients, sim, &data.test)?;
            Ok(ReplicateOutcome { replicate, tau_index, tau, selected, metrics, e_full: report.e_full, screened_true })
        })
        .collect()
}

/// Run every replicate (in parallel) and average per tau.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.sim.validate()?;
    let per_rep: Vec<Vec<ReplicateOutcome>> =
        (0..config.sim.replicates).into_par_iter().map(|r| run_replicate(config, r)).collect::<Result<_>>()?;
    let mut outcomes: Vec<ReplicateOutcome> = per_rep.into_iter().flatten().collect();
    outcomes.sort_by_key(|o| (o.tau_index, o.replicate));

    let summaries = config
        .taus
        .iter()
        .enumerate()
        .map(|(t, spec)| {
            let rows: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.tau_index == t).collect();
            let mean =
                |f: &dyn Fn(&ReplicateOutcome) -> f64| compensated_mean(&rows.iter().map(|o| f(o)).collect::<Vec<_>>());
            StudySummary {
                tau_spec: *spec,
                tau: rows.first().map_or(f64::NAN, |o| o.tau),
                replicates: rows.len(),
                sparsity: mean(&|o| o.metrics.sparsity as f64),
                pe: mean(&|o| o.metrics.pe),
                pe_squared: mean(&|o| o.metrics.pe_squared),
                fpr_pct: mean(&|o| o.metrics.fpr_pct),
                fnr_pct: mean(&|o| o.metrics.fnr_pct),
                model_size: mean(&|o| o.selected.len() as f64),
                correct_pct: 100.0 * mean(&|o| f64::from(u8::from(o.metrics.correct))),
            }
        })
        .collect();
    Ok(StudyResult { config: config.clone(), outcomes, summaries })
}
