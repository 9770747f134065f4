//! The `run` command: screen, fit, bootstrap, score, select and report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use esubset::evalues::{
    select_with, tau_sweep, train_validation_split, EvalueReport, Scorer, SelectConfig, SweepResult,
};
use esubset::model::{Dataset, FitSpec, LmmOptions, ModelFit, OlsOptions};
use esubset::screening::{default_target, sis_screen, ScreenResult};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{FamilyChoice, RunConfig};
use crate::error::{AtStage, CliError, CliResult, Stage};
use crate::input;

/// Result of a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: EvalueReport,
    pub selected: Vec<String>,
    pub output: PathBuf,
    pub summary: String,
}

struct Screening {
    result: ScreenResult,
    names: Vec<String>,
}

pub fn fit_spec(config: &RunConfig) -> FitSpec {
    match config.family() {
        FamilyChoice::Ols => FitSpec::Ols(OlsOptions { intercept: config.intercept, allow_ridge: true }),
        FamilyChoice::Lmm => FitSpec::Mixed(LmmOptions { intercept: config.intercept, ..Default::default() }),
    }
}

fn select_config(config: &RunConfig, tau: f64) -> SelectConfig {
    SelectConfig {
        scheme: config.weight_scheme(tau),
        r: config.draws,
        r1: config.draws1,
        kind: config.depth_kind(),
        seed: config.seed,
        hessian: config.hessian,
        candidates: None,
    }
}

pub fn run(config: &RunConfig) -> CliResult<RunOutcome> {
    config.validate()?;
    let loaded = input::load(config)?;
    let mut data = loaded.data;

    let screening = if config.screen {
        let target = config.screen_size.unwrap_or_else(|| default_target(&data));
        let result = sis_screen(&data, target).at(Stage::Screen)?;
        let names = data.names().to_vec();
        data = data.select_columns(&result.kept).at(Stage::Screen)?;
        Some(Screening { result, names })
    } else {
        None
    };

    let spec = fit_spec(config);
    let (report, fit, sweep, ensemble) = match &config.tau_grid {
        None => {
            let fit = spec.fit(&data).at(Stage::Fit)?;
            let cfg = select_config(config, config.tau.resolve(fit.n_obs));
            let scorer = Scorer::new(&fit, &cfg).at(Stage::Bootstrap)?;
            let report = select_with(&fit, &cfg, &scorer).at(Stage::Select)?;
            let ensemble = config.save_ensemble.then(|| scorer.reference().clone());
            (report, fit, None, ensemble)
        }
        Some(grid) => {
            let base = select_config(config, 1.0);
            let sweep = tau_sweep(&data, grid, config.validation, &spec, &base).at(Stage::Sweep)?;
            let (train_rows, _) = train_validation_split(&data, config.validation).at(Stage::Sweep)?;
            let train = data.select_rows(&train_rows).at(Stage::Sweep)?;
            let fit = spec.fit(&train).at(Stage::Fit)?;
            let chosen = sweep.chosen_entry();
            let ensemble = if config.save_ensemble {
                let cfg = select_config(config, chosen.tau);
                Some(Scorer::new(&fit, &cfg).at(Stage::Bootstrap)?.reference().clone())
            } else {
                None
            };
            (chosen.report.clone(), fit, Some(sweep), ensemble)
        }
    };

    let selected: Vec<String> = report.selected_names().iter().map(|s| s.to_string()).collect();
    let out = &config.output;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::io(Stage::Output, format!("cannot create {}: {e}", out.display())))?;

    let doc = report_json(config, &loaded.sha256, &data, &fit, &report, screening.as_ref(), sweep.as_ref());
    let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    write(&out.join("report.json"), text.as_bytes())?;

    let mut table = Vec::new();
    report.write_csv(&mut table).at(Stage::Output)?;
    write(&out.join("evalues.csv"), &table)?;

    if let Some(sweep) = &sweep {
        write(&out.join("sweep.csv"), sweep_csv(sweep).as_bytes())?;
    }
    if let Some(ens) = ensemble {
        ens.save_csv(&out.join("ensemble.csv")).at(Stage::Output)?;
    }
    config.save(&out.join("config.json"))?;

    let summary = summary_text(config, &data, &fit, &report, screening.as_ref(), sweep.as_ref());
    write(&out.join("summary.txt"), summary.as_bytes())?;
    Ok(RunOutcome { report, selected, output: out.clone(), summary })
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::io(Stage::Output, format!("cannot write {}: {e}", path.display())))
}

pub fn config_sha256(config: &RunConfig) -> String {
    let canonical = serde_json::to_vec(&config.analysis_json()).expect("config serializes");
    hex::encode(Sha256::digest(&canonical))
}

fn family_label(config: &RunConfig) -> &'static str {
    match config.family() {
        FamilyChoice::Ols => "ols",
        FamilyChoice::Lmm => "lmm",
    }
}

fn report_json(
    config: &RunConfig,
    input_sha: &str,
    data: &Dataset,
    fit: &ModelFit,
    report: &EvalueReport,
    screening: Option<&Screening>,
    sweep: Option<&SweepResult>,
) -> serde_json::Value {
    let timestamp =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let coefficients: serde_json::Map<String, serde_json::Value> =
        fit.names.iter().zip(fit.theta_hat.iter()).map(|(n, v)| (n.clone(), json!(v))).collect();
    let screening = screening.map(|s| {
        let name = |j: &usize| s.names[*j].clone();
        json!({
            "target_size": s.result.target_size,
            "kept": s.result.kept.iter().map(name).collect::<Vec<_>>(),
            "constant_columns": s.result.constant_columns.iter().map(name).collect::<Vec<_>>(),
        })
    });
    let sweep = sweep.map(|s| {
        json!({
            "chosen": s.chosen,
            "n_train": s.n_train,
            "n_validation": s.n_validation,
            "entries": s.entries.iter().map(|e| json!({
                "tau_rule": e.tau_spec,
                "tau_label": e.tau_spec.label(),
                "tau": e.tau,
                "selected": e.report.selected_names(),
                "validation_mse": e.validation_pe,
                "empty_support": e.empty_support,
            })).collect::<Vec<_>>(),
        })
    });
    json!({
        "format": "esubset-report/1",
        "provenance": {
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": config.seed,
            "config_sha256": config_sha256(config),
            "input_sha256": input_sha,
        },
        "config": config.analysis_json(),
        "data": {
            "n": data.n(),
            "p": data.p(),
            "groups": data.groups().map(|_| data.n_groups()),
            "family": family_label(config),
        },
        "screening": screening,
        "fit": {
            "n_obs": fit.n_obs,
            "ridged": fit.ridged,
            "coefficients": coefficients,
        },
        "evalues": report.to_json(),
        "selected": report.selected_names(),
        "sweep": sweep,
        "timestamp": { "unix_seconds": timestamp },
    })
}

fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = String::from("tau_rule,tau,size,selected,validation_mse,empty_support,chosen\n");
    for (i, e) in sweep.entries.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{:.10},{},{},{:.10e},{},{}",
            e.tau_spec.label(),
            e.tau,
            e.support.len(),
            e.report.selected_names().join(";"),
            e.validation_pe,
            e.empty_support,
            i == sweep.chosen
        );
    }
    s
}

fn summary_text(
    config: &RunConfig,
    data: &Dataset,
    fit: &ModelFit,
    report: &EvalueReport,
    screening: Option<&Screening>,
    sweep: Option<&SweepResult>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "e-value best subset selection");
    let _ = writeln!(s, "input:    {} (n = {}, p = {})", config.input.display(), data.n(), data.p());
    let _ = writeln!(
        s,
        "model:    {}{}{}",
        family_label(config),
        if config.intercept { ", intercept" } else { "" },
        data.groups().map(|_| format!(", {} groups", data.n_groups())).unwrap_or_default()
    );
    if let Some(sc) = screening {
        let _ = writeln!(s, "screen:   kept {} of {} columns", sc.result.kept.len(), sc.names.len());
    }
    let _ = writeln!(
        s,
        "depth:    {}; R = {}, R1 = {}; tau = {:.4}; seed = {}",
        report.depth_kind, report.r, report.r1, report.tau, report.seed
    );
    if fit.ridged {
        let _ = writeln!(s, "warning:  singular design, ridge added to the Gram matrix");
    }
    if report.ties > 0 {
        let _ = writeln!(s, "note:     {} drop-one e-value(s) tie the full model", report.ties);
    }
    if let Some(sw) = sweep {
        let _ = writeln!(s, "\ntau sweep (train {}, validation {}):", sw.n_train, sw.n_validation);
        let _ = writeln!(s, "  {:<10} {:>10} {:>6} {:>14}", "tau rule", "tau", "size", "validation MSE");
        for (i, e) in sw.entries.iter().enumerate() {
            let _ = writeln!(
                s,
                "  {:<10} {:>10.4} {:>6} {:>14.6e}{}",
                e.tau_spec.label(),
                e.tau,
                e.support.len(),
                e.validation_pe,
                if i == sw.chosen { "  <- chosen" } else { "" }
            );
        }
    }
    let width = report.dropped.iter().map(|d| d.name.len()).max().unwrap_or(4).max(7);
    let _ = writeln!(s, "\n  {:<width$} {:>12}  selected", "dropped", "e-value");
    for row in report.table() {
        let _ = writeln!(
            s,
            "  {:<width$} {:>12.6}  {}",
            row.dropped,
            row.e_value,
            if row.dropped == "none" {
                "-"
            } else if row.selected {
                "yes"
            } else {
                "no"
            }
        );
    }
    let chosen = report.selected_names();
    let rest: Vec<&str> =
        report.dropped.iter().filter(|d| !report.selected.contains(&d.index)).map(|d| d.name.as_str()).collect();
    let _ = writeln!(s, "\nselected:     {}", if chosen.is_empty() { "(none)".into() } else { chosen.join(", ") });
    let _ = writeln!(s, "not selected: {}", if rest.is_empty() { "(none)".into() } else { rest.join(", ") });
    s
}
