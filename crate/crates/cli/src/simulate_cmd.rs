//! The `simulate` command: rerun a published table at desk or full scale.

use std::fmt::Write as _;
use std::path::Path;

use esubset::simulate::{reference, run_study, StudyTable, Reference, StudyConfig, StudySummary};
use serde::{Deserialize, Serialize};

use crate::error::{AtStage, CliError, CliResult, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 20 replicates per block.
    Desk,
    /// 100 replicates per block, as published.
    Full,
}

impl Scale {
    pub fn replicates(&self) -> usize {
        match self {
            Scale::Desk => 20,
            Scale::Full => 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    pub table: StudyTable,
    pub scale: Scale,
    pub seed: u64,
    /// Override the replicate count of the scale.
    pub replicates: Option<usize>,
    /// Restrict to one block (a `rho` value or a mixed-model setting).
    pub variant: Option<usize>,
    pub draws: usize,
}

/// One table row: obtained values beside the published ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub table: String,
    pub block: String,
    pub summary: StudySummary,
    pub reference: Option<Reference>,
}

pub fn simulate(args: &SimulateArgs, out: &Path) -> CliResult<(Vec<Row>, String)> {
    let table = args.table;
    let reps = args.replicates.unwrap_or(args.scale.replicates());
    if reps == 0 {
        return Err(CliError::config(Stage::Config, "replicates must be at least 1"));
    }
    let variants: Vec<usize> = match args.variant {
        Some(v) if v >= table.variants() => {
            return Err(CliError::config(
                Stage::Config,
                format!("table {} has blocks 0..{}, got {v}", table.id(), table.variants()),
            ))
        }
        Some(v) => vec![v],
        None => (0..table.variants()).collect(),
    };
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::io(Stage::Output, format!("cannot create {}: {e}", out.display())))?;

    let mut rows = Vec::new();
    let mut text = header(table, reps);
    for v in variants {
        let sim = table.sim_config(v).with_replicates(reps).with_seed(args.seed);
        let mut cfg = StudyConfig::new(sim, table.taus()).with_draws(args.draws, args.draws);
        if let Some(k) = table.screen_target(v) {
            cfg = cfg.with_screen(k);
        }
        let result = run_study(&cfg).at(Stage::Simulate)?;
        let path = out.join(format!("{}_block{}_replicates.csv", table.id(), v));
        let file = std::fs::File::create(&path)
            .map_err(|e| CliError::io(Stage::Output, format!("cannot write {}: {e}", path.display())))?;
        result.write_csv(file).at(Stage::Output)?;

        let label = table.variant_label(v);
        let _ = writeln!(text, "\n{label}");
        text.push_str(&column_header(table));
        for (i, s) in result.summaries.iter().enumerate() {
            let r = reference(table, v, i);
            text.push_str(&format_row(table, s, r.as_ref()));
            rows.push(Row { table: table.id().into(), block: label.clone(), summary: s.clone(), reference: r });
        }
    }
    write_summary_csv(&rows, &out.join(format!("{}_summary.csv", table.id())))?;
    let path = out.join(format!("{}_summary.txt", table.id()));
    std::fs::write(&path, &text)
        .map_err(|e| CliError::io(Stage::Output, format!("cannot write {}: {e}", path.display())))?;
    Ok((rows, text))
}

fn header(table: StudyTable, reps: usize) -> String {
    let mut s = format!("table {} with {reps} replicates per block; published values in brackets\n", table.id());
    match table {
        StudyTable::T1S1 | StudyTable::T1S2 => s.push_str(
            "PE is the squared relative test error of the refit on the selected support, the \
             scale on which the published PE values are reported; `ratio` is its square root\n",
        ),
        StudyTable::T2 | StudyTable::T3 => {
            s.push_str("the intercept column is always fitted and excluded from the rates and model size\n")
        }
    }
    s
}

fn column_header(table: StudyTable) -> String {
    match table {
        StudyTable::T1S1 | StudyTable::T1S2 => {
            format!("  {:<8} {:>18} {:>24} {:>10}\n", "tau", "sparsity", "PE", "ratio")
        }
        StudyTable::T2 => format!("  {:<8} {:>16} {:>16} {:>16}\n", "tau", "FPR%", "FNR%", "model size"),
        StudyTable::T3 => format!("  {:<8} {:>18}\n", "tau", "correct%"),
    }
}

fn cell(value: f64, reference: Option<f64>, prec: usize) -> String {
    match reference {
        Some(r) => format!("{value:.prec$} [{r:.prec$}]"),
        None => format!("{value:.prec$}"),
    }
}

fn sci(value: f64, reference: Option<f64>) -> String {
    match reference {
        Some(r) => format!("{value:.2e} [{r:.2e}]"),
        None => format!("{value:.2e}"),
    }
}

fn format_row(table: StudyTable, s: &StudySummary, r: Option<&Reference>) -> String {
    let get = |f: fn(&Reference) -> Option<f64>| r.and_then(f);
    let tau = s.tau_spec.label();
    match table {
        StudyTable::T1S1 | StudyTable::T1S2 => format!(
            "  {:<8} {:>18} {:>24} {:>10.3e}\n",
            tau,
            cell(s.sparsity, get(|r| r.sparsity), 2),
            sci(s.pe_squared, get(|r| r.pe)),
            s.pe
        ),
        StudyTable::T2 => format!(
            "  {:<8} {:>16} {:>16} {:>16}\n",
            tau,
            cell(s.fpr_pct, get(|r| r.fpr_pct), 1),
            cell(s.fnr_pct, get(|r| r.fnr_pct), 1),
            cell(s.model_size, get(|r| r.model_size), 2)
        ),
        StudyTable::T3 => format!("  {:<8} {:>18}\n", tau, cell(s.correct_pct, get(|r| r.correct_pct), 0)),
    }
}

fn write_summary_csv(rows: &[Row], path: &Path) -> CliResult<()> {
    let io = |e: csv::Error| CliError::io(Stage::Output, format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "table",
        "block",
        "tau_rule",
        "tau",
        "replicates",
        "sparsity",
        "pe",
        "pe_squared",
        "fpr_pct",
        "fnr_pct",
        "model_size",
        "correct_pct",
        "ref_sparsity",
        "ref_pe",
        "ref_fpr_pct",
        "ref_fnr_pct",
        "ref_model_size",
        "ref_correct_pct",
    ])
    .map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let s = &row.summary;
        let r = row.reference.unwrap_or_default();
        w.write_record([
            row.table.clone(),
            row.block.clone(),
            s.tau_spec.label(),
            s.tau.to_string(),
            s.replicates.to_string(),
            s.sparsity.to_string(),
            s.pe.to_string(),
            s.pe_squared.to_string(),
            s.fpr_pct.to_string(),
            s.fnr_pct.to_string(),
            s.model_size.to_string(),
            s.correct_pct.to_string(),
            opt(r.sparsity),
            opt(r.pe),
            opt(r.fpr_pct),
            opt(r.fnr_pct),
            opt(r.model_size),
            opt(r.correct_pct),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(Stage::Output, e.to_string()))
}
