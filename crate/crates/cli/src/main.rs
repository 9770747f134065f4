use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use esubset::bootstrap::{HessianMode, TauSpec};
use esubset::simulate::StudyTable;
use esubset_cli::config::{parse_tau_grid, DepthChoice, FamilyChoice, SchemeChoice};
use esubset_cli::simulate_cmd::{simulate, Scale, SimulateArgs};
use esubset_cli::{init_threads, pipeline, CliError, CliResult, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "esubset", version, about = "Best subset selection with bootstrap e-values")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "ESUBSET_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select covariates of a CSV dataset.
    Run(Box<RunArgs>),
    /// Rerun a published simulation table.
    Simulate(SimArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Load settings from a JSON file written by --write-config; flags given
    /// on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Response column.
    #[arg(long, short)]
    response: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Group column; fits a linear mixed model.
    #[arg(long)]
    group: Option<String>,
    /// Comma-separated covariate columns (default: all others).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Comma-separated covariates with random slopes.
    #[arg(long, value_delimiter = ',')]
    random_slopes: Option<Vec<String>>,
    #[arg(long, value_enum)]
    family: Option<FamilyChoice>,
    /// Fit without an intercept.
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, value_enum)]
    depth: Option<DepthChoice>,
    /// Random directions for halfspace and projection depth.
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeChoice>,
    /// Resample size for the moon bootstrap.
    #[arg(long)]
    moon_m: Option<usize>,
    /// `log` for log n, a number k for n^k, `=v` for a fixed value.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    /// Comma-separated tau values to choose from on a validation block.
    #[arg(long)]
    tau_grid: Option<String>,
    /// Reference ensemble size R.
    #[arg(long)]
    draws: Option<usize>,
    /// Query ensemble size R1.
    #[arg(long)]
    draws1: Option<usize>,
    /// Recompute the Hessian under each weight draw.
    #[arg(long)]
    weighted_hessian: bool,
    /// Screen covariates by marginal correlation before fitting.
    #[arg(long)]
    screen: bool,
    /// Columns kept by screening (default n - 1).
    #[arg(long)]
    screen_size: Option<usize>,
    /// Fraction of units held out when sweeping tau.
    #[arg(long)]
    validation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the reference ensemble to ensemble.csv.
    #[arg(long)]
    save_ensemble: bool,
    /// Write the resolved settings to this file and exit.
    #[arg(long)]
    write_config: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// t1s1, t1s2, t2 or t3.
    table: String,
    #[arg(long, value_enum, default_value = "desk")]
    scale: Scale,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the replicate count of the scale.
    #[arg(long)]
    replicates: Option<usize>,
    /// Run one block only (rho index or mixed-model setting, from 0).
    #[arg(long)]
    variant: Option<usize>,
    /// Ensemble sizes R = R1.
    #[arg(long, default_value_t = esubset::evalues::DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, short, default_value = "simulations")]
    output: PathBuf,
}

fn config_error(e: impl ToString) -> CliError {
    CliError::config(Stage::Config, e.to_string())
}

fn resolve(args: RunArgs) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let missing = |flag: &str| config_error(format!("missing --{flag} (or --config)"));
            RunConfig::new(
                args.input.clone().ok_or_else(|| missing("input"))?,
                args.response.clone().ok_or_else(|| missing("response"))?,
                args.output.clone().ok_or_else(|| missing("output"))?,
            )
        }
    };
    if let Some(v) = args.input {
        cfg.input = v;
    }
    if let Some(v) = args.response {
        cfg.response = v;
    }
    if let Some(v) = args.output {
        cfg.output = v;
    }
    if args.group.is_some() {
        cfg.group = args.group;
    }
    if args.covariates.is_some() {
        cfg.covariates = args.covariates;
    }
    if let Some(v) = args.random_slopes {
        cfg.random_slopes = v;
    }
    if args.family.is_some() {
        cfg.family = args.family;
    }
    if args.no_intercept {
        cfg.intercept = false;
    }
    if let Some(v) = args.depth {
        cfg.depth = v;
    }
    if let Some(v) = args.directions {
        cfg.directions = v;
    }
    if let Some(v) = args.scheme {
        cfg.scheme = v;
    }
    if args.moon_m.is_some() {
        cfg.moon_m = args.moon_m;
    }
    if let Some(v) = args.tau {
        cfg.tau = v.parse::<TauSpec>().map_err(config_error)?;
    }
    if let Some(v) = args.tau_grid {
        cfg.tau_grid = Some(parse_tau_grid(&v)?);
    }
    if let Some(v) = args.draws {
        cfg.draws = v;
    }
    if let Some(v) = args.draws1 {
        cfg.draws1 = v;
    }
    if args.weighted_hessian {
        cfg.hessian = HessianMode::Weighted;
    }
    if args.screen {
        cfg.screen = true;
    }
    if args.screen_size.is_some() {
        cfg.screen_size = args.screen_size;
    }
    if let Some(v) = args.validation {
        cfg.validation = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.save_ensemble {
        cfg.save_ensemble = true;
    }
    Ok((cfg, args.write_config))
}

/// Print to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn execute(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Run(args) => {
            let (cfg, write_to) = resolve(*args)?;
            cfg.validate()?;
            if let Some(path) = write_to {
                return cfg.save(&path);
            }
            let outcome = pipeline::run(&cfg)?;
            emit(&format!("{}wrote {}\n", outcome.summary, outcome.output.display()));
        }
        Command::Simulate(args) => {
            let table: StudyTable = args.table.parse().map_err(config_error)?;
            let sim = SimulateArgs {
                table,
                scale: args.scale,
                seed: args.seed,
                replicates: args.replicates,
                variant: args.variant,
                draws: args.draws,
            };
            let (_, text) = simulate(&sim, &args.output)?;
            emit(&format!("{text}wrote {}\n", args.output.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("esubset: error in stage {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
