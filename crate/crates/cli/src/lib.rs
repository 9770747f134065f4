//! Command-line front end for e-value best subset selection.
//!
//! `run` reads a CSV file and writes `report.json`, `evalues.csv`,
//! `summary.txt`, `config.json` and, on request, `ensemble.csv` and
//! `sweep.csv`. `simulate` reruns the published simulation tables.

pub mod config;
pub mod error;
pub mod input;
pub mod pipeline;
pub mod simulate_cmd;

pub use config::RunConfig;
pub use error::{CliError, CliResult, Stage};

/// Cap the global worker pool. Results do not depend on the thread count.
pub fn init_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config(Stage::Config, "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(Stage::Config, e.to_string()))?;
    }
    Ok(())
}
