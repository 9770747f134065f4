//! CSV ingestion: a header row, UTF-8, `.` as the decimal separator.

use std::io::Read;

use esubset::model::Dataset;
use nalgebra::{DMatrix, DVector};

use crate::config::RunConfig;
use crate::error::{AtStage, CliError, CliResult, Stage};

/// Dataset read from a CSV file, ready for fitting.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: Dataset,
    /// SHA-256 of the raw file contents.
    pub sha256: String,
}

pub fn load(config: &RunConfig) -> CliResult<Loaded> {
    let mut bytes = Vec::new();
    std::fs::File::open(&config.input)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(Stage::Input, format!("cannot read {}: {e}", config.input.display())))?;
    let sha256 = {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(&bytes))
    };
    let data = parse(&bytes, config)?;
    Ok(Loaded { data, sha256 })
}

fn column(header: &[String], name: &str, role: &str) -> CliResult<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::config(Stage::Input, format!("{role} column '{name}' not found in header")))
}

/// Parse CSV bytes into a dataset according to `config`.
pub fn parse(bytes: &[u8], config: &RunConfig) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header: Vec<String> =
        reader.headers().map_err(|e| CliError::io(Stage::Input, e.to_string()))?.iter().map(str::to_string).collect();
    let y_col = column(&header, &config.response, "response")?;
    let g_col = config.group.as_deref().map(|g| column(&header, g, "group")).transpose()?;
    let x_cols: Vec<usize> = match &config.covariates {
        Some(names) => names.iter().map(|n| column(&header, n, "covariate")).collect::<CliResult<_>>()?,
        None => (0..header.len()).filter(|&j| j != y_col && Some(j) != g_col).collect(),
    };
    if x_cols.is_empty() {
        return Err(CliError::config(Stage::Input, "no covariate columns"));
    }
    if let Some(&j) = x_cols.iter().find(|&&j| j == y_col || Some(j) == g_col) {
        return Err(CliError::config(
            Stage::Input,
            format!("column '{}' cannot be both a covariate and the response or group", header[j]),
        ));
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut groups = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::io(Stage::Input, e.to_string()))?;
        let number = |j: usize| -> CliResult<f64> {
            let cell = record.get(j).unwrap_or("");
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::config(
                    Stage::Input,
                    format!("row {}, column '{}': cannot parse '{cell}' as a finite number", row + 1, header[j]),
                )
            })
        };
        y.push(number(y_col)?);
        for &j in &x_cols {
            x.push(number(j)?);
        }
        if let Some(g) = g_col {
            groups.push(record.get(g).unwrap_or("").to_string());
        }
    }
    let n = y.len();
    let p = x_cols.len();
    let names = x_cols.iter().map(|&j| header[j].clone()).collect();
    let xm = DMatrix::from_row_slice(n, p, &x);
    let mut data = Dataset::new(DVector::from_vec(y), xm.clone(), names).at(Stage::Input)?;
    if g_col.is_some() {
        data = data.with_groups(&groups).at(Stage::Input)?;
        if !config.random_slopes.is_empty() {
            let slopes: Vec<usize> = config
                .random_slopes
                .iter()
                .map(|s| {
                    x_cols
                        .iter()
                        .position(|&j| header[j] == *s)
                        .ok_or_else(|| CliError::config(Stage::Input, format!("random slope '{s}' is not a covariate")))
                })
                .collect::<CliResult<_>>()?;
            let z = DMatrix::from_fn(n, slopes.len() + 1, |i, c| if c == 0 { 1.0 } else { xm[(i, slopes[c - 1])] });
            data = data.with_random_design(z).at(Stage::Input)?;
        }
    }
    Ok(data)
}
