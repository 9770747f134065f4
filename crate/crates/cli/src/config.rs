//! Run configuration, loadable from and savable to JSON.

use std::path::{Path, PathBuf};

use esubset::bootstrap::{HessianMode, TauSpec, WeightScheme};
use esubset::depth::{DepthKind, DEFAULT_DIRECTIONS};
use esubset::evalues::DEFAULT_DRAWS;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    Ols,
    Lmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DepthChoice {
    Halfspace,
    Projection,
    Mahalanobis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    /// Gamma weights for OLS, shifted Gamma for the mixed model.
    Auto,
    Gamma,
    Shifted,
    Moon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub response: String,
    /// Grouping column; its presence selects the mixed model.
    #[serde(default)]
    pub group: Option<String>,
    /// Covariates to use; `None` means every other column.
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    /// Covariates with random slopes in the mixed model (a random intercept
    /// is always included).
    #[serde(default)]
    pub random_slopes: Vec<String>,
    #[serde(default)]
    pub family: Option<FamilyChoice>,
    pub intercept: bool,
    pub depth: DepthChoice,
    pub directions: usize,
    pub scheme: SchemeChoice,
    /// Resample size of the moon bootstrap.
    #[serde(default)]
    pub moon_m: Option<usize>,
    pub tau: TauSpec,
    /// Sweep over these values and keep the best on a validation block.
    #[serde(default)]
    pub tau_grid: Option<Vec<TauSpec>>,
    pub draws: usize,
    pub draws1: usize,
    #[serde(default)]
    pub hessian: HessianMode,
    pub screen: bool,
    /// Columns kept by screening; default `n - 1`.
    #[serde(default)]
    pub screen_size: Option<usize>,
    pub validation: f64,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub save_ensemble: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, response: impl Into<String>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            response: response.into(),
            group: None,
            covariates: None,
            random_slopes: Vec::new(),
            family: None,
            intercept: true,
            depth: DepthChoice::Halfspace,
            directions: DEFAULT_DIRECTIONS,
            scheme: SchemeChoice::Auto,
            moon_m: None,
            tau: TauSpec::LogN,
            tau_grid: None,
            draws: DEFAULT_DRAWS,
            draws1: DEFAULT_DRAWS,
            hessian: HessianMode::Fixed,
            screen: false,
            screen_size: None,
            validation: 0.25,
            seed: 0,
            output: output.into(),
            save_ensemble: false,
        }
    }

    pub fn family(&self) -> FamilyChoice {
        self.family.unwrap_or(if self.group.is_some() { FamilyChoice::Lmm } else { FamilyChoice::Ols })
    }

    pub fn depth_kind(&self) -> DepthKind {
        match self.depth {
            DepthChoice::Halfspace => DepthKind::Halfspace { n_directions: self.directions },
            DepthChoice::Projection => DepthKind::Projection { n_directions: self.directions },
            DepthChoice::Mahalanobis => DepthKind::Mahalanobis,
        }
    }

    /// Weight scheme at scale `tau`.
    pub fn weight_scheme(&self, tau: f64) -> WeightScheme {
        match (self.scheme, self.family()) {
            (SchemeChoice::Moon, _) => WeightScheme::MoonMultinomial { m: self.moon_m.unwrap_or(0) },
            (SchemeChoice::Shifted, _) | (SchemeChoice::Auto, FamilyChoice::Lmm) => WeightScheme::ShiftedGamma { tau },
            _ => WeightScheme::GammaBayesian { tau },
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::config(Stage::Config, m));
        if self.response.trim().is_empty() {
            return bad("response column name is empty".into());
        }
        match (self.family(), &self.group) {
            (FamilyChoice::Ols, Some(g)) => {
                return bad(format!("group column '{g}' given for an OLS fit"));
            }
            (FamilyChoice::Lmm, None) => return bad("mixed model needs a group column".into()),
            _ => {}
        }
        if !self.random_slopes.is_empty() && self.family() != FamilyChoice::Lmm {
            return bad("random slopes need a mixed model".into());
        }
        if matches!(self.tau_grid.as_deref(), Some([])) {
            return bad("tau grid is empty".into());
        }
        if self.tau_grid.is_some() && !(self.validation > 0.0 && self.validation < 1.0) {
            return bad(format!("validation fraction must lie in (0, 1), got {}", self.validation));
        }
        if self.scheme == SchemeChoice::Moon {
            if self.moon_m.unwrap_or(0) == 0 {
                return bad("moon bootstrap needs --moon-m >= 1".into());
            }
            if self.tau_grid.is_some() {
                return bad("a tau grid cannot be used with the moon bootstrap".into());
            }
        }
        if self.draws < 2 || self.draws1 < 1 {
            return bad(format!("draws must satisfy R >= 2 and R1 >= 1, got ({}, {})", self.draws, self.draws1));
        }
        if self.depth != DepthChoice::Mahalanobis && self.directions == 0 {
            return bad("directions must be at least 1".into());
        }
        if self.screen_size == Some(0) {
            return bad("screen size must be at least 1".into());
        }
        if let TauSpec::Fixed(v) = self.tau {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tau must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(Stage::Config, format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(Stage::Config, format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::io(Stage::Output, format!("cannot write {}: {e}", path.display())))
    }

    /// Configuration as recorded in the report: everything that affects
    /// results, without the output location.
    pub fn analysis_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("output");
        v
    }
}

/// Parse a comma-separated tau grid, such as `log,0.1,0.2`.
pub fn parse_tau_grid(text: &str) -> CliResult<Vec<TauSpec>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<TauSpec>().map_err(|e| CliError::config(Stage::Config, e.to_string())))
        .collect()
}
