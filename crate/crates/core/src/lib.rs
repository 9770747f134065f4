//! Best subset selection with bootstrap e-values.
//!
//! The pipeline fits a single full model, draws a generalized-bootstrap
//! ensemble of its coefficient vector with a one-step approximation, and
//! scores the full model plus every drop-one-covariate model by its mean
//! data depth inside that ensemble. A covariate is kept exactly when
//! dropping it lowers the score below the full model's.
//!
//! ```no_run
//! use esubset::{model, evalues::{self, SelectConfig}};
//! # fn get() -> model::Dataset { unimplemented!() }
//! let data = get();
//! let fit = model::fit_ols(&data, false).unwrap();
//! let report = evalues::select(&fit, &SelectConfig::for_fit(&fit)).unwrap();
//! println!("{:?}", report.selected_names());
//! ```

pub mod bootstrap;
pub mod depth;
mod error;
pub mod evalues;
mod linalg;
pub mod model;
pub mod rng;
pub mod screening;
pub mod simulate;

pub use error::{Error, Result};
