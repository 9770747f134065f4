//! Sure independence screening by marginal correlation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::Dataset;
use crate::{Error, Result};

/// Columns kept by a screening pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    /// Kept column indices, in ascending order.
    pub kept: Vec<usize>,
    /// `|corr(y, x_j)|` per column; 0 for constant columns.
    pub scores: Vec<f64>,
    pub target_size: usize,
    /// Columns with zero variance.
    pub constant_columns: Vec<usize>,
}

impl ScreenResult {
    /// Column indices from the highest score down; ties by lower index.
    pub fn ranking(&self) -> Vec<usize> {
        rank(&self.scores)
    }
}

fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Default screening size, `n - 1`.
pub fn default_target(data: &Dataset) -> usize {
    data.n().saturating_sub(1).max(1)
}

/// Keep the `target_size` columns most correlated with the response.
pub fn sis_screen(data: &Dataset, target_size: usize) -> Result<ScreenResult> {
    if target_size == 0 {
        return Err(Error::InvalidInput("screening target size must be at least 1".into()));
    }
    let n = data.n() as f64;
    let y = data.y();
    let y_mean = y.mean();
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let y_norm = yc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if y_norm == 0.0 || !y_norm.is_finite() {
        return Err(Error::Degenerate("response has zero variance".into()));
    }
    let x = data.x();
    let columns: Vec<(f64, bool)> = (0..data.p())
        .into_par_iter()
        .map(|j| {
            let col = x.column(j);
            let mean = col.sum() / n;
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for (xv, yv) in col.iter().zip(&yc) {
                let d = xv - mean;
                sxy += d * yv;
                sxx += d * d;
            }
            // relative cutoff so rounding noise on a constant column is not variance
            let scale = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if sxx <= (1e-12 * scale).powi(2) * n {
                (0.0, true)
            } else {
                ((sxy / (sxx.sqrt() * y_norm)).abs().min(1.0), false)
            }
        })
        .collect();
    let scores: Vec<f64> = columns.iter().map(|c| c.0).collect();
    let constant_columns: Vec<usize> = (0..data.p()).filter(|&j| columns[j].1).collect();
    let mut kept: Vec<usize> = rank(&scores).into_iter().take(target_size.min(data.p())).collect();
    kept.sort_unstable();
    Ok(ScreenResult { kept, scores, target_size, constant_columns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn data() -> Dataset {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 0.3, 2.0, //
                2.0, -1.0, 2.0, //
                3.0, 0.5, 2.0, //
                4.0, 0.1, 2.0, //
                5.0, 2.0, 2.0,
            ],
        );
        let y = DVector::from_column_slice(x.column(0).as_slice());
        Dataset::unnamed(y, x).unwrap()
    }

    #[test]
    fn perfect_correlation_ranks_first() {
        let r = sis_screen(&data(), 1).unwrap();
        assert_eq!(r.kept, vec![0]);
        assert!((r.scores[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.constant_columns, vec![2]);
        assert_eq!(r.scores[2], 0.0);
    }

    #[test]
    fn large_target_keeps_everything() {
        assert_eq!(sis_screen(&data(), 10).unwrap().kept, vec![0, 1, 2]);
        assert!(sis_screen(&data(), 0).is_err());
    }

    #[test]
    fn ties_prefer_lower_index() {
        assert_eq!(rank(&[0.5, 0.7, 0.5, 0.7]), vec![1, 3, 0, 2]);
    }
}
