use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// Relative ridge used when a symmetric matrix is numerically singular.
pub(crate) const RIDGE_EPS: f64 = 1e-8;

/// Cholesky factor of a symmetric positive semi-definite matrix. When
/// `allow_ridge` is set and the plain factorization fails or is numerically
/// rank deficient, `RIDGE_EPS * trace / p * I` is added first (an absolute
/// `RIDGE_EPS` when the trace vanishes). The flag reports whether that happened.
pub(crate) fn cholesky_ridged(m: &DMatrix<f64>, allow_ridge: bool, what: &str) -> Result<(Cholesky<f64, Dyn>, bool)> {
    let p = m.nrows();
    if let Some(ch) = m.clone().cholesky() {
        if well_conditioned(&ch, m) {
            return Ok((ch, false));
        }
    }
    if !allow_ridge {
        return Err(Error::Singular(what.to_string()));
    }
    let trace = m.trace();
    let scale = if trace > 0.0 && trace.is_finite() { RIDGE_EPS * trace / p as f64 } else { RIDGE_EPS };
    let mut ridged = m.clone();
    for i in 0..p {
        ridged[(i, i)] += scale;
    }
    ridged.cholesky().map(|ch| (ch, true)).ok_or_else(|| Error::Singular(what.to_string()))
}

fn well_conditioned(ch: &Cholesky<f64, Dyn>, m: &DMatrix<f64>) -> bool {
    let l = ch.l_dirty();
    let max_diag = (0..m.nrows()).map(|i| m[(i, i)]).fold(0.0_f64, f64::max);
    if max_diag <= 0.0 {
        return false;
    }
    // squared pivots relative to the largest diagonal bound the reciprocal condition
    (0..m.nrows()).all(|i| {
        let d = l[(i, i)];
        d.is_finite() && d * d > 1e-13 * max_diag
    })
}

pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let r = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / r))
}

/// Sample covariance with divisor `rows - 1`.
pub(crate) fn covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = column_means(m);
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = (m.nrows().max(2) - 1) as f64;
    (centered.transpose() * &centered) / denom
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn compensated_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_only_when_needed() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (_, ridged) = cholesky_ridged(&m, false, "m").unwrap();
        assert!(!ridged);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_ridged(&s, false, "s").is_err());
        let (_, ridged) = cholesky_ridged(&s, true, "s").unwrap();
        assert!(ridged);
        let (_, ridged) = cholesky_ridged(&DMatrix::zeros(3, 3), true, "z").unwrap();
        assert!(ridged);
    }

    #[test]
    fn covariance_matches_hand_computation() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 9.0]);
        let c = covariance(&m);
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((c[(0, 1)] - 3.5).abs() < 1e-12);
        assert!((c[(1, 1)] - 13.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }
}
