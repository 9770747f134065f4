//! Exact halfspace depth in the plane.
//!
//! The depth of `x` is `n0 + m - k` over `R`, where `n0` cloud points
//! coincide with `x`, `m` do not, and `k` is the largest number of the
//! remaining points inside one open half-plane bounded by a line through
//! `x`. The maximum is found by sweeping the points in angular order.

use super::PointCloud;
use crate::{Error, Result};

/// Exact Tukey depth of `x` with respect to a planar cloud.
pub fn exact_halfspace_2d(x: &[f64], cloud: &PointCloud) -> Result<f64> {
    if cloud.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: cloud.dim() });
    }
    halfspace_depth(x, cloud)
}

pub(super) fn halfspace_depth(x: &[f64], cloud: &PointCloud) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
    }
    let total = cloud.len();
    let mut coincident = 0usize;
    let mut rays: Vec<(f64, [f64; 2])> = Vec::with_capacity(total);
    for row in cloud.points().row_iter() {
        let v = [row[0] - x[0], row[1] - x[1]];
        if v[0] == 0.0 && v[1] == 0.0 {
            coincident += 1;
        } else {
            rays.push((v[1].atan2(v[0]), v));
        }
    }
    let m = rays.len();
    if m == 0 {
        return Ok(1.0);
    }
    rays.sort_by(|a, b| a.0.total_cmp(&b.0));

    // `j` in angular order from `i` lies in [angle_i, angle_i + pi) iff it is
    // counter-clockwise of `i`, or on the same ray.
    let ahead = |a: &[f64; 2], b: &[f64; 2]| {
        let cross = a[0] * b[1] - a[1] * b[0];
        cross > 0.0 || (cross == 0.0 && a[0] * b[0] + a[1] * b[1] > 0.0)
    };
    let mut best_open = 0usize;
    let mut end = 0usize; // exclusive, in the doubled index space
    for i in 0..m {
        if end < i + 1 {
            end = i + 1;
        }
        while end < i + m && ahead(&rays[i].1, &rays[end % m].1) {
            end += 1;
        }
        best_open = best_open.max(end - i);
    }
    let closed_min = coincident + m - best_open;
    Ok(closed_min as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Brute-force oracle: scan many directions, including rotations just
    /// off every critical normal.
    fn brute(x: &[f64; 2], pts: &[[f64; 2]]) -> f64 {
        let mut angles = Vec::new();
        for p in pts {
            let a = (p[1] - x[1]).atan2(p[0] - x[0]);
            for base in [a + std::f64::consts::FRAC_PI_2, a - std::f64::consts::FRAC_PI_2] {
                for eps in [-1e-7, 0.0, 1e-7] {
                    angles.push(base + eps);
                }
            }
        }
        for k in 0..3600 {
            angles.push(k as f64 * std::f64::consts::PI / 1800.0);
        }
        let mut best = pts.len();
        for t in angles {
            let u = [t.cos(), t.sin()];
            let c = pts.iter().filter(|p| u[0] * (p[0] - x[0]) + u[1] * (p[1] - x[1]) >= -1e-12).count();
            best = best.min(c);
        }
        best as f64 / pts.len() as f64
    }

    #[test]
    fn outside_hull_is_zero() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert_eq!(exact_halfspace_2d(&[3.0, 3.0], &cloud(&pts)).unwrap(), 0.0);
    }

    #[test]
    fn cloud_point_has_at_least_one_over_r() {
        let pts = [[0.0, 0.0], [2.0, 0.3], [0.4, 1.9], [-1.7, 0.8], [-0.2, -2.1]];
        let c = cloud(&pts);
        for p in &pts {
            assert!(exact_halfspace_2d(p, &c).unwrap() >= 0.2);
        }
    }

    #[test]
    fn diamond_center() {
        let pts = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        assert_eq!(exact_halfspace_2d(&[0.0, 0.0], &cloud(&pts)).unwrap(), 0.5);
    }

    #[test]
    fn matches_brute_force_on_pseudo_random_clouds() {
        let mut s = 12345u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..50 {
            let pts: Vec<[f64; 2]> = (0..15).map(|_| [next(), next()]).collect();
            let x = [next() * 0.5, next() * 0.5];
            let exact = exact_halfspace_2d(&x, &cloud(&pts)).unwrap();
            assert_eq!(exact, brute(&x, &pts));
        }
    }

    #[test]
    fn rejects_non_planar() {
        let c = PointCloud::from_rows(&[vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]]).unwrap();
        assert!(exact_halfspace_2d(&[0.0, 0.0, 0.0], &c).is_err());
    }
}
