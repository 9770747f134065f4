#![allow(dead_code)]

use esubset::depth::PointCloud;
use esubset::model::Dataset;
use esubset::rng::{substream, StreamRng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> StreamRng {
    substream(seed, 1000, 0)
}

pub fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut StreamRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn gaussian_cloud(rows: usize, dim: usize, seed: u64) -> PointCloud {
    PointCloud::new(gaussian_matrix(rows, dim, &mut rng(seed))).unwrap()
}

/// Cloud made of each point and its reflection through `center`.
pub fn symmetric_cloud(half: usize, dim: usize, center: &[f64], seed: u64) -> PointCloud {
    let base = gaussian_matrix(half, dim, &mut rng(seed));
    let mut pts = DMatrix::zeros(2 * half, dim);
    for i in 0..half {
        for j in 0..dim {
            pts[(i, j)] = center[j] + base[(i, j)];
            pts[(half + i, j)] = center[j] - base[(i, j)];
        }
    }
    PointCloud::new(pts).unwrap()
}

/// `y = X beta + sigma e` with i.i.d. standard normal X.
pub fn linear_data(n: usize, beta: &[f64], sigma: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let x = gaussian_matrix(n, beta.len(), &mut r);
    let mut y = &x * DVector::from_column_slice(beta);
    for v in y.iter_mut() {
        *v += sigma * normal(&mut r);
    }
    Dataset::unnamed(y, x).unwrap()
}
