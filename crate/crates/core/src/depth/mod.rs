//! Multivariate data depth against an empirical distribution.
//!
//! Three depths are provided: Mahalanobis, halfspace (Tukey) and projection
//! depth. Halfspace and projection depth are approximated over a set of
//! random unit directions, except that halfspace depth is computed exactly in
//! one and two dimensions. A [`DepthEvaluator`] fixes the direction set for a
//! cloud, so every query scored through it shares the same approximation.

mod planar;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky_ridged, column_means, covariance};
use crate::rng::{self, tag};
use crate::{Error, Result};

pub use planar::exact_halfspace_2d;

/// Default number of random projection directions.
pub const DEFAULT_DIRECTIONS: usize = 2000;

/// Samples from a distribution on `R^p`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(Error::InvalidInput(format!("point cloud needs at least 2 rows, got {}", points.nrows())));
        }
        if points.ncols() < 1 {
            return Err(Error::InvalidInput("point cloud needs at least one column".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("point cloud has non-finite entries".into()));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: bad.len() });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(rows.len(), p, &flat))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn into_points(self) -> DMatrix<f64> {
        self.points
    }

    pub fn mean(&self) -> DVector<f64> {
        column_means(&self.points)
    }

    /// The cloud `{A y + b}`.
    pub fn transformed(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        if a.ncols() != self.dim() || a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.ncols() });
        }
        let mut out = &self.points * a.transpose();
        for mut row in out.row_iter_mut() {
            row += b.transpose();
        }
        Self::new(out)
    }
}

/// Which depth function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepthKind {
    Mahalanobis,
    Halfspace { n_directions: usize },
    Projection { n_directions: usize },
}

impl DepthKind {
    pub fn halfspace() -> Self {
        DepthKind::Halfspace { n_directions: DEFAULT_DIRECTIONS }
    }

    pub fn projection() -> Self {
        DepthKind::Projection { n_directions: DEFAULT_DIRECTIONS }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DepthKind::Halfspace { n_directions } | DepthKind::Projection { n_directions } if n_directions == 0 => {
                Err(Error::InvalidInput("n_directions must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DepthKind::Mahalanobis => "mahalanobis",
            DepthKind::Halfspace { .. } => "halfspace",
            DepthKind::Projection { .. } => "projection",
        }
    }
}

impl std::fmt::Display for DepthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DepthKind::Mahalanobis => write!(f, "mahalanobis"),
            DepthKind::Halfspace { n_directions } => write!(f, "halfspace({n_directions})"),
            DepthKind::Projection { n_directions } => write!(f, "projection({n_directions})"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DepthOptions {
    /// Regularize a singular covariance for Mahalanobis depth instead of failing.
    pub allow_ridge: bool,
    /// Use the exact algorithm for halfspace depth when `p <= 2`.
    pub exact_low_dim: bool,
}

impl Default for DepthOptions {
    fn default() -> Self {
        Self { allow_ridge: true, exact_low_dim: true }
    }
}

/// Depth of a single point. Builds a throwaway evaluator; use
/// [`DepthEvaluator`] to score many points against one cloud.
pub fn depth(x: &[f64], cloud: &PointCloud, kind: DepthKind, seed: u64) -> Result<f64> {
    DepthEvaluator::new(cloud, kind, seed)?.depth(x)
}

/// Depth rules that act on linear projections `M x` of the query.
#[derive(Debug, Clone)]
enum Rule {
    /// `M` whitens the cloud; depth is `1 / (1 + |Mx - center|^2)`.
    Mahalanobis { center: Vec<f64> },
    /// Sorted projections of the cloud, one block of `len` per direction.
    Halfspace { sorted: Vec<f64>, len: usize },
    /// Median and MAD of the cloud along each retained direction.
    Projection { median: Vec<f64>, mad: Vec<f64> },
}

#[derive(Debug, Clone)]
enum Engine {
    Linear { map: DMatrix<f64>, rule: Rule },
    Planar { cloud: PointCloud },
}

/// A cloud prepared for repeated depth queries with a fixed direction set.
#[derive(Debug, Clone)]
pub struct DepthEvaluator {
    kind: DepthKind,
    dim: usize,
    engine: Engine,
    ridged: bool,
    skipped_directions: usize,
}

/// Queries prepared for an evaluator: the points and their projections.
#[derive(Debug, Clone)]
pub struct QueryBatch {
    points: DMatrix<f64>,
    /// Projections of the points (linear engines only). Column `r` holds
    /// point `r`, except for halfspace depth where column `d` holds
    /// direction `d` so each sorted direction is visited once per pass.
    projected: Option<DMatrix<f64>>,
}

impl QueryBatch {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }
}

impl DepthEvaluator {
    pub fn new(cloud: &PointCloud, kind: DepthKind, seed: u64) -> Result<Self> {
        Self::with_options(cloud, kind, seed, DepthOptions::default())
    }

    pub fn with_options(cloud: &PointCloud, kind: DepthKind, seed: u64, options: DepthOptions) -> Result<Self> {
        kind.validate()?;
        let dim = cloud.dim();
        let mut ridged = false;
        let mut skipped_directions = 0;
        let engine = match kind {
            DepthKind::Mahalanobis => {
                let cov = covariance(cloud.points());
                let (chol, r) = cholesky_ridged(&cov, options.allow_ridge, "cloud covariance")?;
                ridged = r;
                let l_inv = chol
                    .l()
                    .solve_lower_triangular(&DMatrix::identity(dim, dim))
                    .ok_or_else(|| Error::Singular("cloud covariance".into()))?;
                let center = (&l_inv * cloud.mean()).iter().copied().collect();
                Engine::Linear { map: l_inv, rule: Rule::Mahalanobis { center } }
            }
            DepthKind::Halfspace { n_directions } => {
                if dim == 2 && options.exact_low_dim {
                    Engine::Planar { cloud: cloud.clone() }
                } else {
                    // in one dimension the single direction is exact
                    let map = if dim == 1 {
                        DMatrix::from_element(1, 1, 1.0)
                    } else {
                        random_directions(n_directions, dim, seed)
                    };
                    let proj = &map * cloud.points().transpose();
                    let len = cloud.len();
                    let mut sorted = Vec::with_capacity(proj.len());
                    for d in 0..proj.nrows() {
                        let mut row: Vec<f64> = proj.row(d).iter().copied().collect();
                        row.sort_by(f64::total_cmp);
                        sorted.extend(row);
                    }
                    Engine::Linear { map, rule: Rule::Halfspace { sorted, len } }
                }
            }
            DepthKind::Projection { n_directions } => {
                let dirs = random_directions(n_directions, dim, seed);
                let proj = &dirs * cloud.points().transpose();
                let mut keep = Vec::new();
                let mut median = Vec::new();
                let mut mad = Vec::new();
                for d in 0..proj.nrows() {
                    let mut row: Vec<f64> = proj.row(d).iter().copied().collect();
                    let med = median_in_place(&mut row);
                    let mut dev: Vec<f64> = row.iter().map(|v| (v - med).abs()).collect();
                    let spread = median_in_place(&mut dev);
                    if spread > 0.0 && spread.is_finite() {
                        keep.push(d);
                        median.push(med);
                        mad.push(spread);
                    }
                }
                skipped_directions = n_directions - keep.len();
                if keep.is_empty() {
                    return Err(Error::Degenerate("zero MAD along every sampled direction".into()));
                }
                let map = dirs.select_rows(keep.iter());
                Engine::Linear { map, rule: Rule::Projection { median, mad } }
            }
        };
        Ok(Self { kind, dim, engine, ridged, skipped_directions })
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the Mahalanobis covariance had to be ridge-regularized.
    pub fn ridged(&self) -> bool {
        self.ridged
    }

    /// Projection directions dropped because the cloud had zero MAD along them.
    pub fn skipped_directions(&self) -> usize {
        self.skipped_directions
    }

    pub fn depth(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        match &self.engine {
            Engine::Planar { cloud } => planar::halfspace_depth(x, cloud),
            Engine::Linear { map, rule } => {
                let v = map * DVector::from_column_slice(x);
                Ok(rule.eval(v.as_slice()))
            }
        }
    }

    pub fn prepare(&self, points: &DMatrix<f64>) -> Result<QueryBatch> {
        if points.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: points.ncols() });
        }
        let projected = match &self.engine {
            Engine::Linear { map, rule: Rule::Halfspace { .. } } => Some(points * map.transpose()),
            Engine::Linear { map, .. } => Some(map * points.transpose()),
            Engine::Planar { .. } => None,
        };
        Ok(QueryBatch { points: points.clone(), projected })
    }

    /// Depth of every query point after setting the coordinates in `zeroed`
    /// to 0. The projections in `batch` are reused, so scoring many zero
    /// patterns against one batch costs one projection pass in total.
    pub fn batch_depths(&self, batch: &QueryBatch, zeroed: &[usize]) -> Result<Vec<f64>> {
        if let Some(&j) = zeroed.iter().find(|&&j| j >= self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, got: j + 1 });
        }
        match &self.engine {
            Engine::Planar { cloud } => (0..batch.len())
                .into_par_iter()
                .map(|r| {
                    let mut x: Vec<f64> = batch.points.row(r).iter().copied().collect();
                    for &j in zeroed {
                        x[j] = 0.0;
                    }
                    planar::halfspace_depth(&x, cloud)
                })
                .collect(),
            Engine::Linear { map, rule } => {
                let projected = batch
                    .projected
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("query batch was not projected".into()))?;
                if let Rule::Halfspace { sorted, len } = rule {
                    return Ok(halfspace_by_direction(map, sorted, *len, batch, projected, zeroed));
                }
                let out = (0..batch.len())
                    .into_par_iter()
                    .map_init(
                        || vec![0.0; map.nrows()],
                        |buf, r| {
                            buf.copy_from_slice(projected.column(r).as_slice());
                            for &j in zeroed {
                                let xj = batch.points[(r, j)];
                                if xj != 0.0 {
                                    for (b, m) in buf.iter_mut().zip(map.column(j).iter()) {
                                        *b -= xj * m;
                                    }
                                }
                            }
                            rule.eval(buf)
                        },
                    )
                    .collect();
                Ok(out)
            }
        }
    }
}

/// Halfspace depths of a batch, looping over directions in the outer loop.
fn halfspace_by_direction(
    map: &DMatrix<f64>,
    sorted: &[f64],
    len: usize,
    batch: &QueryBatch,
    projected: &DMatrix<f64>,
    zeroed: &[usize],
) -> Vec<f64> {
    let rows = batch.len();
    let chunk = rows.div_ceil(rayon::current_num_threads()).max(1);
    let starts: Vec<usize> = (0..rows).step_by(chunk).collect();
    let parts: Vec<Vec<f64>> = starts
        .into_par_iter()
        .map(|start| {
            let end = (start + chunk).min(rows);
            let mut best = vec![len; end - start];
            let mut vals = vec![0.0; end - start];
            for d in 0..map.nrows() {
                vals.copy_from_slice(&projected.column(d).as_slice()[start..end]);
                for &j in zeroed {
                    let m = map[(d, j)];
                    let col = batch.points.column(j);
                    for (v, x) in vals.iter_mut().zip(&col.as_slice()[start..end]) {
                        *v -= x * m;
                    }
                }
                let s = &sorted[d * len..(d + 1) * len];
                for (b, &x) in best.iter_mut().zip(&vals) {
                    let below = s.partition_point(|&y| y < x);
                    let mut at_most = below;
                    while at_most < len && s[at_most] <= x {
                        at_most += 1;
                    }
                    *b = (*b).min(len - below).min(at_most);
                }
            }
            best.into_iter().map(|b| b as f64 / len as f64).collect()
        })
        .collect();
    parts.concat()
}

impl Rule {
    fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Rule::Mahalanobis { center } => {
                let d2: f64 = v.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                1.0 / (1.0 + d2)
            }
            Rule::Halfspace { sorted, len } => {
                let mut best = *len;
                for (d, &x) in v.iter().enumerate() {
                    let s = &sorted[d * len..(d + 1) * len];
                    let below = s.partition_point(|&y| y < x);
                    let at_most = s.partition_point(|&y| y <= x);
                    best = best.min(len - below).min(at_most);
                    if best == 0 {
                        break;
                    }
                }
                best as f64 / *len as f64
            }
            Rule::Projection { median, mad } => {
                let outlying =
                    v.iter().zip(median.iter().zip(mad)).map(|(x, (m, s))| (x - m).abs() / s).fold(0.0_f64, f64::max);
                1.0 / (1.0 + outlying)
            }
        }
    }
}

/// `count` unit vectors drawn uniformly from the sphere, one per row.
pub fn random_directions(count: usize, dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::substream(seed, tag::DIRECTIONS, dim as u64);
    let mut out = DMatrix::zeros(count, dim);
    let mut d = 0;
    while d < count {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        for (k, a) in v.iter().enumerate() {
            out[(d, k)] = a / norm;
        }
        d += 1;
    }
    out
}

/// Median of a slice; reorders it.
pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}
