//! Vietoris-Rips persistent homology for point clouds and distance matrices.

mod cohomology;
mod filtration;
mod homology;

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

pub use cohomology::{enclosing_radius, vr_persistence};
pub use filtration::{vr_filtration, Filtration, Simplex, VrOptions, DEFAULT_SIMPLEX_CAP, MAX_DIM};
pub use homology::persistence;

use crate::error::{Error, Result};
use crate::metric_spaces::FiniteMetricSpace;
use crate::table::read_numeric_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    /// `1 - cos(x, y)`.
    CosineDissimilarity,
    /// Hyperbolic distance in the open unit ball.
    Poincare,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "cosine" | "cosine-dissimilarity" => Ok(Metric::CosineDissimilarity),
            "poincare" | "hyperbolic" => Ok(Metric::Poincare),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric '{other}' (expected euclidean, cosine-dissimilarity or poincare)"
            ))),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn poincare_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (dot(a, a), dot(b, b));
    (1.0 + 2.0 * sq_dist(a, b) / ((1.0 - na) * (1.0 - nb))).acosh()
}

/// Pairwise distances of a point cloud.
pub fn distance_matrix(points: &[Vec<f64>], metric: Metric) -> Result<FiniteMetricSpace> {
    if let Some(first) = points.first() {
        for (index, p) in points.iter().enumerate() {
            if p.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: p.len(),
                    index,
                });
            }
        }
    }
    let norms: Vec<f64> = points.iter().map(|p| dot(p, p).sqrt()).collect();
    match metric {
        Metric::Poincare => {
            if let Some((index, &norm)) = norms.iter().enumerate().find(|(_, &n)| !(n < 1.0)) {
                return Err(Error::OutsideBall { index, norm });
            }
        }
        Metric::CosineDissimilarity => {
            if let Some(index) = norms.iter().position(|&n| n == 0.0) {
                return Err(Error::ZeroVector { index });
            }
        }
        Metric::Euclidean => {}
    }
    Ok(FiniteMetricSpace::from_fn(points.len(), |i, j| {
        let (a, b) = (&points[i], &points[j]);
        match metric {
            Metric::Euclidean => sq_dist(a, b).sqrt(),
            Metric::CosineDissimilarity => (1.0 - dot(a, b) / (norms[i] * norms[j])).max(0.0),
            Metric::Poincare => poincare_distance(a, b),
        }
    }))
}

/// Point cloud CSV: one point per row, all rows of equal length.
pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let rows = read_numeric_table(path)?;
    if let Some(first) = rows.first() {
        if let Some(index) = rows.iter().position(|r| r.len() != first.len()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: index + 1,
                message: format!(
                    "expected {} coordinates, found {}",
                    first.len(),
                    rows[index].len()
                ),
            });
        }
    }
    Ok(rows)
}

/// Combinatorial number system: sorted `v_0 < ... < v_k` maps to
/// `sum_i C(v_i, i + 1)`, a bijection onto `0..C(n, k + 1)`.
pub(crate) struct Binomial {
    table: Vec<Vec<u64>>,
}

impl Binomial {
    pub fn new(n: usize, k_max: usize) -> Self {
        let mut table = vec![vec![0u64; k_max + 1]; n + 1];
        for row in table.iter_mut() {
            row[0] = 1;
        }
        for v in 1..=n {
            for k in 1..=k_max {
                table[v][k] = table[v - 1][k - 1].saturating_add(table[v - 1][k]);
            }
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, v: usize, k: usize) -> u64 {
        self.table[v][k]
    }

    #[inline]
    pub fn key(&self, sorted: &[u32]) -> u64 {
        sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| self.get(v as usize, i + 1))
            .sum()
    }

    /// Inverse of [`Binomial::key`] for `len` vertices.
    pub fn decode(&self, mut key: u64, len: usize, out: &mut [u32]) {
        let mut hi = self.table.len() - 1;
        for i in (0..len).rev() {
            // largest v with C(v, i + 1) <= key
            let (mut lo, mut up) = (i, hi);
            while lo < up {
                let mid = (lo + up).div_ceil(2);
                if self.get(mid, i + 1) <= key {
                    lo = mid;
                } else {
                    up = mid - 1;
                }
            }
            out[i] = lo as u32;
            key -= self.get(lo, i + 1);
            hi = lo.saturating_sub(1);
        }
    }
}
