//! Finite metric spaces, circle sampling, edge-connectivity CDFs and brute-force
//! Gromov-Hausdorff distances on tiny spaces.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::table::read_numeric_table;

/// Largest side accepted by [`gromov_hausdorff_bruteforce`].
pub const GH_MAX_POINTS: usize = 4;
pub const DEFAULT_GH_STEPS: usize = 1000;

/// `n` points with a symmetric, zero-diagonal, non-negative distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    d: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Validates a square matrix. Symmetry is checked exactly.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            d.extend_from_slice(row);
        }
        let space = Self { n, d };
        for i in 0..n {
            if space.get(i, i) != 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "diagonal entry {i} is not zero"
                )));
            }
            for j in 0..n {
                let v = space.get(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} is not a finite non-negative number"
                    )));
                }
                if v != space.get(j, i) {
                    return Err(Error::AsymmetricMatrix { i, j });
                }
            }
        }
        Ok(space)
    }

    /// Builds the space from `f(i, j)` evaluated once per unordered pair.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::new(read_numeric_table(path)?).map_err(|e| match e {
            Error::InvalidMatrix(m) => Error::InvalidMatrix(format!("{}: {m}", path.display())),
            Error::AsymmetricMatrix { i, j } => {
                Error::InvalidMatrix(format!("{}: not symmetric at ({i}, {j})", path.display()))
            }
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.d
            .chunks(self.n.max(1))
            .map(<[f64]>::to_vec)
            .take(self.n)
            .collect()
    }

    pub fn max_distance(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// Distances of all unordered pairs `i < j`.
    pub fn pairwise(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// The metric `c * d`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidDilation(c));
        }
        Ok(Self {
            n: self.n,
            d: self.d.iter().map(|v| v * c).collect(),
        })
    }

    pub fn subspace(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }

    /// Errors on the first triple violating the triangle inequality by more than `tol`.
    pub fn check_triangle(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    if self.get(i, k) > self.get(i, j) + self.get(j, k) + tol {
                        return Err(Error::InvalidMatrix(format!(
                            "triangle inequality fails for ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `n` angles uniform on `[0, 1)`.
pub fn sample_angles(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Points `r e^{2 pi i theta}` for the given angles.
pub fn circle_points(r: f64, angles: &[f64]) -> Vec<Vec<f64>> {
    angles
        .iter()
        .map(|t| {
            let a = 2.0 * PI * t;
            vec![r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// `n` i.i.d. uniform points on the circle of radius `r` inside the unit disk.
pub fn sample_circle(r: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must lie in (0, 1), got {r}"
        )));
    }
    Ok(circle_points(r, &sample_angles(n, seed)))
}

/// Sorted pairwise distances normalised by their maximum, each with the
/// fraction of pairs at or below it.
pub fn edge_cdf(space: &FiniteMetricSpace) -> Result<Vec<(f64, f64)>> {
    if space.len() < 2 {
        return Err(Error::InvalidArgument(
            "edge CDF needs at least two points".into(),
        ));
    }
    let mut d = space.pairwise();
    d.sort_by(f64::total_cmp);
    let max = *d.last().unwrap();
    let total = d.len() as f64;
    let mut out = Vec::with_capacity(d.len());
    let mut k = 0;
    while k < d.len() {
        let mut end = k;
        while end < d.len() && d[end] == d[k] {
            end += 1;
        }
        let t = if max > 0.0 { d[k] / max } else { 1.0 };
        for _ in k..end {
            out.push((t, end as f64 / total));
        }
        k = end;
    }
    Ok(out)
}

/// Fraction of pairs whose normalised distance is at most `t`.
pub fn edge_fraction_at(cdf: &[(f64, f64)], t: f64) -> f64 {
    let idx = cdf.partition_point(|p| p.0 <= t);
    if idx == 0 {
        0.0
    } else {
        cdf[idx - 1].1
    }
}

/// Kolmogorov distance between an empirical step CDF and a continuous `f`.
pub fn cdf_sup_deviation(cdf: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut before = 0.0;
    for &(t, frac) in cdf {
        let ft = f(t);
        worst = worst.max((frac - ft).abs()).max((before - ft).abs());
        before = frac;
    }
    worst
}

/// CDF of the normalised Euclidean distance between two uniform points on a circle.
pub fn cdf_euclidean(t: f64) -> f64 {
    2.0 / PI * t.clamp(0.0, 1.0).asin()
}

/// CDF of the normalised Poincare distance between two uniform points on the
/// circle of Euclidean radius `r`.
pub fn cdf_poincare(t: f64, r: f64) -> f64 {
    let q = 1.0 / r - r;
    let m = poincare_circle_diameter(r);
    let mut arg = 0.5 * (t * m / 2.0).sinh() * q;
    if arg >= 1.0 - 1e-12 {
        // rounding near t = 1, where asin has unbounded slope
        arg = 1.0;
    }
    2.0 / PI * arg.clamp(-1.0, 1.0).asin()
}

/// Largest Poincare distance between two points of the circle of radius `r`.
pub fn poincare_circle_diameter(r: f64) -> f64 {
    2.0 * (2.0 / (1.0 / r - r)).asinh()
}

fn check_gh_size(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<()> {
    for s in [x, y] {
        if s.len() > GH_MAX_POINTS {
            return Err(Error::TooLarge {
                what: "metric space",
                size: s.len(),
                limit: GH_MAX_POINTS,
            });
        }
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "metric spaces must be nonempty".into(),
        ));
    }
    Ok(())
}

/// For every minimal correspondence, the `(d_X, d_Y)` pairs whose differences
/// define its distortion. A correspondence with a non-minimal subset never has
/// smaller distortion than that subset, so minimal ones suffice.
fn correspondence_terms(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (x.len(), y.len());
    let cells = nx * ny;
    let mut out = Vec::new();
    let mut pairs = Vec::with_capacity(cells);
    for mask in 1u32..(1u32 << cells) {
        let mut deg_x = [0u8; GH_MAX_POINTS];
        let mut deg_y = [0u8; GH_MAX_POINTS];
        pairs.clear();
        for c in 0..cells {
            if mask & (1 << c) != 0 {
                let (i, j) = (c / ny, c % ny);
                deg_x[i] += 1;
                deg_y[j] += 1;
                pairs.push((i, j));
            }
        }
        if deg_x[..nx].contains(&0) || deg_y[..ny].contains(&0) {
            continue;
        }
        if pairs.iter().any(|&(i, j)| deg_x[i] > 1 && deg_y[j] > 1) {
            continue;
        }
        let mut terms = Vec::with_capacity(pairs.len() * pairs.len() / 2);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            for &(i2, j2) in &pairs[k + 1..] {
                terms.push((x.get(i, i2), y.get(j, j2)));
            }
        }
        out.push(terms);
    }
    out
}

fn distortion(terms: &[(f64, f64)], c: f64) -> f64 {
    terms
        .iter()
        .map(|&(dx, dy)| (c * dx - dy).abs())
        .fold(0.0, f64::max)
}

/// Exact Gromov-Hausdorff distance by enumerating correspondences.
pub fn gromov_hausdorff_bruteforce(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64> {
    check_gh_size(x, y)?;
    let best = correspondence_terms(x, y)
        .iter()
        .map(|t| distortion(t, 1.0))
        .fold(f64::INFINITY, f64::min);
    Ok(best / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilatedGh {
    pub value: f64,
    pub c_star: f64,
}

/// `min_c d_GH(cX, Y)` over `steps + 1` uniform dilations in `[0, 2 max d_Y / max d_X]`.
pub fn di_gromov_hausdorff(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    steps: usize,
) -> Result<DilatedGh> {
    check_gh_size(x, y)?;
    if steps < 1 {
        return Err(Error::InvalidPartitions(steps));
    }
    let terms = correspondence_terms(x, y);
    let (mx, my) = (x.max_distance(), y.max_distance());
    if mx == 0.0 {
        let value = terms
            .iter()
            .map(|t| distortion(t, 0.0))
            .fold(f64::INFINITY, f64::min)
            / 2.0;
        return Ok(DilatedGh { value, c_star: 0.0 });
    }
    let hi = 2.0 * my / mx;
    let node = |i: usize| {
        if i == steps {
            hi
        } else {
            hi * i as f64 / steps as f64
        }
    };
    let mut best = DilatedGh {
        value: f64::INFINITY,
        c_star: 0.0,
    };
    for t in &terms {
        // distortion is convex in c, so the grid sequence is unimodal
        let (mut lo, mut up) = (0usize, steps);
        while lo < up {
            let mid = (lo + up) / 2;
            if distortion(t, node(mid + 1)) >= distortion(t, node(mid)) {
                up = mid;
            } else {
                lo = mid + 1;
            }
        }
        let v = distortion(t, node(lo)) / 2.0;
        let c = node(lo);
        if v < best.value || (v == best.value && c < best.c_star) {
            best = DilatedGh {
                value: v,
                c_star: c,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> FiniteMetricSpace {
        FiniteMetricSpace::from_fn(points.len(), |i, j| (points[i] - points[j]).abs())
    }

    #[test]
    fn validates_matrices() {
        assert!(FiniteMetricSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(matches!(
            FiniteMetricSpace::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]),
            Err(Error::AsymmetricMatrix { .. })
        ));
        assert!(FiniteMetricSpace::new(vec![vec![1.0]]).is_err());
        assert!(FiniteMetricSpace::new(vec![vec![0.0, 1.0]]).is_err());
        let bad = FiniteMetricSpace::new(vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(bad.check_triangle(1e-9).is_err());
        assert!(line(&[0.0, 1.0, 3.0]).check_triangle(1e-9).is_ok());
    }

    #[test]
    fn circle_samples() {
        let pts = sample_circle(0.7, 50, 3).unwrap();
        for p in &pts {
            assert!((p[0].hypot(p[1]) - 0.7).abs() < 1e-12);
        }
        assert_eq!(pts, sample_circle(0.7, 50, 3).unwrap());
        assert_ne!(pts, sample_circle(0.7, 50, 4).unwrap());
        assert!(sample_circle(1.0, 5, 0).is_err());
    }

    #[test]
    fn edge_cdf_endpoints() {
        let two = line(&[0.0, 2.0]);
        assert_eq!(edge_cdf(&two).unwrap(), vec![(1.0, 1.0)]);
        let c = edge_cdf(&line(&[0.0, 1.0, 3.0, 7.0])).unwrap();
        assert_eq!(*c.last().unwrap(), (1.0, 1.0));
        // ties share the cumulative fraction
        let sq = line(&[0.0, 1.0, 2.0]);
        assert_eq!(
            edge_cdf(&sq).unwrap(),
            vec![(0.5, 2.0 / 3.0), (0.5, 2.0 / 3.0), (1.0, 1.0)]
        );
        assert_eq!(edge_fraction_at(&edge_cdf(&sq).unwrap(), 0.4), 0.0);
    }

    #[test]
    fn closed_form_cdfs() {
        assert_eq!(cdf_euclidean(0.0), 0.0);
        assert!((cdf_euclidean(1.0) - 1.0).abs() < 1e-15);
        assert!((cdf_euclidean(0.5) - 1.0 / 3.0).abs() < 1e-15);
        for r in [0.1, 0.5, 0.9, 0.999] {
            assert!((cdf_poincare(1.0, r) - 1.0).abs() < 1e-9);
            assert_eq!(cdf_poincare(0.0, r), 0.0);
        }
        let vals: Vec<f64> = [0.5, 0.9, 0.99, 0.999]
            .iter()
            .map(|&r| cdf_poincare(0.9, r))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn poincare_diameter_matches_antipodal_distance() {
        let r: f64 = 0.6;
        let direct = (1.0 + 2.0 * (2.0 * r).powi(2) / (1.0 - r * r).powi(2)).acosh();
        assert!((poincare_circle_diameter(r) - direct).abs() < 1e-12);
    }

    #[test]
    fn gh_examples() {
        let x = line(&[0.0, 1.0, 3.0]);
        assert_eq!(gromov_hausdorff_bruteforce(&x, &x).unwrap(), 0.0);
        assert_eq!(
            gromov_hausdorff_bruteforce(&line(&[0.0, 1.0]), &line(&[0.0, 3.0])).unwrap(),
            1.0
        );
        assert_eq!(
            gromov_hausdorff_bruteforce(&line(&[0.0]), &line(&[5.0])).unwrap(),
            0.0
        );
        assert!(matches!(
            gromov_hausdorff_bruteforce(&line(&[0.0, 1.0, 2.0, 3.0, 4.0]), &x),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn gh_point_against_space_is_half_diameter() {
        let x = line(&[0.0, 1.0, 4.0]);
        assert_eq!(gromov_hausdorff_bruteforce(&x, &line(&[0.0])).unwrap(), 2.0);
    }

    #[test]
    fn minimal_correspondences_match_full_enumeration() {
        // full 2^(nx ny) enumeration, every surjective relation
        fn full(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
            let (nx, ny) = (x.len(), y.len());
            let mut best = f64::INFINITY;
            for mask in 1u32..(1 << (nx * ny)) {
                let pairs: Vec<(usize, usize)> = (0..nx * ny)
                    .filter(|c| mask & (1 << c) != 0)
                    .map(|c| (c / ny, c % ny))
                    .collect();
                let sx = (0..nx).all(|i| pairs.iter().any(|p| p.0 == i));
                let sy = (0..ny).all(|j| pairs.iter().any(|p| p.1 == j));
                if !(sx && sy) {
                    continue;
                }
                let mut dis: f64 = 0.0;
                for &(i, j) in &pairs {
                    for &(i2, j2) in &pairs {
                        dis = dis.max((x.get(i, i2) - y.get(j, j2)).abs());
                    }
                }
                best = best.min(dis);
            }
            best / 2.0
        }
        let x = line(&[0.0, 1.3, 2.0, 4.1]);
        let y = line(&[0.0, 0.4, 3.3]);
        assert_eq!(gromov_hausdorff_bruteforce(&x, &y).unwrap(), full(&x, &y));
        let z = line(&[0.2, 0.9, 1.0, 5.0]);
        assert_eq!(gromov_hausdorff_bruteforce(&x, &z).unwrap(), full(&x, &z));
    }

    #[test]
    fn dilated_gh_examples() {
        let x = line(&[0.0, 1.0, 3.0]);
        let r = di_gromov_hausdorff(&x, &x.scale(2.5).unwrap(), DEFAULT_GH_STEPS).unwrap();
        assert!(r.value < 1e-9, "{r:?}");
        assert!((r.c_star - 2.5).abs() < 1e-9);
        let r = di_gromov_hausdorff(&x, &line(&[1.0]), DEFAULT_GH_STEPS).unwrap();
        assert_eq!((r.value, r.c_star), (0.0, 0.0));
        let r = di_gromov_hausdorff(&line(&[1.0]), &x, DEFAULT_GH_STEPS).unwrap();
        assert_eq!(r.value, 1.5);
    }

    #[test]
    fn dilated_gh_grid_search_matches_scan() {
        let x = line(&[0.0, 1.0, 2.5, 2.7]);
        let y = line(&[0.0, 0.3, 2.0, 3.9]);
        let fast = di_gromov_hausdorff(&x, &y, 200).unwrap();
        let hi = 2.0 * y.max_distance() / x.max_distance();
        let scan = (0..=200)
            .map(|i| {
                let c = hi * i as f64 / 200.0;
                gromov_hausdorff_bruteforce(&x.scale(c).unwrap(), &y).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((fast.value - scan).abs() < 1e-12, "{fast:?} vs {scan}");
    }
}
