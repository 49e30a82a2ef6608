//! Dilation-invariant bottleneck dissimilarity.
//!
//! `dbar(A, B) = min_{c >= 0} Theta(c)` with `Theta(c) = d_inf(cA, B)`. The
//! minimiser is searched on a uniform grid over an interval that provably
//! contains it, which bounds the grid error by
//! `2 d0 bd(A) / (N pers(A))`, `d0 = min(d_inf(A, B), pers(B))`.
//!
//! `Theta` is `bd(A)`-Lipschitz, constant at `pers(B)` for small `c` and
//! linear with slope `pers(A)` for large `c` (see [`theta_structure`]).

use rayon::prelude::*;
use serde::Serialize;

use crate::bottleneck::{bottleneck_value, bottleneck_value_within};
use crate::diagram::{DiagramStats, PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};

pub const DEFAULT_PARTITIONS: usize = 100;

/// Interval guaranteed to contain an optimal dilation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchInterval {
    pub c_min: f64,
    pub c_max: f64,
    /// `min(d_inf(A, B), d_inf(D0, B))`, an upper bound on the dissimilarity.
    pub d0: f64,
}

impl SearchInterval {
    pub fn width(&self) -> f64 {
        self.c_max - self.c_min
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.c_min && c <= self.c_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationSearchResult {
    /// Smallest grid dilation attaining `value`.
    pub c_star: f64,
    /// Grid estimate of the dissimilarity; never below the true value.
    pub value: f64,
    /// Sampled `(t, Theta(t))`, sorted by `t`.
    pub curve: Vec<(f64, f64)>,
    pub interval: SearchInterval,
    pub partitions: usize,
    /// `2 d0 bd(A) / (N pers(A))`; 0 in the degenerate cases, which are exact.
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationOptions {
    pub partitions: usize,
    /// Re-grid `[t_{j-1}, t_{j+1}]` around the coarse argmin once.
    pub refine: bool,
}

impl Default for DilationOptions {
    fn default() -> Self {
        Self {
            partitions: DEFAULT_PARTITIONS,
            refine: false,
        }
    }
}

/// Breakpoints of `Theta`: constant at `pers(B)` on `[0, c_b]` and equal to
/// `c * pers(A)` on `[c_a, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaStructure {
    pub c_b: f64,
    pub c_a: f64,
}

struct Prepared {
    stats_a: DiagramStats,
    stats_b: DiagramStats,
    d_ab: f64,
}

impl Prepared {
    fn new(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<Self> {
        let stats_a = a.stats()?;
        let stats_b = b.stats()?;
        let d_ab = bottleneck_value(a.points(), b.points());
        Ok(Self {
            stats_a,
            stats_b,
            d_ab,
        })
    }

    fn d0(&self) -> f64 {
        self.d_ab.min(self.stats_b.pers)
    }

    /// Dilation attaining `d0`: 0 (everything of B to the diagonal) or 1.
    fn anchor(&self) -> f64 {
        if self.stats_b.pers <= self.d_ab {
            0.0
        } else {
            1.0
        }
    }

    fn base(&self) -> Result<SearchInterval> {
        let pa = self.stats_a.pers;
        if pa <= 0.0 {
            return Err(Error::DegenerateA);
        }
        let pb = self.stats_b.pers;
        let d0 = self.d0();
        Ok(SearchInterval {
            c_min: ((pb - d0) / pa).max(0.0),
            c_max: (pb + d0) / pa,
            d0,
        })
    }

    fn tightened(&self) -> Result<SearchInterval> {
        let base = self.base()?;
        let (Some(top_a), Some(top_b)) = (self.stats_a.top, self.stats_b.top) else {
            return Ok(base);
        };
        let d0 = base.d0;
        let pa = self.stats_a.pers;
        let bd_a = self.stats_a.bd;
        let bd_b = self.stats_b.bd;

        let mut c_min = base.c_min;
        if bd_a > 0.0 {
            // below this every candidate partner of b^(m) is at least d0 away
            c_min = c_min.max((top_b.death - d0) / bd_a);
        }
        let mut c_max = base.c_max;
        if top_a.death > 0.0 {
            // above this a^(m) costs at least d0 whether it is paired or sent
            // to the diagonal
            let right = ((bd_b + d0) / top_a.death).max(d0 / pa);
            c_max = c_max.min(right);
        }
        Ok(SearchInterval { c_min, c_max, d0 })
    }
}

/// Interval from the persistence bound alone.
pub fn base_interval(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<SearchInterval> {
    Prepared::new(a, b)?.base()
}

/// Sub-interval of [`base_interval`] sharpened with the largest-death point of
/// the characteristic diagrams. May be empty (`c_min > c_max`) when no
/// dilation beats `d0`.
pub fn tightened_interval(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
) -> Result<SearchInterval> {
    Prepared::new(a, b)?.tightened()
}

pub fn theta_structure(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<ThetaStructure> {
    let sa = a.stats()?;
    let sb = b.stats()?;
    let (Some(top_a), Some(top_b)) = (sa.top, sb.top) else {
        return Err(if sa.pers <= 0.0 {
            Error::DegenerateA
        } else {
            Error::InvalidArgument("second diagram is empty".into())
        });
    };
    if sa.pers <= 0.0 {
        return Err(Error::DegenerateA);
    }
    let ratio = sb.pers / sa.pers;
    Ok(ThetaStructure {
        c_b: ((top_b.birth + top_b.death) / (2.0 * sa.bd)).min(ratio),
        c_a: (2.0 * sb.bd / (top_a.birth + top_a.death)).max(ratio),
    })
}

/// `Theta(c) = d_inf(cA, B)`.
pub fn theta(a: &PersistenceDiagram, b: &PersistenceDiagram, c: f64) -> Result<f64> {
    a.ensure_finite()?;
    b.ensure_finite()?;
    if !(c >= 0.0) {
        return Err(Error::InvalidDilation(c));
    }
    Ok(theta_unchecked(a.points(), b.points(), c))
}

fn scaled(a: &[PersistencePoint], c: f64) -> Vec<PersistencePoint> {
    a.iter()
        .map(|p| PersistencePoint {
            dim: p.dim,
            birth: c * p.birth,
            death: c * p.death,
        })
        .collect()
}

fn theta_unchecked(a: &[PersistencePoint], b: &[PersistencePoint], c: f64) -> f64 {
    if c == 0.0 {
        return bottleneck_value(&[], b);
    }
    bottleneck_value(&scaled(a, c), b)
}

/// `Theta(c)`, searched first in `[lo, hi]`; exact regardless of the bracket.
fn theta_within(a: &[PersistencePoint], b: &[PersistencePoint], c: f64, lo: f64, hi: f64) -> f64 {
    if c == 0.0 {
        return bottleneck_value(&[], b);
    }
    bottleneck_value_within(&scaled(a, c), b, lo, hi)
}

/// Upper bound on `value - dbar(A, B)` for an `n`-step grid.
pub fn grid_error_bound(stats_a: &DiagramStats, d0: f64, partitions: usize) -> f64 {
    if stats_a.pers <= 0.0 {
        return 0.0;
    }
    2.0 * d0 * stats_a.bd / (partitions as f64 * stats_a.pers)
}

/// Grid nodes evaluated in one sequential run; each node brackets the next.
const CHAIN: usize = 16;

/// Evaluates `Theta` on `n + 1` uniformly spaced nodes of `[lo, hi]`.
fn sample(
    a: &[PersistencePoint],
    b: &[PersistencePoint],
    lo: f64,
    hi: f64,
    n: usize,
) -> Vec<(f64, f64)> {
    let step = (hi - lo) / n as f64;
    let nodes: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + step * i as f64 })
        .collect();
    let lip = a.iter().map(|p| p.death).fold(0.0, f64::max);
    nodes
        .par_chunks(CHAIN)
        .flat_map_iter(|chunk| {
            let mut prev: Option<(f64, f64)> = None;
            chunk
                .iter()
                .map(|&t| {
                    let v = match prev {
                        Some((s, v)) => {
                            let delta = (t - s).abs() * lip * (1.0 + 1e-9) + 1e-12;
                            theta_within(a, b, t, v - delta, v + delta)
                        }
                        None => theta_unchecked(a, b, t),
                    };
                    prev = Some((t, v));
                    (t, v)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// First (smallest `t`) minimiser of a curve sorted by `t`.
fn argmin(curve: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(_, v)) in curve.iter().enumerate() {
        if v < curve[best].1 {
            best = i;
        }
    }
    best
}

pub fn di_dissimilarity(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    partitions: usize,
) -> Result<DilationSearchResult> {
    di_dissimilarity_with(
        a,
        b,
        &DilationOptions {
            partitions,
            ..Default::default()
        },
    )
}

pub fn di_dissimilarity_with(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    opts: &DilationOptions,
) -> Result<DilationSearchResult> {
    let n = opts.partitions;
    if n < 1 {
        return Err(Error::InvalidPartitions(n));
    }
    let prep = Prepared::new(a, b)?;
    let degenerate = |value: f64| DilationSearchResult {
        c_star: 0.0,
        value,
        curve: vec![(0.0, value)],
        interval: SearchInterval {
            c_min: 0.0,
            c_max: 0.0,
            d0: value,
        },
        partitions: n,
        error_bound: 0.0,
    };
    if b.is_empty() {
        return Ok(degenerate(0.0));
    }
    if prep.stats_a.pers <= 0.0 {
        // A sits on the diagonal for every dilation.
        return Ok(degenerate(prep.stats_b.pers));
    }

    let interval = prep.tightened()?;
    let d0 = interval.d0;
    let error_bound = grid_error_bound(&prep.stats_a, d0, n);
    let anchor = (prep.anchor(), d0);

    if interval.c_min > interval.c_max {
        // Theta >= d0 everywhere, so d0 itself is optimal.
        return Ok(DilationSearchResult {
            c_star: anchor.0,
            value: d0,
            curve: vec![anchor],
            interval,
            partitions: n,
            error_bound,
        });
    }

    let (pa, pb) = (a.points(), b.points());
    let mut curve = sample(pa, pb, interval.c_min, interval.c_max, n);
    if opts.refine && interval.width() > 0.0 {
        let j = argmin(&curve);
        let lo = curve[j.saturating_sub(1)].0;
        let hi = curve[(j + 1).min(curve.len() - 1)].0;
        curve.extend(sample(pa, pb, lo, hi, n));
        curve.sort_by(|x, y| x.0.total_cmp(&y.0));
        curve.dedup_by(|x, y| x.0 == y.0);
    }
    if d0 < curve[argmin(&curve)].1 {
        let pos = curve.partition_point(|p| p.0 < anchor.0);
        curve.insert(pos, anchor);
    }
    let best = argmin(&curve);
    Ok(DilationSearchResult {
        c_star: curve[best].0,
        value: curve[best].1,
        curve,
        interval,
        partitions: n,
        error_bound,
    })
}

/// Mean of the two directed dissimilarities.
pub fn di_symmetrized(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    partitions: usize,
) -> Result<f64> {
    let ab = di_dissimilarity(a, b, partitions)?.value;
    let ba = di_dissimilarity(b, a, partitions)?.value;
    Ok((ab + ba) / 2.0)
}

/// Dense reference minimisation of `Theta` over `[lo, hi]`.
pub fn fine_grid_minimum(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<(f64, f64)> {
    a.ensure_finite()?;
    b.ensure_finite()?;
    if n < 1 {
        return Err(Error::InvalidPartitions(n));
    }
    let curve = sample(a.points(), b.points(), lo, hi, n);
    let best = argmin(&curve);
    Ok(curve[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dgm(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(1, pairs)
    }

    #[test]
    fn base_interval_examples() {
        let i = base_interval(&dgm(&[(0.0, 2.0)]), &dgm(&[(0.0, 4.0)])).unwrap();
        assert_eq!((i.c_min, i.c_max, i.d0), (0.0, 4.0, 2.0));

        let a = dgm(&[(0.0, 2.0), (1.0, 1.5)]);
        let i = base_interval(&a, &a).unwrap();
        assert_eq!((i.c_min, i.c_max, i.d0), (1.0, 1.0, 0.0));

        let i = base_interval(&dgm(&[(0.0, 2.0)]), &PersistenceDiagram::empty()).unwrap();
        assert_eq!((i.c_min, i.c_max, i.d0), (0.0, 0.0, 0.0));

        assert!(matches!(
            base_interval(&PersistenceDiagram::empty(), &dgm(&[(0.0, 1.0)])),
            Err(Error::DegenerateA)
        ));
    }

    #[test]
    fn tightened_interval_example() {
        let i = tightened_interval(&dgm(&[(0.0, 2.0)]), &dgm(&[(0.0, 4.0)])).unwrap();
        assert_eq!((i.c_min, i.c_max), (1.0, 3.0));
    }

    #[test]
    fn right_end_keeps_minimiser_when_top_point_can_vanish() {
        // a^(m) = (9.5, 10.5) is far from B but cheap to send to the diagonal;
        // the optimum pairs (0, 1) with (0, 4) at c = 8/3.
        let a = dgm(&[(0.0, 1.0), (9.5, 10.5)]);
        let b = dgm(&[(0.0, 4.0)]);
        let i = tightened_interval(&a, &b).unwrap();
        assert!(i.contains(8.0 / 3.0), "{i:?}");
        let r = di_dissimilarity(&a, &b, 1000).unwrap();
        assert!((r.value - 4.0 / 3.0).abs() <= r.error_bound, "{r:?}");
    }

    #[test]
    fn empty_interval_falls_back_to_d0() {
        // nothing in A can reach (10, 12): the best is to shrink A away.
        let a = dgm(&[(0.0, 1.0)]);
        let b = dgm(&[(10.0, 12.0)]);
        let i = tightened_interval(&a, &b).unwrap();
        assert!(i.c_min > i.c_max);
        let r = di_dissimilarity(&a, &b, 100).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.c_star, 0.0);
    }

    #[test]
    fn proportional_diagrams() {
        let a = dgm(&[(0.0, 2.0), (1.0, 4.0), (0.5, 0.75)]);
        let b = a.scale(3.0).unwrap();
        let r = di_dissimilarity(&a, &b, 100).unwrap();
        assert!(r.value <= r.error_bound);
        assert!((r.c_star - 3.0).abs() <= r.interval.width() / 100.0 + 1e-12);
    }

    #[test]
    fn degenerate_cases() {
        let b = dgm(&[(0.0, 2.0)]);
        let r = di_dissimilarity(&PersistenceDiagram::empty(), &b, 100).unwrap();
        assert_eq!((r.value, r.c_star), (1.0, 0.0));
        let r = di_dissimilarity(&b, &PersistenceDiagram::empty(), 100).unwrap();
        assert_eq!((r.value, r.c_star), (0.0, 0.0));
        // only diagonal points: same as the empty diagram
        let r = di_dissimilarity(&dgm(&[(1.0, 1.0)]), &b, 100).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(matches!(
            di_dissimilarity(&b, &b, 0),
            Err(Error::InvalidPartitions(0))
        ));
    }

    #[test]
    fn symmetrized_examples() {
        let a = dgm(&[(0.0, 2.0), (1.0, 3.0)]);
        assert_eq!(di_symmetrized(&a, &a, 100).unwrap(), 0.0);
        assert_eq!(
            di_symmetrized(&PersistenceDiagram::empty(), &dgm(&[(0.0, 2.0)]), 100).unwrap(),
            0.5
        );
        let b = dgm(&[(0.5, 1.0), (2.0, 7.0)]);
        assert_eq!(
            di_symmetrized(&a, &b, 50).unwrap(),
            di_symmetrized(&b, &a, 50).unwrap()
        );
    }

    #[test]
    fn refine_never_worse() {
        let a = dgm(&[(0.0, 2.0), (1.0, 4.0), (0.3, 1.9)]);
        let b = dgm(&[(0.2, 2.9), (1.7, 5.5)]);
        let coarse = di_dissimilarity(&a, &b, 10).unwrap();
        let fine = di_dissimilarity_with(
            &a,
            &b,
            &DilationOptions {
                partitions: 10,
                refine: true,
            },
        )
        .unwrap();
        assert!(fine.value <= coarse.value);
        assert!(fine.curve.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn curve_is_sorted_and_value_is_its_minimum() {
        let a = dgm(&[(0.0, 2.0), (1.0, 4.0)]);
        let b = dgm(&[(0.4, 3.0), (2.0, 2.5)]);
        let r = di_dissimilarity(&a, &b, 40).unwrap();
        assert!(r.curve.windows(2).all(|w| w[0].0 <= w[1].0));
        let min = r.curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(min, r.value);
        let first = r.curve.iter().find(|p| p.1 == min).unwrap();
        assert_eq!(first.0, r.c_star);
    }

    fn arb_diagram(max: usize) -> impl Strategy<Value = PersistenceDiagram> {
        prop::collection::vec((0.0f64..5.0, 0.01f64..5.0), 1..=max)
            .prop_map(|v| v.into_iter().map(|(b, l)| (b, b + l)).collect::<Vec<_>>())
            .prop_map(|v| dgm(&v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tightened_within_base(a in arb_diagram(4), b in arb_diagram(4)) {
            let base = base_interval(&a, &b).unwrap();
            let t = tightened_interval(&a, &b).unwrap();
            prop_assert!(t.c_min >= base.c_min && t.c_max <= base.c_max);
        }

        #[test]
        fn bounded_by_d0(a in arb_diagram(4), b in arb_diagram(4)) {
            let r = di_dissimilarity(&a, &b, 20).unwrap();
            prop_assert!(r.value >= 0.0);
            prop_assert!(r.value <= r.interval.d0 + 1e-12);
        }

        #[test]
        fn within_bound_of_dense_grid(a in arb_diagram(3), b in arb_diagram(3)) {
            let r = di_dissimilarity(&a, &b, 20).unwrap();
            let base = base_interval(&a, &b).unwrap();
            let (_, best) = fine_grid_minimum(&a, &b, base.c_min, base.c_max, 4000).unwrap();
            prop_assert!(r.value - best.min(base.d0) <= r.error_bound + 1e-12);
        }

        #[test]
        fn lipschitz_between_nodes(a in arb_diagram(4), b in arb_diagram(4)) {
            let bd = a.stats().unwrap().bd;
            let r = di_dissimilarity(&a, &b, 30).unwrap();
            for w in r.curve.windows(2) {
                prop_assert!((w[1].1 - w[0].1).abs() <= (w[1].0 - w[0].0) * bd + 1e-9);
            }
        }
    }
}
