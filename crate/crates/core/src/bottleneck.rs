//! Exact bottleneck distance between finite persistence diagrams.
//!
//! The decision problem "is `d_inf(A, B) <= eps`?" is a perfect-matching test
//! on the bipartite graph
//!
//! ```text
//!   left  = A-points  + one diagonal slot per B-point
//!   right = B-points  + one diagonal slot per A-point
//! ```
//!
//! where `a_i` may take its own diagonal slot when `pers(a_i) <= eps`, `b_j`
//! may be covered by its diagonal slot when `pers(b_j) <= eps`, and diagonal
//! slots pair up for free. Diagonal-diagonal edges are only added where the
//! corresponding `a_i - b_j` edge exists; a perfect matching of the full graph
//! can always be rewritten into one that only uses those.
//!
//! The exact distance is found by binary search over the sorted candidate
//! values (pairwise L-infinity costs and point persistences).

use serde::Serialize;

use crate::diagram::{PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};
use crate::matching::{Adjacency, HopcroftKarp, NONE};

/// Absolute slack used when comparing a cost against a threshold.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Size cap (`|A| + |B|`) for the enumeration oracle.
pub const BRUTEFORCE_LIMIT: usize = 8;

/// A partial bijection; unmatched points go to their diagonal projections.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl Matching {
    /// Largest L-infinity displacement of the matching.
    pub fn cost(&self, a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
        let (a, b) = (a.points(), b.points());
        let pairs = self.pairs.iter().map(|&(i, j)| linf(&a[i], &b[j]));
        let da = self
            .unmatched_a
            .iter()
            .map(|&i| a[i].persistence_unchecked());
        let db = self
            .unmatched_b
            .iter()
            .map(|&j| b[j].persistence_unchecked());
        pairs.chain(da).chain(db).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BottleneckResult {
    pub distance: f64,
    pub matching: Matching,
}

/// L-infinity distance between two points; points of different homology
/// dimensions are never matched, so their distance is infinite.
#[inline]
pub fn linf(a: &PersistencePoint, b: &PersistencePoint) -> f64 {
    if a.dim != b.dim {
        return f64::INFINITY;
    }
    (a.birth - b.birth).abs().max((a.death - b.death).abs())
}

/// Decision version: a witness matching of cost at most `eps`, if one exists.
pub fn feasible(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    eps: f64,
) -> Result<Option<Matching>> {
    a.ensure_finite()?;
    b.ensure_finite()?;
    let mut solver = Solver::new(a.points(), b.points());
    Ok(solver.test(eps).then(|| solver.witness()))
}

/// Exact bottleneck distance together with an optimal matching.
pub fn bottleneck_distance(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
) -> Result<BottleneckResult> {
    a.ensure_finite()?;
    b.ensure_finite()?;
    Ok(solve(a.points(), b.points()))
}

/// Distance only; skips the finiteness check. Callers guarantee finite input.
pub(crate) fn bottleneck_value(a: &[PersistencePoint], b: &[PersistencePoint]) -> f64 {
    solve(a, b).distance
}

fn solve(a: &[PersistencePoint], b: &[PersistencePoint]) -> BottleneckResult {
    solve_within(a, b, None)
}

/// Distance only, searching first among candidates in `[lo, hi]`. The answer is
/// exact whatever the bracket: a bracket that misses it falls back to the full search.
pub(crate) fn bottleneck_value_within(
    a: &[PersistencePoint],
    b: &[PersistencePoint],
    lo: f64,
    hi: f64,
) -> f64 {
    solve_within(a, b, Some((lo, hi))).distance
}

fn solve_within(
    a: &[PersistencePoint],
    b: &[PersistencePoint],
    bracket: Option<(f64, f64)>,
) -> BottleneckResult {
    if a.is_empty() && b.is_empty() {
        return BottleneckResult {
            distance: 0.0,
            matching: Matching::default(),
        };
    }
    let mut solver = Solver::new(a, b);
    let (lo, hi) = bracket.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (lower, window) = solver.candidates(lo, hi);
    let found = solver.smallest_feasible(&window, lower);
    if found.is_none() {
        debug_assert!(bracket.is_some());
        let (_, all) = solver.candidates(f64::NEG_INFINITY, f64::INFINITY);
        // the largest candidate (everything to the diagonal) is always feasible
        let ok = solver.smallest_feasible(&all, lower).is_some();
        debug_assert!(ok);
    }
    let matching = solver.witness();
    let distance = solver.witness_cost(&matching);
    BottleneckResult { distance, matching }
}

struct Solver<'a> {
    a: &'a [PersistencePoint],
    b: &'a [PersistencePoint],
    pers_a: Vec<f64>,
    pers_b: Vec<f64>,
    /// Row-major `|A| x |B|` pairwise costs.
    cost: Vec<f64>,
    /// `A x B` edges of cost at most `sup_limit`, as CSR rows with their costs.
    sup_offsets: Vec<u32>,
    sup_targets: Vec<u32>,
    sup_costs: Vec<f64>,
    sup_limit: f64,
    counts: Vec<u32>,
    adj: Adjacency,
    hk: HopcroftKarp,
}

impl<'a> Solver<'a> {
    fn new(a: &'a [PersistencePoint], b: &'a [PersistencePoint]) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut cost = Vec::with_capacity(n * m);
        for p in a {
            cost.extend(b.iter().map(|q| linf(p, q)));
        }
        Self {
            a,
            b,
            pers_a: a
                .iter()
                .map(PersistencePoint::persistence_unchecked)
                .collect(),
            pers_b: b
                .iter()
                .map(PersistencePoint::persistence_unchecked)
                .collect(),
            cost,
            sup_offsets: Vec::new(),
            sup_targets: Vec::new(),
            sup_costs: Vec::new(),
            sup_limit: f64::NEG_INFINITY,
            counts: vec![0; m],
            adj: Adjacency::default(),
            hk: HopcroftKarp::new(n + m, n + m),
        }
    }

    /// The lower bound `max_p min(pers(p), nearest partner of p)` and the sorted
    /// distinct candidate values in `[max(lo, lower), min(hi, upper)]`, where
    /// `upper` is the all-to-diagonal cost. When `lo` exceeds `lower`, the largest
    /// candidate in `[lower, lo)` is included too.
    fn candidates(&self, lo: f64, hi: f64) -> (f64, Vec<f64>) {
        let (n, m) = (self.a.len(), self.b.len());
        let upper = self
            .pers_a
            .iter()
            .chain(&self.pers_b)
            .copied()
            .fold(0.0, f64::max);
        let hi = hi.min(upper);
        let mut col_min = self.pers_b.clone();
        let mut lower = 0.0f64;
        let mut below = f64::NEG_INFINITY;
        let mut c = Vec::new();
        let mut visit = |v: f64, c: &mut Vec<f64>| {
            if v >= lo && v <= hi {
                c.push(v);
            } else if v < lo && v > below {
                below = v;
            }
        };
        for v in std::iter::once(0.0)
            .chain(self.pers_a.iter().copied())
            .chain(self.pers_b.iter().copied())
        {
            visit(v, &mut c);
        }
        for i in 0..n {
            let row = &self.cost[i * m..(i + 1) * m];
            let mut row_min = self.pers_a[i];
            for (j, &v) in row.iter().enumerate() {
                row_min = row_min.min(v);
                col_min[j] = col_min[j].min(v);
                visit(v, &mut c);
            }
            lower = lower.max(row_min);
        }
        lower = col_min.iter().copied().fold(lower, f64::max);
        c.retain(|&v| v >= lower);
        if below >= lower {
            c.push(below);
        }
        c.sort_unstable_by(f64::total_cmp);
        c.dedup();
        (lower, c)
    }

    /// Smallest feasible entry of `c`, or `None` when the answer may lie outside
    /// it: the last entry fails, or the first passes without being the lower bound.
    /// Leaves the solver holding a witness for the returned value.
    fn smallest_feasible(&mut self, c: &[f64], lower: f64) -> Option<f64> {
        let last = *c.last()?;
        if !self.test(last) {
            return None;
        }
        let (mut lo, mut hi) = (0usize, c.len() - 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.test(c[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo == 0 && c[0] > lower {
            return None;
        }
        let ok = self.test(c[lo]);
        debug_assert!(ok);
        Some(c[lo])
    }

    fn edge_ok(&self, u: usize, v: usize, limit: f64) -> bool {
        let (n, m) = (self.a.len(), self.b.len());
        match (u < n, v < m) {
            (true, true) => self.cost[u * m + v] <= limit,
            (true, false) => v - m == u && self.pers_a[u] <= limit,
            (false, true) => u - n == v && self.pers_b[v] <= limit,
            (false, false) => self.cost[(v - m) * m + (u - n)] <= limit,
        }
    }

    fn rebuild_superset(&mut self, limit: f64) {
        let (n, m) = (self.a.len(), self.b.len());
        self.sup_offsets.clear();
        self.sup_targets.clear();
        self.sup_costs.clear();
        self.sup_offsets.push(0);
        for i in 0..n {
            let row = &self.cost[i * m..(i + 1) * m];
            for (j, &c) in row.iter().enumerate() {
                if c <= limit {
                    self.sup_targets.push(j as u32);
                    self.sup_costs.push(c);
                }
            }
            self.sup_offsets.push(self.sup_targets.len() as u32);
        }
        self.sup_limit = limit;
    }

    /// Augmented graph at `limit`: rows are `A` points then diagonal slots of `B`,
    /// columns are `B` points then diagonal slots of `A`.
    fn build(&mut self, limit: f64) {
        let (n, m) = (self.a.len(), self.b.len());
        if limit > self.sup_limit {
            self.rebuild_superset(limit);
        }
        let adj = &mut self.adj;
        adj.clear();
        self.counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            let range = self.sup_offsets[i] as usize..self.sup_offsets[i + 1] as usize;
            for (&j, &c) in self.sup_targets[range.clone()]
                .iter()
                .zip(&self.sup_costs[range])
            {
                if c <= limit {
                    adj.targets.push(j);
                    self.counts[j as usize] += 1;
                }
            }
            if self.pers_a[i] <= limit {
                adj.targets.push((m + i) as u32);
            }
            adj.finish_vertex();
        }
        // rows of the B-diagonal slots: own point first, then A slots in index order
        let base = adj.targets.len();
        let mut cursor = Vec::with_capacity(m);
        let mut end = base as u32;
        for j in 0..m {
            let own = u32::from(self.pers_b[j] <= limit);
            cursor.push(end + own);
            end += own + self.counts[j];
            adj.offsets.push(end);
        }
        adj.targets.resize(end as usize, 0);
        for (j, &c) in cursor.iter().enumerate() {
            if self.pers_b[j] <= limit {
                adj.targets[c as usize - 1] = j as u32;
            }
        }
        for i in 0..n {
            let range = adj.offsets[i] as usize..adj.offsets[i + 1] as usize;
            for k in range {
                let j = adj.targets[k] as usize;
                if j < m {
                    adj.targets[cursor[j] as usize] = (m + i) as u32;
                    cursor[j] += 1;
                }
            }
        }
    }

    /// Perfect-matching test at threshold `eps`; warm-starts from the last test.
    fn test(&mut self, eps: f64) -> bool {
        let limit = eps + FEASIBILITY_SLACK;
        self.build(limit);
        let mut hk = std::mem::replace(&mut self.hk, HopcroftKarp::new(0, 0));
        hk.retain(|u, v| self.edge_ok(u, v, limit));
        let size = hk.run(&self.adj);
        self.hk = hk;
        size == self.a.len() + self.b.len()
    }

    fn witness(&self) -> Matching {
        let (n, m) = (self.a.len(), self.b.len());
        let mut matching = Matching::default();
        for i in 0..n {
            let v = self.hk.match_l[i];
            debug_assert!(v != NONE);
            let v = v as usize;
            if v < m {
                matching.pairs.push((i, v));
            } else {
                matching.unmatched_a.push(i);
            }
        }
        for j in 0..m {
            let u = self.hk.match_r[j] as usize;
            if u >= n {
                matching.unmatched_b.push(j);
            }
        }
        matching
    }

    fn witness_cost(&self, matching: &Matching) -> f64 {
        let m = self.b.len();
        let pairs = matching.pairs.iter().map(|&(i, j)| self.cost[i * m + j]);
        let da = matching.unmatched_a.iter().map(|&i| self.pers_a[i]);
        let db = matching.unmatched_b.iter().map(|&j| self.pers_b[j]);
        pairs.chain(da).chain(db).fold(0.0, f64::max)
    }
}

/// Enumeration oracle: tries every partial matching explicitly.
pub fn bottleneck_bruteforce(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<f64> {
    let size = a.len() + b.len();
    if size > BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            what: "diagram pair",
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    a.ensure_finite()?;
    b.ensure_finite()?;

    fn recurse(
        a: &[PersistencePoint],
        b: &[PersistencePoint],
        i: usize,
        used: &mut [bool],
        acc: f64,
        best: &mut f64,
    ) {
        if i == a.len() {
            let rest = b
                .iter()
                .zip(used.iter())
                .filter(|(_, &u)| !u)
                .map(|(q, _)| (q.death - q.birth) / 2.0)
                .fold(acc, f64::max);
            *best = best.min(rest);
            return;
        }
        let diag = (a[i].death - a[i].birth) / 2.0;
        recurse(a, b, i + 1, used, acc.max(diag), best);
        for j in 0..b.len() {
            if !used[j] && a[i].dim == b[j].dim {
                used[j] = true;
                let c = (a[i].birth - b[j].birth)
                    .abs()
                    .max((a[i].death - b[j].death).abs());
                recurse(a, b, i + 1, used, acc.max(c), best);
                used[j] = false;
            }
        }
    }

    let mut best = f64::INFINITY;
    let mut used = vec![false; b.len()];
    recurse(a.points(), b.points(), 0, &mut used, 0.0, &mut best);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dgm(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(1, pairs)
    }

    #[test]
    fn linf_examples() {
        let p = |b, d| PersistencePoint::new(0, b, d);
        assert_eq!(linf(&p(0.0, 2.0), &p(0.0, 4.0)), 2.0);
        assert_eq!(linf(&p(1.0, 3.0), &p(1.0, 3.0)), 0.0);
        assert_eq!(linf(&p(0.0, 2.0), &p(1.0, 1.0)), 1.0);
        assert_eq!(
            linf(&p(0.0, 2.0), &PersistencePoint::new(1, 0.0, 2.0)),
            f64::INFINITY
        );
    }

    #[test]
    fn feasibility_examples() {
        let a = dgm(&[(0.0, 2.0), (1.0, 3.5)]);
        assert!(feasible(&a, &a, 0.0).unwrap().is_some());
        assert!(
            feasible(&dgm(&[(0.0, 2.0)]), &PersistenceDiagram::empty(), 0.5)
                .unwrap()
                .is_none()
        );
        // two options: pair them (cost 0.2) or both to the diagonal (cost 1.1)
        let w = feasible(&dgm(&[(0.0, 2.0)]), &dgm(&[(0.0, 2.2)]), 0.2)
            .unwrap()
            .expect("pairing costs 0.2");
        assert_eq!(w.pairs, vec![(0, 0)]);
        assert!(feasible(&dgm(&[(0.0, 2.0)]), &dgm(&[(0.0, 2.2)]), 0.19)
            .unwrap()
            .is_none());
    }

    #[test]
    fn distance_examples() {
        let a = dgm(&[(0.0, 2.0), (1.0, 5.0)]);
        assert_eq!(bottleneck_distance(&a, &a).unwrap().distance, 0.0);
        assert_eq!(
            bottleneck_distance(&dgm(&[(0.0, 2.0)]), &PersistenceDiagram::empty())
                .unwrap()
                .distance,
            1.0
        );
        // pairing costs 2, both-to-diagonal costs max(1, 2) = 2
        assert_eq!(
            bottleneck_distance(&dgm(&[(0.0, 2.0)]), &dgm(&[(0.0, 4.0)]))
                .unwrap()
                .distance,
            2.0
        );
    }

    #[test]
    fn bruteforce_examples() {
        let e = PersistenceDiagram::empty();
        assert_eq!(bottleneck_bruteforce(&e, &e).unwrap(), 0.0);
        assert_eq!(
            bottleneck_bruteforce(&dgm(&[(0.0, 2.0), (1.0, 5.0)]), &dgm(&[(0.0, 2.0)])).unwrap(),
            2.0
        );
        let big = dgm(&[(0.0, 1.0); 5]);
        assert!(matches!(
            bottleneck_bruteforce(&big, &big),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn dimensions_do_not_mix() {
        let a = PersistenceDiagram::new(vec![PersistencePoint::new(0, 0.0, 2.0)]);
        let b = PersistenceDiagram::new(vec![PersistencePoint::new(1, 0.0, 2.0)]);
        assert_eq!(bottleneck_distance(&a, &b).unwrap().distance, 1.0);
        assert_eq!(
            bottleneck_distance(&a.pooled(), &b.pooled())
                .unwrap()
                .distance,
            0.0
        );
    }

    #[test]
    fn rejects_essential_points() {
        let a = dgm(&[(0.0, f64::INFINITY)]);
        assert!(matches!(
            bottleneck_distance(&a, &a),
            Err(Error::UnboundedPoint { .. })
        ));
    }

    #[test]
    fn witness_accounts_for_every_point() {
        let a = dgm(&[(0.0, 2.0), (0.5, 0.7), (3.0, 8.0)]);
        let b = dgm(&[(0.1, 2.1), (2.5, 8.5)]);
        let r = bottleneck_distance(&a, &b).unwrap();
        let mut seen_a: Vec<usize> = r.matching.pairs.iter().map(|p| p.0).collect();
        seen_a.extend(&r.matching.unmatched_a);
        seen_a.sort_unstable();
        assert_eq!(seen_a, vec![0, 1, 2]);
        let mut seen_b: Vec<usize> = r.matching.pairs.iter().map(|p| p.1).collect();
        seen_b.extend(&r.matching.unmatched_b);
        seen_b.sort_unstable();
        assert_eq!(seen_b, vec![0, 1]);
        assert_eq!(r.matching.cost(&a, &b), r.distance);
        assert_eq!(r.distance, 0.5);
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<PersistencePoint>> {
        prop::collection::vec((0usize..2, 0.0f64..5.0, 0.0f64..3.0), 0..=max).prop_map(|v| {
            v.into_iter()
                .map(|(dim, b, l)| PersistencePoint::new(dim, b, b + l))
                .collect()
        })
    }

    fn arb_diagram(max: usize) -> impl Strategy<Value = PersistenceDiagram> {
        arb_points(max).prop_map(PersistenceDiagram::new)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn matches_enumeration(a in arb_diagram(4), b in arb_diagram(4)) {
            let r = bottleneck_distance(&a, &b).unwrap();
            prop_assert_eq!(r.distance, bottleneck_bruteforce(&a, &b).unwrap());
            prop_assert_eq!(r.matching.cost(&a, &b), r.distance);
        }

        #[test]
        fn metric_properties(a in arb_diagram(6), b in arb_diagram(6), c in arb_diagram(6)) {
            let d = |x: &PersistenceDiagram, y: &PersistenceDiagram| bottleneck_distance(x, y).unwrap().distance;
            prop_assert_eq!(d(&a, &a), 0.0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &b) <= d(&a, &c) + d(&c, &b) + 1e-9);
        }

        #[test]
        fn any_bracket_gives_the_exact_value(
            a in arb_points(12),
            b in arb_points(12),
            lo in -1.0f64..4.0,
            width in 0.0f64..2.0,
        ) {
            let exact = bottleneck_value(&a, &b);
            prop_assert_eq!(bottleneck_value_within(&a, &b, lo, lo + width), exact);
            prop_assert_eq!(bottleneck_value_within(&a, &b, exact, exact), exact);
        }
    }
}
