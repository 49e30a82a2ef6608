//! 2-Wasserstein distance between diagrams and their Frechet mean.
//!
//! Ground cost is squared Euclidean distance in the plane; a point left
//! unmatched pays its squared distance to the orthogonal projection on the
//! diagonal, `(death - birth)^2 / 2`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assignment;
use crate::diagram::{EssentialPolicy, PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};
use crate::metric_spaces::FiniteMetricSpace;
use crate::vr::{vr_persistence, VrOptions};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WassersteinMatching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
    /// Total squared cost.
    pub cost: f64,
}

pub fn sq_dist(a: &PersistencePoint, b: &PersistencePoint) -> f64 {
    let (db, dd) = (a.birth - b.birth, a.death - b.death);
    db * db + dd * dd
}

/// Squared distance to the diagonal projection `((b + d) / 2, (b + d) / 2)`.
pub fn diag_sq(p: &PersistencePoint) -> f64 {
    let l = p.death - p.birth;
    l * l / 2.0
}

/// Optimal matching between finite diagrams, solved per homology dimension.
pub fn wasserstein_matching(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
) -> Result<WassersteinMatching> {
    a.ensure_finite()?;
    b.ensure_finite()?;
    Ok(matching_unchecked(a.points(), b.points()))
}

fn matching_unchecked(a: &[PersistencePoint], b: &[PersistencePoint]) -> WassersteinMatching {
    let mut partner_a = vec![None; a.len()];
    let mut dims: Vec<usize> = a.iter().chain(b).map(|p| p.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    for dim in dims {
        let ia: Vec<usize> = (0..a.len()).filter(|&i| a[i].dim == dim).collect();
        let ib: Vec<usize> = (0..b.len()).filter(|&j| b[j].dim == dim).collect();
        let (n, m) = (ia.len(), ib.len());
        let size = n + m;
        // rows: A points then B diagonal slots; columns: B points then A diagonal slots
        let mut cost = vec![0.0; size * size];
        for r in 0..size {
            for c in 0..size {
                cost[r * size + c] = match (r < n, c < m) {
                    (true, true) => sq_dist(&a[ia[r]], &b[ib[c]]),
                    (true, false) => diag_sq(&a[ia[r]]),
                    (false, true) => diag_sq(&b[ib[c]]),
                    (false, false) => 0.0,
                };
            }
        }
        let (assign, _) = assignment::solve(size, &cost);
        for r in 0..n {
            if assign[r] < m {
                partner_a[ia[r]] = Some(ib[assign[r]]);
            }
        }
    }
    let mut matched_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    let mut unmatched_a = Vec::new();
    let mut cost = 0.0;
    for (i, p) in partner_a.iter().enumerate() {
        match *p {
            Some(j) => {
                matched_b[j] = true;
                pairs.push((i, j));
                cost += sq_dist(&a[i], &b[j]);
            }
            None => {
                unmatched_a.push(i);
                cost += diag_sq(&a[i]);
            }
        }
    }
    let unmatched_b: Vec<usize> = (0..b.len()).filter(|&j| !matched_b[j]).collect();
    for &j in &unmatched_b {
        cost += diag_sq(&b[j]);
    }
    WassersteinMatching {
        pairs,
        unmatched_a,
        unmatched_b,
        cost,
    }
}

pub fn wasserstein2(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<f64> {
    Ok(wasserstein_matching(a, b)?.cost.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrechetResult {
    pub mean: PersistenceDiagram,
    /// `F(Z_k) = (1/B) sum_i d_2(Z_k, D_i)^2` after every iteration, starting with `Z_0`.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Frechet functional `(1/B) sum_i d_2(Z, D_i)^2`.
pub fn frechet_functional(z: &PersistenceDiagram, diagrams: &[PersistenceDiagram]) -> Result<f64> {
    z.ensure_finite()?;
    let mut total = 0.0;
    for d in diagrams {
        d.ensure_finite()?;
        total += matching_unchecked(z.points(), d.points()).cost;
    }
    Ok(total / diagrams.len() as f64)
}

fn functional(
    z: &[PersistencePoint],
    diagrams: &[PersistenceDiagram],
) -> (f64, Vec<WassersteinMatching>) {
    let matchings: Vec<WassersteinMatching> = diagrams
        .par_iter()
        .map(|d| matching_unchecked(z, d.points()))
        .collect();
    let f = matchings.iter().map(|m| m.cost).sum::<f64>() / diagrams.len() as f64;
    (f, matchings)
}

pub fn frechet_mean(diagrams: &[PersistenceDiagram]) -> Result<PersistenceDiagram> {
    Ok(frechet_mean_with(diagrams, &FrechetOptions::default())?.mean)
}

/// Alternating minimisation of the Frechet functional:
///
/// 1. optimal matchings from the current mean `Z` to every diagram;
/// 2. each `Z` point moves to the minimiser of its matched costs, i.e. midpoint
///    `(b + d) / 2` averaged over its `k` point partners and half-lifetime summed over
///    them and divided by `B` (diagonal partners pull the lifetime to zero);
/// 3. off-diagonal input points left on the diagonal in more than half of the
///    diagrams, and close to each other, seed a new mean point when that lowers
///    the functional under the current matchings.
///
/// Points that land on the diagonal are dropped. `F` never increases.
pub fn frechet_mean_with(
    diagrams: &[PersistenceDiagram],
    opts: &FrechetOptions,
) -> Result<FrechetResult> {
    let nonempty = diagrams.iter().any(|d| !d.is_empty());
    if diagrams.is_empty() || !nonempty {
        return Err(Error::EmptyInput);
    }
    for d in diagrams {
        d.ensure_finite()?;
    }
    let inputs: Vec<PersistenceDiagram> = diagrams
        .iter()
        .map(PersistenceDiagram::without_diagonal)
        .collect();
    if inputs.len() == 1 {
        return Ok(FrechetResult {
            mean: inputs[0].clone(),
            trace: vec![0.0],
            iterations: 0,
        });
    }

    // start from the input with the median functional value
    let scores: Vec<f64> = inputs
        .iter()
        .map(|z| functional(z.points(), &inputs).0)
        .collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
    let mut z: Vec<PersistencePoint> = inputs[order[(order.len() - 1) / 2]].points().to_vec();

    let (mut f, mut matchings) = functional(&z, &inputs);
    let mut trace = vec![f];
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let updated = update_points(&z, &inputs, &matchings);
        let mut candidate = updated;
        let (mut f_new, mut m_new) = functional(&candidate, &inputs);
        if let Some(extended) = add_majority_points(&candidate, &inputs, &m_new, f_new) {
            let (f_ext, m_ext) = functional(&extended, &inputs);
            if f_ext < f_new {
                candidate = extended;
                f_new = f_ext;
                m_new = m_ext;
            }
        }
        if f_new > f {
            // rounding only: keep the previous iterate
            break;
        }
        let stalled = f - f_new < opts.tol;
        z = candidate;
        f = f_new;
        matchings = m_new;
        trace.push(f);
        if stalled {
            break;
        }
    }
    Ok(FrechetResult {
        mean: PersistenceDiagram::new(z).sorted(),
        trace,
        iterations,
    })
}

fn update_points(
    z: &[PersistencePoint],
    inputs: &[PersistenceDiagram],
    matchings: &[WassersteinMatching],
) -> Vec<PersistencePoint> {
    let b = inputs.len() as f64;
    let mut partners: Vec<Vec<PersistencePoint>> = vec![Vec::new(); z.len()];
    for (d, m) in inputs.iter().zip(matchings) {
        for &(i, j) in &m.pairs {
            partners[i].push(d.points()[j]);
        }
    }
    z.iter()
        .zip(&partners)
        .filter_map(|(p, xs)| mean_point(p.dim, xs, b))
        .collect()
}

/// Minimiser of `sum_{x in xs} |z - x|^2 + (B - |xs|) * diag_sq(z)`.
fn mean_point(dim: usize, xs: &[PersistencePoint], b: f64) -> Option<PersistencePoint> {
    if xs.is_empty() {
        return None;
    }
    let k = xs.len() as f64;
    if xs.len() as f64 == b {
        let birth = xs.iter().map(|x| x.birth).sum::<f64>() / k;
        let death = xs.iter().map(|x| x.death).sum::<f64>() / k;
        return (death > birth).then(|| PersistencePoint::new(dim, birth, death));
    }
    let mid = xs.iter().map(|x| (x.birth + x.death) / 2.0).sum::<f64>() / k;
    let half = xs.iter().map(|x| (x.death - x.birth) / 2.0).sum::<f64>() / b;
    (half > 0.0).then(|| PersistencePoint::new(dim, mid - half, mid + half))
}

fn add_majority_points(
    z: &[PersistencePoint],
    inputs: &[PersistenceDiagram],
    matchings: &[WassersteinMatching],
    f: f64,
) -> Option<Vec<PersistencePoint>> {
    let b = inputs.len();
    let mut free: Vec<Vec<bool>> = inputs.iter().map(|d| vec![false; d.len()]).collect();
    let mut seeds = Vec::new();
    for (i, m) in matchings.iter().enumerate() {
        for &j in &m.unmatched_b {
            free[i][j] = true;
            seeds.push((i, j));
        }
    }
    let point = |i: usize, j: usize| inputs[i].points()[j];
    seeds.sort_by(|&(i, j), &(k, l)| {
        diag_sq(&point(k, l))
            .total_cmp(&diag_sq(&point(i, j)))
            .then((i, j).cmp(&(k, l)))
    });

    let mut out = z.to_vec();
    let mut total = f * b as f64;
    for (i, j) in seeds {
        if !free[i][j] {
            continue;
        }
        let x = point(i, j);
        let mut cluster = vec![(i, j)];
        for (k, d) in inputs.iter().enumerate() {
            if k == i {
                continue;
            }
            let best = (0..d.len())
                .filter(|&l| free[k][l] && d.points()[l].dim == x.dim)
                .map(|l| (sq_dist(&x, &d.points()[l]), l))
                .filter(|&(c, l)| c < diag_sq(&x) + diag_sq(&d.points()[l]))
                .min_by(|p, q| p.0.total_cmp(&q.0));
            if let Some((_, l)) = best {
                cluster.push((k, l));
            }
        }
        if 2 * cluster.len() <= b {
            continue;
        }
        let members: Vec<PersistencePoint> = cluster.iter().map(|&(k, l)| point(k, l)).collect();
        let Some(zp) = mean_point(x.dim, &members, b as f64) else {
            continue;
        };
        let before: f64 = members.iter().map(diag_sq).sum();
        let after: f64 = members.iter().map(|m| sq_dist(&zp, m)).sum::<f64>()
            + (b - members.len()) as f64 * diag_sq(&zp);
        if after < before {
            total += after - before;
            out.push(zp);
            for &(k, l) in &cluster {
                free[k][l] = false;
            }
        }
    }
    (out.len() > z.len() && total < f * b as f64).then_some(out)
}

/// Frechet mean of the Vietoris-Rips diagrams of `samples` random `m`-subsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampleOptions {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub vr: VrOptions,
    pub essential: EssentialPolicy,
    pub frechet: FrechetOptions,
}

pub fn subsample_diagram(
    space: &FiniteMetricSpace,
    opts: &SubsampleOptions,
) -> Result<PersistenceDiagram> {
    let n = space.len();
    if opts.m == 0 || opts.m > n {
        return Err(Error::InvalidArgument(format!(
            "subsample size {} must lie in 1..={n}",
            opts.m
        )));
    }
    if opts.samples == 0 {
        return Err(Error::InvalidArgument(
            "number of subsamples must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let subsets: Vec<Vec<usize>> = (0..opts.samples)
        .map(|_| {
            let mut idx = sample(&mut rng, n, opts.m).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();
    let diagrams = subsets
        .par_iter()
        .map(|idx| {
            let d = vr_persistence(&space.subspace(idx), &opts.vr)?;
            Ok(d.with_essential(opts.essential))
        })
        .collect::<Result<Vec<_>>>()?;
    if diagrams.iter().all(PersistenceDiagram::is_empty) {
        return Ok(PersistenceDiagram::empty());
    }
    Ok(frechet_mean_with(&diagrams, &opts.frechet)?.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dgm(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(1, pairs)
    }

    /// Every partial matching, costs summed in the same canonical order.
    fn exhaustive(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
        fn rec(
            a: &[PersistencePoint],
            b: &[PersistencePoint],
            i: usize,
            used: &mut Vec<bool>,
            partner: &mut Vec<Option<usize>>,
            best: &mut f64,
        ) {
            if i == a.len() {
                let mut c = 0.0;
                for (k, p) in partner.iter().enumerate() {
                    c += match p {
                        Some(j) => {
                            let (x, y) = (a[k].birth - b[*j].birth, a[k].death - b[*j].death);
                            x * x + y * y
                        }
                        None => (a[k].death - a[k].birth).powi(2) / 2.0,
                    };
                }
                for (j, q) in b.iter().enumerate() {
                    if !used[j] {
                        c += (q.death - q.birth).powi(2) / 2.0;
                    }
                }
                *best = best.min(c);
                return;
            }
            partner[i] = None;
            rec(a, b, i + 1, used, partner, best);
            for j in 0..b.len() {
                if !used[j] && b[j].dim == a[i].dim {
                    used[j] = true;
                    partner[i] = Some(j);
                    rec(a, b, i + 1, used, partner, best);
                    used[j] = false;
                }
            }
            partner[i] = None;
        }
        let mut best = f64::INFINITY;
        rec(
            a.points(),
            b.points(),
            0,
            &mut vec![false; b.len()],
            &mut vec![None; a.len()],
            &mut best,
        );
        best.sqrt()
    }

    #[test]
    fn wasserstein_examples() {
        let a = dgm(&[(0.0, 2.0), (1.0, 3.0)]);
        assert_eq!(wasserstein2(&a, &a).unwrap(), 0.0);
        assert_eq!(
            wasserstein2(&dgm(&[(0.0, 2.0)]), &PersistenceDiagram::empty()).unwrap(),
            2f64.sqrt()
        );
        assert!(wasserstein2(
            &PersistenceDiagram::from_pairs(0, &[(0.0, f64::INFINITY)]),
            &a
        )
        .is_err());
    }

    #[test]
    fn dimensions_do_not_mix() {
        let a = PersistenceDiagram::from_pairs(0, &[(0.0, 2.0)]);
        let b = PersistenceDiagram::from_pairs(1, &[(0.0, 2.0)]);
        assert_eq!(wasserstein2(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn mean_of_identical_diagrams() {
        let a = dgm(&[(0.0, 2.0), (1.0, 3.5), (0.25, 0.75)]);
        assert!(frechet_mean(&[a.clone(), a.clone()])
            .unwrap()
            .same_points(&a));
        assert!(frechet_mean(std::slice::from_ref(&a))
            .unwrap()
            .same_points(&a));
    }

    #[test]
    fn one_point_mean() {
        let m = frechet_mean(&[dgm(&[(0.0, 2.0)]), dgm(&[(0.0, 4.0)])]).unwrap();
        assert_eq!(m.len(), 1);
        let p = m.points()[0];
        assert!(
            (p.birth - 0.0).abs() < 1e-6 && (p.death - 3.0).abs() < 1e-6,
            "{m:?}"
        );
        // one-dimensional check of the functional along the death axis
        let f = |y: f64| {
            frechet_functional(&dgm(&[(0.0, y)]), &[dgm(&[(0.0, 2.0)]), dgm(&[(0.0, 4.0)])])
                .unwrap()
        };
        assert!(f(3.0) < f(2.99) && f(3.0) < f(3.01));
    }

    #[test]
    fn majority_point_is_added() {
        // the initial median lacks the point that three of four diagrams share
        let d = [
            dgm(&[(0.0, 4.0)]),
            dgm(&[(0.0, 4.0), (1.0, 3.0)]),
            dgm(&[(0.0, 4.0), (1.1, 3.0)]),
            dgm(&[(0.0, 4.1), (0.9, 3.0)]),
        ];
        let r = frechet_mean_with(&d[..], &FrechetOptions::default()).unwrap();
        assert_eq!(r.mean.len(), 2, "{r:?}");
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(frechet_mean(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            frechet_mean(&[PersistenceDiagram::empty()]),
            Err(Error::EmptyInput)
        ));
    }

    fn noisy_circle(n: usize, seed: u64) -> FiniteMetricSpace {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = 1.0 + rng.gen_range(-0.05..0.05);
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        crate::vr::distance_matrix(&pts, crate::vr::Metric::Euclidean).unwrap()
    }

    fn subsample_opts(m: usize, samples: usize, seed: u64) -> SubsampleOptions {
        SubsampleOptions {
            m,
            samples,
            seed,
            vr: VrOptions {
                max_dim: 1,
                ..Default::default()
            },
            essential: EssentialPolicy::Drop,
            frechet: FrechetOptions::default(),
        }
    }

    fn top_h1(d: &PersistenceDiagram) -> PersistencePoint {
        *d.restrict_dim(1)
            .points()
            .iter()
            .max_by(|p, q| (p.death - p.birth).total_cmp(&(q.death - q.birth)))
            .unwrap()
    }

    #[test]
    fn full_subsample_is_the_full_diagram() {
        let s = noisy_circle(30, 1);
        let opts = subsample_opts(30, 1, 5);
        let full = vr_persistence(&s, &opts.vr)
            .unwrap()
            .with_essential(EssentialPolicy::Drop);
        assert!(subsample_diagram(&s, &opts).unwrap().same_points(&full));
    }

    #[test]
    fn subsampled_circle_keeps_its_loop() {
        let s = noisy_circle(400, 3);
        let opts = subsample_opts(100, 10, 11);
        let full = top_h1(&vr_persistence(&s, &opts.vr).unwrap());
        let mean = subsample_diagram(&s, &opts).unwrap();
        let approx = top_h1(&mean);
        assert!(
            (approx.death - full.death).abs() <= 0.2 * full.death,
            "{approx:?} vs {full:?}"
        );
        assert!(
            (approx.birth - full.birth).abs() <= 0.2 * full.death,
            "{approx:?} vs {full:?}"
        );
        assert_eq!(mean, subsample_diagram(&s, &opts).unwrap());
    }

    #[test]
    fn subsample_size_is_checked() {
        let s = noisy_circle(10, 0);
        assert!(subsample_diagram(&s, &subsample_opts(11, 1, 0)).is_err());
        assert!(subsample_diagram(&s, &subsample_opts(5, 0, 0)).is_err());
    }

    fn arb_diagram(max: usize) -> impl Strategy<Value = PersistenceDiagram> {
        prop::collection::vec((0.0f64..5.0, 0.01f64..4.0), 0..=max)
            .prop_map(|v| dgm(&v.into_iter().map(|(b, l)| (b, b + l)).collect::<Vec<_>>()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn assignment_matches_enumeration(a in arb_diagram(3), b in arb_diagram(3)) {
            prop_assert_eq!(wasserstein2(&a, &b).unwrap(), exhaustive(&a, &b));
        }

        #[test]
        fn metric_properties(a in arb_diagram(3), b in arb_diagram(3), c in arb_diagram(3)) {
            let ab = wasserstein2(&a, &b).unwrap();
            prop_assert!((ab - wasserstein2(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= wasserstein2(&a, &c).unwrap() + wasserstein2(&c, &b).unwrap() + 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn functional_never_increases(ds in prop::collection::vec(arb_diagram(5), 3)) {
            prop_assume!(ds.iter().any(|d| !d.is_empty()));
            let r = frechet_mean_with(&ds, &FrechetOptions::default()).unwrap();
            prop_assert!(r.trace.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.trace);
        }

        #[test]
        fn mean_is_a_local_minimum(ds in prop::collection::vec(arb_diagram(4), 3)) {
            prop_assume!(ds.iter().any(|d| !d.is_empty()));
            let r = frechet_mean_with(&ds, &FrechetOptions { max_iter: 200, tol: 0.0 }).unwrap();
            let f0 = frechet_functional(&r.mean, &ds).unwrap();
            for k in 0..r.mean.len() {
                for (db, dd) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
                    let mut pts = r.mean.points().to_vec();
                    pts[k].birth += db;
                    pts[k].death += dd;
                    if pts[k].death < pts[k].birth {
                        continue;
                    }
                    let f = frechet_functional(&PersistenceDiagram::new(pts), &ds).unwrap();
                    prop_assert!(f >= f0 - 1e-9, "point {} moved by ({}, {}): {} < {}", k, db, dd, f, f0);
                }
            }
        }
    }
}
