//! Runtime scaling of the direct search and its agreement with a dense grid.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::diagram::{PersistenceDiagram, PersistencePoint};
use crate::dilation::{di_dissimilarity, fine_grid_minimum};
use crate::error::{Error, Result};

pub const DEFAULT_SIZES: [usize; 5] = [32, 64, 128, 256, 512];
pub const DEFAULT_FINE_PARTITIONS: usize = 100_000;

/// `n` points of dimension 1 with births `Unif[0, 10)` and lifetimes `Exp(1)`.
pub fn random_diagram(n: usize, rng: &mut impl Rng) -> PersistenceDiagram {
    let life = Exp::new(1.0).expect("positive rate");
    let points = (0..n)
        .map(|_| {
            let birth = rng.gen_range(0.0..10.0);
            PersistencePoint::new(1, birth, birth + life.sample(rng))
        })
        .collect();
    PersistenceDiagram::new(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DirectSearch,
    BruteFineGrid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DirectSearch => "direct-search",
            Method::BruteFineGrid => "brute-fine-grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    pub n_points: usize,
    pub wall_seconds: f64,
    pub method: Method,
    pub value: f64,
    /// Grid error bound of the direct search, for the agreement check.
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub records: Vec<BenchmarkRecord>,
    pub fit: LogLogFit,
}

impl BenchReport {
    pub fn direct(&self) -> impl Iterator<Item = &BenchmarkRecord> {
        self.records
            .iter()
            .filter(|r| r.method == Method::DirectSearch)
    }

    /// Whether every fine-grid value lies within the direct search's bound of it.
    pub fn agrees(&self) -> bool {
        self.records
            .iter()
            .filter(|r| r.method == Method::BruteFineGrid)
            .all(|f| {
                self.direct()
                    .filter(|d| d.n_points == f.n_points)
                    .all(|d| (d.value - f.value).abs() <= d.error_bound + 1e-12)
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_points,method,wall_seconds,value,error_bound\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n_points,
                r.method.name(),
                r.wall_seconds,
                r.value,
                r.error_bound
            ));
        }
        out
    }
}

/// Least-squares line through `(ln x, ln y)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(
            "log-log fit needs at least two positive (x, y) pairs".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "log-log fit needs two distinct sizes".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub partitions: usize,
    /// Dense-grid reference size; 0 skips the comparison.
    pub fine_partitions: usize,
    /// Timed runs per size; the median is reported.
    pub repeats: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            seed: 0,
            partitions: 100,
            fine_partitions: DEFAULT_FINE_PARTITIONS,
            repeats: 3,
        }
    }
}

/// For each size, one diagram pair from `ChaCha8Rng::seed_from_u64(seed)` on stream `n`.
pub fn bench(opts: &BenchOptions) -> Result<BenchReport> {
    let mut sizes = opts.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 || sizes[0] == 0 {
        return Err(Error::InvalidArgument(
            "bench needs at least two distinct positive sizes".into(),
        ));
    }
    let mut records = Vec::new();
    for &n in &sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(n as u64);
        let a = random_diagram(n, &mut rng);
        let b = random_diagram(n, &mut rng);
        let mut times = Vec::new();
        let mut result = None;
        for _ in 0..opts.repeats.max(1) {
            let start = Instant::now();
            let r = di_dissimilarity(&a, &b, opts.partitions)?;
            times.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
            result = Some(r);
        }
        times.sort_by(f64::total_cmp);
        let r = result.expect("at least one repeat");
        records.push(BenchmarkRecord {
            n_points: n,
            wall_seconds: times[times.len() / 2],
            method: Method::DirectSearch,
            value: r.value,
            error_bound: r.error_bound,
        });
        if opts.fine_partitions > 0 {
            let start = Instant::now();
            let value = if r.interval.c_min <= r.interval.c_max {
                let (_, v) = fine_grid_minimum(
                    &a,
                    &b,
                    r.interval.c_min,
                    r.interval.c_max,
                    opts.fine_partitions,
                )?;
                v.min(r.interval.d0)
            } else {
                r.interval.d0
            };
            records.push(BenchmarkRecord {
                n_points: n,
                wall_seconds: start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE),
                method: Method::BruteFineGrid,
                value,
                error_bound: 0.0,
            });
        }
    }
    let direct: Vec<&BenchmarkRecord> = records
        .iter()
        .filter(|r| r.method == Method::DirectSearch)
        .collect();
    let xs: Vec<f64> = direct.iter().map(|r| r.n_points as f64).collect();
    let ys: Vec<f64> = direct.iter().map(|r| r.wall_seconds).collect();
    let fit = loglog_fit(&xs, &ys)?;
    Ok(BenchReport { records, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_diagram(2000, &mut rng);
        assert_eq!(d.len(), 2000);
        assert!(d
            .iter()
            .all(|p| p.dim == 1 && (0.0..10.0).contains(&p.birth) && p.death >= p.birth));
        let mean_life = d.iter().map(|p| p.death - p.birth).sum::<f64>() / 2000.0;
        assert!((mean_life - 1.0).abs() < 0.1);
    }

    #[test]
    fn fit_recovers_power_law() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        let f = loglog_fit(&xs, &ys).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(loglog_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn small_bench_agrees_with_fine_grid() {
        let r = bench(&BenchOptions {
            sizes: vec![8, 16, 32],
            fine_partitions: 5000,
            repeats: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(r.records.len(), 6);
        assert!(r.records.iter().all(|x| x.wall_seconds > 0.0));
        assert!(r.agrees(), "{r:?}");
        assert!(r.fit.slope.is_finite());
    }

    #[test]
    fn sizes_are_validated() {
        let opts = BenchOptions {
            sizes: vec![8],
            ..Default::default()
        };
        assert!(bench(&opts).is_err());
    }
}
