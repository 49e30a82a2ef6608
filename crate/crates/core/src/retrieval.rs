//! Nearest-template classification of point clouds by their persistence diagrams.
//!
//! Each class is summarised by the Frechet mean of the Vietoris-Rips diagrams of
//! random subsamples. A query is compared to every template and the labels are
//! ranked by ascending dissimilarity.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::barycenter::{subsample_diagram, FrechetOptions, SubsampleOptions};
use crate::bottleneck::bottleneck_distance;
use crate::diagram::{DimensionPolicy, EssentialPolicy, PersistenceDiagram};
use crate::dilation::{di_dissimilarity, DEFAULT_PARTITIONS};
use crate::error::{Error, Result};
use crate::metric_spaces::FiniteMetricSpace;
use crate::vr::{distance_matrix, read_point_cloud, vr_persistence, Metric, VrOptions};

/// Seeds of the fixed synthetic classes.
pub const SYNTHETIC_SEEDS: [(&str, u64); 3] = [("blob", 3), ("circle", 1), ("two-circles", 2)];
pub const SYNTHETIC_POINTS: usize = 500;
pub const DEFAULT_TEMPLATE_SIZE: usize = 200;
pub const DEFAULT_TEMPLATE_SAMPLES: usize = 10;
pub const DEFAULT_PROPORTIONS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledCloud {
    pub label: String,
    pub points: Vec<Vec<f64>>,
}

pub type Dataset = Vec<LabeledCloud>;

/// Unit circle with uniform angles and radial noise `N(0, 0.05^2)`.
fn noisy_circle(rng: &mut ChaCha8Rng, n: usize, cx: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let noise: f64 = StandardNormal.sample(rng);
            let r = 1.0 + 0.05 * noise;
            vec![cx + r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// Three planar classes of [`SYNTHETIC_POINTS`] points each, sorted by label:
/// `blob` (standard Gaussian), `circle` (noisy unit circle) and `two-circles`
/// (noisy unit circles centred at `(-2.5, 0)` and `(2.5, 0)`, half the points each).
/// Every class draws from its own `ChaCha8Rng::seed_from_u64` with the seed in
/// [`SYNTHETIC_SEEDS`].
pub fn synthetic_dataset() -> Dataset {
    SYNTHETIC_SEEDS
        .iter()
        .map(|&(label, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = SYNTHETIC_POINTS;
            let points = match label {
                "blob" => (0..n)
                    .map(|_| (0..2).map(|_| StandardNormal.sample(&mut rng)).collect())
                    .collect(),
                "circle" => noisy_circle(&mut rng, n, 0.0),
                _ => {
                    let mut pts = noisy_circle(&mut rng, n / 2, -2.5);
                    pts.extend(noisy_circle(&mut rng, n - n / 2, 2.5));
                    pts
                }
            };
            LabeledCloud {
                label: label.to_string(),
                points,
            }
        })
        .collect()
}

/// Loads `dir/<label>/*.csv`; the rows of every CSV in a class directory are concatenated.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut classes = Vec::new();
    for entry in sorted_entries(dir)? {
        if !entry.is_dir() {
            continue;
        }
        let label = entry
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut points: Vec<Vec<f64>> = Vec::new();
        for file in sorted_entries(&entry)? {
            if file.extension().is_some_and(|e| e == "csv") {
                let rows = read_point_cloud(&file)?;
                if let (Some(first), Some(row)) = (points.first(), rows.first()) {
                    if first.len() != row.len() {
                        return Err(Error::Parse {
                            path: file,
                            line: 1,
                            message: format!(
                                "expected {} coordinates, found {}",
                                first.len(),
                                row.len()
                            ),
                        });
                    }
                }
                points.extend(rows);
            }
        }
        classes.push(LabeledCloud { label, points });
    }
    if classes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: no class subdirectories found",
            dir.display()
        )));
    }
    Ok(classes)
}

/// Writes `dir/<label>/points.csv` for every class.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    for class in dataset {
        let sub = dir.as_ref().join(&class.label);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        crate::table::write_numeric_table(&class.points, sub.join("points.csv"))?;
    }
    Ok(())
}

pub(crate) fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

/// How diagrams are built and compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramSettings {
    pub metric: Metric,
    pub vr: VrOptions,
    pub dims: DimensionPolicy,
    pub essential: EssentialPolicy,
}

impl Default for DiagramSettings {
    fn default() -> Self {
        Self {
            metric: Metric::Euclidean,
            vr: VrOptions {
                max_dim: 1,
                ..Default::default()
            },
            dims: DimensionPolicy::Only(1),
            essential: EssentialPolicy::Drop,
        }
    }
}

impl DiagramSettings {
    pub fn diagram(&self, space: &FiniteMetricSpace) -> Result<PersistenceDiagram> {
        Ok(vr_persistence(space, &self.vr)?
            .select(self.dims)
            .with_essential(self.essential))
    }

    pub fn space(&self, points: &[Vec<f64>]) -> Result<FiniteMetricSpace> {
        distance_matrix(points, self.metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassTemplate {
    pub label: String,
    pub diagram: PersistenceDiagram,
    pub provenance: Provenance,
}

/// One template per class, the Frechet mean of `samples` diagrams of random
/// `m`-subsets. Class `k` (in dataset order) uses seed `seed + k`.
pub fn build_templates(
    dataset: &Dataset,
    m: usize,
    samples: usize,
    seed: u64,
    settings: &DiagramSettings,
) -> Result<Vec<ClassTemplate>> {
    if let Some(c) = dataset.iter().find(|c| c.points.len() < m) {
        return Err(Error::ClassTooSmall {
            label: c.label.clone(),
            size: c.points.len(),
            m,
        });
    }
    dataset
        .iter()
        .enumerate()
        .map(|(k, class)| {
            let space = settings.space(&class.points)?;
            let class_seed = seed.wrapping_add(k as u64);
            let opts = SubsampleOptions {
                m,
                samples,
                seed: class_seed,
                vr: settings.vr,
                essential: settings.essential,
                frechet: FrechetOptions::default(),
            };
            let diagram = if samples == 1 && m == space.len() {
                settings.diagram(&space)?
            } else {
                subsample_diagram(&space, &opts)?.select(settings.dims)
            };
            Ok(ClassTemplate {
                label: class.label.clone(),
                diagram,
                provenance: Provenance {
                    m,
                    samples,
                    seed: class_seed,
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `dissim(query, template)`: the template fixes the scale.
    #[default]
    QueryToTemplate,
    TemplateToQuery,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "query-to-template" => Ok(Direction::QueryToTemplate),
            "template-to-query" => Ok(Direction::TemplateToQuery),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction '{other}' (expected query-to-template or template-to-query)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparator {
    /// Dilation-invariant bottleneck dissimilarity.
    Dilation,
    /// Plain bottleneck distance.
    Bottleneck,
}

impl Comparator {
    pub const ALL: [Comparator; 2] = [Comparator::Dilation, Comparator::Bottleneck];

    pub fn name(self) -> &'static str {
        match self {
            Comparator::Dilation => "dilation",
            Comparator::Bottleneck => "bottleneck",
        }
    }

    pub fn compare(
        self,
        a: &PersistenceDiagram,
        b: &PersistenceDiagram,
        partitions: usize,
    ) -> Result<f64> {
        match self {
            Comparator::Dilation => Ok(di_dissimilarity(a, b, partitions)?.value),
            Comparator::Bottleneck => Ok(bottleneck_distance(a, b)?.distance),
        }
    }
}

impl FromStr for Comparator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dilation" | "di-dissim" => Ok(Comparator::Dilation),
            "bottleneck" => Ok(Comparator::Bottleneck),
            other => Err(Error::InvalidArgument(format!(
                "unknown comparator '{other}' (expected dilation or bottleneck)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub direction: Direction,
    pub comparator: Comparator,
    pub partitions: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            direction: Direction::QueryToTemplate,
            comparator: Comparator::Dilation,
            partitions: DEFAULT_PARTITIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    /// `(label, dissimilarity)`, ascending, ties by label.
    pub ranked: Vec<(String, f64)>,
    pub proportion: Option<f64>,
    pub seed: Option<u64>,
}

impl RetrievalResult {
    pub fn best(&self) -> &str {
        &self.ranked[0].0
    }

    /// Whether `label` is among the first `k` entries.
    pub fn in_top(&self, label: &str, k: usize) -> bool {
        self.ranked.iter().take(k).any(|(l, _)| l == label)
    }
}

/// Ranks templates against an already computed query diagram.
pub fn rank(
    query: &PersistenceDiagram,
    templates: &[ClassTemplate],
    opts: &ClassifyOptions,
) -> Result<RetrievalResult> {
    if templates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut ranked = templates
        .par_iter()
        .map(|t| {
            let value = match opts.direction {
                Direction::QueryToTemplate => {
                    opts.comparator
                        .compare(query, &t.diagram, opts.partitions)?
                }
                Direction::TemplateToQuery => {
                    opts.comparator
                        .compare(&t.diagram, query, opts.partitions)?
                }
            };
            Ok((t.label.clone(), value))
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
    Ok(RetrievalResult {
        ranked,
        proportion: None,
        seed: None,
    })
}

/// Computes the query's diagram and ranks the templates.
pub fn classify(
    query: &FiniteMetricSpace,
    templates: &[ClassTemplate],
    settings: &DiagramSettings,
    opts: &ClassifyOptions,
) -> Result<RetrievalResult> {
    rank(&settings.diagram(query)?, templates, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    pub proportions: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub m: usize,
    pub samples: usize,
    /// Multiplies every query distance.
    pub query_scale: f64,
    pub settings: DiagramSettings,
    pub classify: ClassifyOptions,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            proportions: DEFAULT_PROPORTIONS.to_vec(),
            trials: 50,
            seed: 7,
            m: DEFAULT_TEMPLATE_SIZE,
            samples: DEFAULT_TEMPLATE_SAMPLES,
            query_scale: 1.0,
            settings: DiagramSettings::default(),
            classify: ClassifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub proportion: f64,
    pub distance: &'static str,
    pub top1: f64,
    pub top2: f64,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub rows: Vec<AccuracyRow>,
    pub templates: Vec<ClassTemplate>,
}

impl Evaluation {
    pub fn row(&self, proportion: f64, comparator: Comparator) -> Option<&AccuracyRow> {
        self.rows
            .iter()
            .find(|r| r.proportion == proportion && r.distance == comparator.name())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("proportion,distance,top1,top2,queries\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.proportion, r.distance, r.top1, r.top2, r.queries
            ));
        }
        out
    }
}

/// Random `proportion` of the class, at least two points. The subset for
/// `(trial, class)` comes from `ChaCha8Rng::seed_from_u64(seed)` on stream
/// `trial * classes + class`, with the proportion index folded into the high bits.
pub fn query_indices(n: usize, proportion: f64, seed: u64, stream: u64) -> Result<Vec<usize>> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "proportion must lie in (0, 1], got {proportion}"
        )));
    }
    let k = ((proportion * n as f64).round() as usize).clamp(2.min(n), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Per-query outcome kept for invariance checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub proportion: f64,
    pub trial: usize,
    pub label: String,
    pub results: Vec<(Comparator, RetrievalResult)>,
}

/// Runs every `(proportion, trial, class)` query against templates built from the
/// full class data, for both comparators.
pub fn run_queries(
    dataset: &Dataset,
    templates: &[ClassTemplate],
    opts: &EvaluateOptions,
) -> Result<Vec<QueryOutcome>> {
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if !(opts.query_scale > 0.0 && opts.query_scale.is_finite()) {
        return Err(Error::InvalidDilation(opts.query_scale));
    }
    let spaces = dataset
        .iter()
        .map(|c| opts.settings.space(&c.points))
        .collect::<Result<Vec<_>>>()?;
    let classes = dataset.len() as u64;
    let mut jobs = Vec::new();
    for (pi, &p) in opts.proportions.iter().enumerate() {
        for trial in 0..opts.trials {
            for class in 0..dataset.len() {
                let stream = ((pi as u64) << 48) | (trial as u64 * classes + class as u64);
                jobs.push((p, trial, class, stream));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(p, trial, class, stream)| {
            let idx = query_indices(spaces[class].len(), p, opts.seed, stream)?;
            let mut query = spaces[class].subspace(&idx);
            if opts.query_scale != 1.0 {
                query = query.scale(opts.query_scale)?;
            }
            let diagram = opts.settings.diagram(&query)?;
            let results = Comparator::ALL
                .iter()
                .map(|&comparator| {
                    let r = rank(
                        &diagram,
                        templates,
                        &ClassifyOptions {
                            comparator,
                            ..opts.classify
                        },
                    )?;
                    Ok((
                        comparator,
                        RetrievalResult {
                            proportion: Some(p),
                            seed: Some(opts.seed),
                            ..r
                        },
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(QueryOutcome {
                proportion: p,
                trial,
                label: dataset[class].label.clone(),
                results,
            })
        })
        .collect()
}

pub fn summarize(outcomes: &[QueryOutcome], proportions: &[f64]) -> Vec<AccuracyRow> {
    let mut rows = Vec::new();
    for &p in proportions {
        for comparator in Comparator::ALL {
            let hits: Vec<&RetrievalResult> = outcomes
                .iter()
                .filter(|o| o.proportion == p)
                .flat_map(|o| {
                    o.results
                        .iter()
                        .filter(move |(c, _)| *c == comparator)
                        .map(|(_, r)| r)
                })
                .collect();
            let labels: Vec<&str> = outcomes
                .iter()
                .filter(|o| o.proportion == p)
                .map(|o| o.label.as_str())
                .collect();
            let n = hits.len();
            let top = |k: usize| {
                hits.iter()
                    .zip(&labels)
                    .filter(|(r, l)| r.in_top(l, k))
                    .count() as f64
                    / n.max(1) as f64
            };
            rows.push(AccuracyRow {
                proportion: p,
                distance: comparator.name(),
                top1: top(1),
                top2: top(2),
                queries: n,
            });
        }
    }
    rows
}

/// Builds templates from the full classes, then scores random-proportion queries.
pub fn evaluate(dataset: &Dataset, opts: &EvaluateOptions) -> Result<Evaluation> {
    let templates = build_templates(dataset, opts.m, opts.samples, opts.seed, &opts.settings)?;
    let outcomes = run_queries(dataset, &templates, opts)?;
    Ok(Evaluation {
        rows: summarize(&outcomes, &opts.proportions),
        templates,
    })
}
