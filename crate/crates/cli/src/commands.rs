//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tdir_core::barycenter::{frechet_mean_with, wasserstein_matching, FrechetOptions};
use tdir_core::bench::{bench, BenchOptions, DEFAULT_FINE_PARTITIONS, DEFAULT_SIZES};
use tdir_core::bottleneck::bottleneck_distance;
use tdir_core::diagram::{read_diagram, write_diagram};
use tdir_core::diagram::{DimensionPolicy, EssentialPolicy, PersistenceDiagram};
use tdir_core::dilation::{di_dissimilarity_with, DilationOptions, DEFAULT_PARTITIONS};
use tdir_core::logshift::{di_distance_with, ShiftOptions, DEFAULT_EPSILON};
use tdir_core::metric_spaces::{
    cdf_euclidean, cdf_poincare, cdf_sup_deviation, circle_points, edge_cdf, edge_fraction_at,
    sample_angles, sample_circle, FiniteMetricSpace,
};
use tdir_core::retrieval::{
    build_templates, classify, evaluate, read_dataset, synthetic_dataset, write_dataset,
    ClassTemplate, ClassifyOptions, Comparator, DiagramSettings, Direction, EvaluateOptions,
    Provenance, DEFAULT_TEMPLATE_SAMPLES, DEFAULT_TEMPLATE_SIZE,
};
use tdir_core::vr::{distance_matrix, read_point_cloud, vr_persistence, Metric, VrOptions};
use tdir_core::Error;

use crate::output::{fmt_f64, num, Output};
use crate::{EXIT_DATA, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "tdir",
    version,
    about = "Dilation-invariant comparison of persistence diagrams"
)]
pub struct Cli {
    /// Print a single JSON object instead of key=value lines.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads (default: TDIR_THREADS, else all cores).
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vietoris-Rips persistence diagram of a point cloud or distance matrix.
    Ph(PhArgs),
    /// Bottleneck distance between two diagram files.
    Bottleneck(PairArgs),
    /// Dilation-invariant bottleneck dissimilarity min_c d_inf(cA, B).
    DiDissim(DiDissimArgs),
    /// Shift-invariant bottleneck distance between log diagrams.
    DiDist(DiDistArgs),
    /// 2-Wasserstein distance between two diagram files.
    Wasserstein(PairArgs),
    /// Frechet mean of several diagrams.
    FrechetMean(FrechetArgs),
    /// Empirical versus closed-form distance CDF of points on a circle.
    Cdf(CdfArgs),
    /// Rank class templates for a query point cloud.
    Classify(ClassifyArgs),
    /// Top-1/top-2 retrieval accuracy per proportion and distance.
    Evaluate(EvaluateArgs),
    /// Runtime scaling of the direct search on random diagrams.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DiagramFlags {
    /// Replace infinite deaths by VALUE, or by the diagram's largest finite death with `max`.
    #[arg(long, value_name = "VALUE|max")]
    pub cap_essential: Option<String>,

    /// Pool all homology dimensions instead of matching per dimension.
    #[arg(long)]
    pub mix_dims: bool,

    /// Keep only this homology dimension.
    #[arg(long, value_name = "K", conflicts_with = "mix_dims")]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[command(flatten)]
    pub diagram: DiagramFlags,
}

#[derive(Debug, Args)]
pub struct DiDissimArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[command(flatten)]
    pub diagram: DiagramFlags,
    /// Grid partitions N of the search interval.
    #[arg(long, default_value_t = DEFAULT_PARTITIONS)]
    pub partitions: usize,
    /// Re-grid around the coarse minimiser once.
    #[arg(long)]
    pub refine: bool,
    /// Write the sampled curve as CSV `t,theta`.
    #[arg(long, value_name = "PATH")]
    pub report_curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiDistArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[command(flatten)]
    pub diagram: DiagramFlags,
    #[arg(long, default_value_t = tdir_core::logshift::DEFAULT_PARTITIONS)]
    pub partitions: usize,
    /// Added to births and deaths before taking logs.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Drop points born before this value first.
    #[arg(long, value_name = "BIRTH")]
    pub crop_below: Option<f64>,
    /// Write the sampled curve as CSV `t,theta`.
    #[arg(long, value_name = "PATH")]
    pub report_curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhArgs {
    /// Point cloud CSV (one point per row), or a distance matrix with --distance-matrix.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the input as an n x n distance matrix.
    #[arg(long)]
    pub distance_matrix: bool,
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    #[arg(long, default_value_t = 1)]
    pub max_dim: usize,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub max_radius: f64,
    #[arg(long, default_value_t = tdir_core::vr::DEFAULT_SIMPLEX_CAP)]
    pub simplex_cap: usize,
    /// Write the diagram CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FrechetArgs {
    #[arg(required = true, num_args = 1..)]
    pub diagrams: Vec<PathBuf>,
    #[command(flatten)]
    pub diagram: DiagramFlags,
    #[arg(long, default_value_t = tdir_core::barycenter::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = tdir_core::barycenter::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CdfArgs {
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    /// Euclidean radius of the circle.
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report the edge fraction at this normalised threshold.
    #[arg(long, default_value_t = 0.9)]
    pub at: f64,
    /// Write CSV `threshold,empirical,theoretical`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrievalFlags {
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    /// Homology dimension compared.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = DEFAULT_PARTITIONS)]
    pub partitions: usize,
    /// query-to-template (template fixes the scale) or template-to-query.
    #[arg(long, default_value = "query-to-template")]
    pub direction: String,
    /// Template subsample size m.
    #[arg(long, default_value_t = DEFAULT_TEMPLATE_SIZE)]
    pub m: usize,
    /// Number of template subsamples B.
    #[arg(long, default_value_t = DEFAULT_TEMPLATE_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Directory of template diagrams `<label>.csv`, or a dataset directory with one
    /// subdirectory of point-cloud CSVs per class.
    #[arg(long)]
    pub templates: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[command(flatten)]
    pub retrieval: RetrievalFlags,
    /// dilation or bottleneck.
    #[arg(long, default_value = "dilation")]
    pub comparator: String,
    /// Write the templates built from a dataset directory as `<label>.csv` here.
    #[arg(long, value_name = "DIR")]
    pub save_templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset directory: one subdirectory per class label containing point-cloud CSVs.
    #[arg(
        long,
        required_unless_present = "synthetic",
        conflicts_with = "synthetic"
    )]
    pub dataset: Option<PathBuf>,
    /// Use the built-in three-class benchmark (blob, circle, two-circles).
    #[arg(long)]
    pub synthetic: bool,
    /// Write the dataset used to this directory.
    #[arg(long, value_name = "DIR")]
    pub export_dataset: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = tdir_core::retrieval::DEFAULT_PROPORTIONS)]
    pub proportions: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Multiply every query distance by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub query_scale: f64,
    #[command(flatten)]
    pub retrieval: RetrievalFlags,
    /// Write the accuracy table CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_PARTITIONS)]
    pub partitions: usize,
    /// Dense-grid reference size; 0 skips the accuracy comparison.
    #[arg(long, default_value_t = DEFAULT_FINE_PARTITIONS)]
    pub fine_partitions: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Write the benchmark records CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// Classifies a library error; `context` names the files involved.
    pub fn from_error(e: Error, context: &str) -> Self {
        let usage = matches!(
            e,
            Error::InvalidArgument(_) | Error::InvalidPartitions(_) | Error::InvalidDilation(_)
        );
        let located = matches!(e, Error::Io { .. } | Error::Parse { .. });
        let message = if located || context.is_empty() {
            e.to_string()
        } else {
            format!("{context}: {e}")
        };
        Self {
            code: if usage { EXIT_USAGE } else { EXIT_DATA },
            message,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

trait Context<T> {
    fn ctx(self, context: &str) -> CliResult<T>;
}

impl<T> Context<T> for tdir_core::Result<T> {
    fn ctx(self, context: &str) -> CliResult<T> {
        self.map_err(|e| Failure::from_error(e, context))
    }
}

fn names(paths: &[&Path]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(k) = flag {
        return Ok(Some(k));
    }
    match std::env::var("TDIR_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map(Some).map_err(|_| {
            Failure::usage(format!(
                "TDIR_THREADS must be a non-negative integer, got '{v}'"
            ))
        }),
        _ => Ok(None),
    }
}

pub fn run(cli: Cli) -> CliResult<String> {
    if let Some(k) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot configure {k} threads: {e}")))?;
    }
    let out = match cli.command {
        Command::Ph(a) => ph(a)?,
        Command::Bottleneck(a) => bottleneck(a)?,
        Command::DiDissim(a) => di_dissim(a)?,
        Command::DiDist(a) => di_dist(a)?,
        Command::Wasserstein(a) => wasserstein(a)?,
        Command::FrechetMean(a) => frechet(a)?,
        Command::Cdf(a) => cdf(a)?,
        Command::Classify(a) => classify_cmd(a)?,
        Command::Evaluate(a) => evaluate_cmd(a)?,
        Command::Bench(a) => bench_cmd(a)?,
    };
    Ok(out.render(cli.json))
}

fn parse_flag<T: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse::<T>().map_err(|e| Failure::usage(e.to_string()))
}

impl DiagramFlags {
    fn essential(&self) -> CliResult<EssentialPolicy> {
        match &self.cap_essential {
            None => Ok(EssentialPolicy::Keep),
            Some(s) => match parse_flag::<EssentialPolicy>(s)? {
                EssentialPolicy::Keep | EssentialPolicy::Drop => Err(Failure::usage(format!(
                    "--cap-essential takes a number or 'max', got '{s}'"
                ))),
                p => Ok(p),
            },
        }
    }

    fn dims(&self) -> DimensionPolicy {
        match (self.mix_dims, self.dim) {
            (true, _) => DimensionPolicy::Pooled,
            (false, Some(k)) => DimensionPolicy::Only(k),
            (false, None) => DimensionPolicy::PerDimension,
        }
    }

    fn load(&self, path: &Path) -> CliResult<PersistenceDiagram> {
        let d = read_diagram(path).ctx(&path.display().to_string())?;
        let d = d.with_essential(self.essential()?).select(self.dims());
        if let Some(p) = d.iter().find(|p| p.is_essential()) {
            return Err(Failure {
                code: EXIT_DATA,
                message: format!(
                    "{}: point ({}, inf) in dimension {} has infinite death; use --cap-essential <value|max>",
                    path.display(),
                    fmt_f64(p.birth),
                    p.dim
                ),
            });
        }
        Ok(d)
    }
}

fn diagram_json(d: &PersistenceDiagram) -> Value {
    Value::Array(
        d.iter()
            .map(|p| json!([p.dim, num(p.birth), num(p.death)]))
            .collect(),
    )
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::from_error(Error::io(path, e), ""))
}

fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("t,theta\n");
    for (t, v) in curve {
        s.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*v)));
    }
    s
}

fn metric(s: &str) -> CliResult<Metric> {
    parse_flag(s)
}

fn ph(a: PhArgs) -> CliResult<Output> {
    let ctx = a.input.display().to_string();
    let space = if a.distance_matrix {
        FiniteMetricSpace::read(&a.input).ctx(&ctx)?
    } else {
        let points = read_point_cloud(&a.input).ctx(&ctx)?;
        distance_matrix(&points, metric(&a.metric)?).ctx(&ctx)?
    };
    let opts = VrOptions {
        max_dim: a.max_dim,
        max_radius: a.max_radius,
        simplex_cap: a.simplex_cap,
    };
    let d = vr_persistence(&space, &opts).ctx(&ctx)?;
    if let Some(out) = &a.out {
        write_diagram(&d, out).ctx("")?;
    }
    let mut o = Output::new();
    o.int("points", space.len()).int("pairs", d.len());
    for k in 0..=a.max_dim {
        let h = d.restrict_dim(k);
        o.int(format!("h{k}"), h.len());
        o.int(
            format!("h{k}_essential"),
            h.iter().filter(|p| p.is_essential()).count(),
        );
    }
    o.json_only("diagram", diagram_json(&d));
    Ok(o)
}

fn bottleneck(a: PairArgs) -> CliResult<Output> {
    let (da, db) = (a.diagram.load(&a.a)?, a.diagram.load(&a.b)?);
    let r = bottleneck_distance(&da, &db).ctx(&names(&[&a.a, &a.b]))?;
    let mut o = Output::new();
    o.float("distance", r.distance)
        .int("matched", r.matching.pairs.len())
        .int("unmatched_a", r.matching.unmatched_a.len())
        .int("unmatched_b", r.matching.unmatched_b.len());
    o.json_only("pairs", json!(r.matching.pairs));
    Ok(o)
}

fn di_dissim(a: DiDissimArgs) -> CliResult<Output> {
    let (da, db) = (a.diagram.load(&a.a)?, a.diagram.load(&a.b)?);
    let opts = DilationOptions {
        partitions: a.partitions,
        refine: a.refine,
    };
    let r = di_dissimilarity_with(&da, &db, &opts).ctx(&names(&[&a.a, &a.b]))?;
    if let Some(path) = &a.report_curve {
        write_text(path, &curve_csv(&r.curve))?;
    }
    let mut o = Output::new();
    o.float("value", r.value)
        .float("c_star", r.c_star)
        .float("c_min", r.interval.c_min)
        .float("c_max", r.interval.c_max)
        .float("d0", r.interval.d0)
        .float("error_bound", r.error_bound)
        .int("partitions", r.partitions);
    Ok(o)
}

fn di_dist(a: DiDistArgs) -> CliResult<Output> {
    let (da, db) = (a.diagram.load(&a.a)?, a.diagram.load(&a.b)?);
    let opts = ShiftOptions {
        partitions: a.partitions,
        epsilon: a.epsilon,
        crop_below: a.crop_below,
    };
    let r = di_distance_with(&da, &db, &opts).ctx(&names(&[&a.a, &a.b]))?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.report_curve {
        write_text(path, &curve_csv(&r.curve))?;
    }
    let mut o = Output::new();
    o.float("value", r.value)
        .float("s_star", r.s_star)
        .float("c_star", r.s_star.exp())
        .float("s_min", r.interval.s_min)
        .float("s_max", r.interval.s_max)
        .float("d", r.interval.d)
        .float("error_bound", r.error_bound)
        .int("partitions", r.partitions)
        .int("warnings", r.warnings.len());
    o.json_only("warning_messages", json!(r.warnings));
    Ok(o)
}

fn wasserstein(a: PairArgs) -> CliResult<Output> {
    let (da, db) = (a.diagram.load(&a.a)?, a.diagram.load(&a.b)?);
    let r = wasserstein_matching(&da, &db).ctx(&names(&[&a.a, &a.b]))?;
    let mut o = Output::new();
    o.float("distance", r.cost.sqrt())
        .float("cost", r.cost)
        .int("matched", r.pairs.len());
    o.json_only("pairs", json!(r.pairs));
    Ok(o)
}

fn frechet(a: FrechetArgs) -> CliResult<Output> {
    let diagrams = a
        .diagrams
        .iter()
        .map(|p| a.diagram.load(p))
        .collect::<CliResult<Vec<_>>>()?;
    let paths: Vec<&Path> = a.diagrams.iter().map(PathBuf::as_path).collect();
    let opts = FrechetOptions {
        max_iter: a.max_iter,
        tol: a.tol,
    };
    let r = frechet_mean_with(&diagrams, &opts).ctx(&names(&paths))?;
    if let Some(out) = &a.out {
        write_diagram(&r.mean, out).ctx("")?;
    }
    let mut o = Output::new();
    o.int("points", r.mean.len())
        .int("iterations", r.iterations)
        .float("functional", *r.trace.last().unwrap_or(&0.0));
    o.json_only(
        "trace",
        Value::Array(r.trace.iter().map(|v| num(*v)).collect()),
    );
    o.json_only("diagram", diagram_json(&r.mean));
    Ok(o)
}

fn cdf(a: CdfArgs) -> CliResult<Output> {
    let m = metric(&a.metric)?;
    if a.samples < 2 {
        return Err(Failure::usage("--samples must be at least 2"));
    }
    let (space, theory): (FiniteMetricSpace, Box<dyn Fn(f64) -> f64>) = match m {
        Metric::Euclidean => {
            if !(a.radius > 0.0 && a.radius.is_finite()) {
                return Err(Failure::usage(format!(
                    "--radius must be positive, got {}",
                    a.radius
                )));
            }
            let pts = circle_points(a.radius, &sample_angles(a.samples, a.seed));
            (distance_matrix(&pts, m).ctx("")?, Box::new(cdf_euclidean))
        }
        Metric::Poincare => {
            let pts = sample_circle(a.radius, a.samples, a.seed).ctx("")?;
            let r = a.radius;
            (
                distance_matrix(&pts, m).ctx("")?,
                Box::new(move |t| cdf_poincare(t, r)),
            )
        }
        Metric::CosineDissimilarity => {
            return Err(Failure::usage(
                "cdf supports the euclidean and poincare metrics",
            ));
        }
    };
    let curve = edge_cdf(&space).ctx("")?;
    let deviation = cdf_sup_deviation(&curve, &theory);
    if let Some(out) = &a.out {
        let mut s = String::from("threshold,empirical,theoretical\n");
        let mut last = f64::NAN;
        for &(t, f) in &curve {
            if t != last {
                s.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(t),
                    fmt_f64(f),
                    fmt_f64(theory(t))
                ));
                last = t;
            }
        }
        write_text(out, &s)?;
    }
    let mut o = Output::new();
    o.text("metric", a.metric.clone())
        .float("radius", a.radius)
        .int("samples", a.samples)
        .int("pairs", curve.len())
        .float("sup_deviation", deviation)
        .float("threshold", a.at)
        .float("empirical_at", edge_fraction_at(&curve, a.at))
        .float("theoretical_at", theory(a.at));
    Ok(o)
}

impl RetrievalFlags {
    fn settings(&self) -> CliResult<DiagramSettings> {
        Ok(DiagramSettings {
            metric: metric(&self.metric)?,
            vr: VrOptions {
                max_dim: self.dim,
                ..Default::default()
            },
            dims: DimensionPolicy::Only(self.dim),
            essential: EssentialPolicy::Drop,
        })
    }

    fn classify_options(&self, comparator: Comparator) -> CliResult<ClassifyOptions> {
        Ok(ClassifyOptions {
            direction: parse_flag::<Direction>(&self.direction)?,
            comparator,
            partitions: self.partitions,
        })
    }
}

fn read_templates(dir: &Path, settings: &DiagramSettings) -> CliResult<Vec<ClassTemplate>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::from_error(Error::io(dir, e), ""))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Failure::from_error(Error::io(dir, e), ""))?
            .path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure {
            code: EXIT_DATA,
            message: format!("{}: no template diagrams (*.csv) found", dir.display()),
        });
    }
    files
        .iter()
        .map(|f| {
            let diagram = read_diagram(f)
                .ctx(&f.display().to_string())?
                .select(settings.dims)
                .with_essential(settings.essential);
            Ok(ClassTemplate {
                label: f
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
                diagram,
                provenance: Provenance {
                    m: 0,
                    samples: 0,
                    seed: 0,
                },
            })
        })
        .collect()
}

fn has_subdirectories(dir: &Path) -> CliResult<bool> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::from_error(Error::io(dir, e), ""))?;
    Ok(entries.flatten().any(|e| e.path().is_dir()))
}

fn classify_cmd(a: ClassifyArgs) -> CliResult<Output> {
    let settings = a.retrieval.settings()?;
    let comparator = parse_flag::<Comparator>(&a.comparator)?;
    let opts = a.retrieval.classify_options(comparator)?;
    let dir_ctx = a.templates.display().to_string();
    let templates = if has_subdirectories(&a.templates)? {
        let dataset = read_dataset(&a.templates).ctx(&dir_ctx)?;
        let t = build_templates(
            &dataset,
            a.retrieval.m,
            a.retrieval.samples,
            a.retrieval.seed,
            &settings,
        )
        .ctx(&dir_ctx)?;
        if let Some(out) = &a.save_templates {
            std::fs::create_dir_all(out).map_err(|e| Failure::from_error(Error::io(out, e), ""))?;
            for tpl in &t {
                write_diagram(&tpl.diagram, out.join(format!("{}.csv", tpl.label))).ctx("")?;
            }
        }
        t
    } else {
        read_templates(&a.templates, &settings)?
    };
    let q_ctx = a.query.display().to_string();
    let points = read_point_cloud(&a.query).ctx(&q_ctx)?;
    let space = settings.space(&points).ctx(&q_ctx)?;
    let r =
        classify(&space, &templates, &settings, &opts).ctx(&names(&[&a.query, &a.templates]))?;
    let mut o = Output::new();
    o.text("best", r.best());
    for (label, v) in &r.ranked {
        o.float(format!("score.{label}"), *v);
    }
    o.json_only(
        "ranked",
        Value::Array(
            r.ranked
                .iter()
                .map(|(l, v)| json!({"label": l, "value": num(*v)}))
                .collect(),
        ),
    );
    Ok(o)
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult<Output> {
    let settings = a.retrieval.settings()?;
    let (dataset, ctx) = match &a.dataset {
        Some(dir) => {
            let ctx = dir.display().to_string();
            (read_dataset(dir).ctx(&ctx)?, ctx)
        }
        None => (synthetic_dataset(), "synthetic dataset".to_string()),
    };
    if let Some(dir) = &a.export_dataset {
        write_dataset(&dataset, dir).ctx("")?;
    }
    let opts = EvaluateOptions {
        proportions: a.proportions.clone(),
        trials: a.trials,
        seed: a.retrieval.seed,
        m: a.retrieval.m,
        samples: a.retrieval.samples,
        query_scale: a.query_scale,
        settings,
        classify: a.retrieval.classify_options(Comparator::Dilation)?,
    };
    let e = evaluate(&dataset, &opts).ctx(&ctx)?;
    if let Some(out) = &a.out {
        write_text(out, &e.to_csv())?;
    }
    let mut o = Output::new();
    o.int("classes", dataset.len()).int("trials", a.trials);
    for r in &e.rows {
        let p = fmt_f64(r.proportion);
        o.float(format!("top1.{}.{p}", r.distance), r.top1);
        o.float(format!("top2.{}.{p}", r.distance), r.top2);
    }
    o.json_only("rows", json!(e.rows));
    Ok(o)
}

fn bench_cmd(a: BenchArgs) -> CliResult<Output> {
    let opts = BenchOptions {
        sizes: a.sizes.clone(),
        seed: a.seed,
        partitions: a.partitions,
        fine_partitions: a.fine_partitions,
        repeats: a.repeats,
    };
    let r = bench(&opts).ctx("")?;
    if let Some(out) = &a.out {
        write_text(out, &r.to_csv())?;
    }
    let mut o = Output::new();
    o.float("slope", r.fit.slope)
        .float("r_squared", r.fit.r_squared);
    if a.fine_partitions > 0 {
        o.flag("agrees", r.agrees());
    }
    for rec in &r.records {
        let method = rec.method.name();
        o.float(
            format!("seconds.{method}.{}", rec.n_points),
            rec.wall_seconds,
        );
        o.float(format!("value.{method}.{}", rec.n_points), rec.value);
    }
    o.json_only("records", json!(r.records));
    Ok(o)
}
