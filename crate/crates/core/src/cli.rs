//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::datagen::{self, GenSpec};
use crate::density::{fc_knn, knn_density, DenoiseResult, FcParams, NeighborCount};
use crate::error::{Error, ErrorCategory, Result};
use crate::evaluation::{evaluate, EvalReport};
use crate::fission_core::{fission_cluster, Partition, SplitRecord, ThresholdMode};
use crate::metricspace::{distance_matrix, Dataset, DistanceMatrix, Metric};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_ALGORITHMIC: i32 = 5;

const AFTER_HELP: &str = "\
Exit codes:
  0  success
  2  usage error (bad or missing arguments)
  3  I/O error (unreadable input, unwritable output)
  4  validation error (malformed data, bad parameter values)
  5  algorithmic error (e.g. denoising left fewer than 2 points)

Environment:
  FC_THREADS  worker threads for parallel stages (0 or unset = all cores)";

#[derive(Parser, Debug)]
#[command(name = "fission", version, about = "Fission clustering and its KNN-denoised variant")]
#[command(after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster a dataset and write labels, a JSON report and an optional plot.
    Cluster(ClusterArgs),
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Score predicted labels against ground truth.
    Evaluate(EvaluateArgs),
    /// Run FC-KNN over a grid of t and n0 values.
    Sweep(SweepArgs),
    /// Time the pipeline stages on generated data of growing size.
    Bench(BenchArgs),
    /// Draw a 2-D dataset as an SVG scatter plot, one colour per cluster.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// CSV file; a last column named `label` is read as ground truth.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generator recipe (JSON) to build the dataset from.
    #[arg(long, value_name = "SPEC.json")]
    generate: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Fc,
    FcKnn,
}

#[derive(Args, Debug)]
struct AlgoArgs {
    #[arg(long, value_enum, default_value = "fc-knn")]
    algorithm: Algorithm,
    /// euclidean, manhattan or minkowski:p
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    /// Denoising stops once MC > t * d0 (fc-knn only).
    #[arg(long)]
    t: Option<f64>,
    /// KNN neighbourhood: an integer or a percentage of n such as 2%.
    #[arg(long)]
    n0: Option<NeighborCount>,
    /// global, per-subset or scaled (t * d0). Defaults: global for fc,
    /// scaled for fc-knn.
    #[arg(long)]
    threshold_mode: Option<ThresholdMode>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Overrides the seed of the --generate recipe.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    labels_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    plot_out: Option<PathBuf>,
    /// Add wall-clock timings to the report (makes it non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Recipe {
    #[arg(long, value_name = "SPEC.json")]
    generate: Option<PathBuf>,
    /// Use the default recipe of a kind: blobs, imbalance, annulus_blobs,
    /// grid_line or bridge_families.
    #[arg(long)]
    kind: Option<String>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    recipe: Recipe,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Predicted labels, one per line.
    #[arg(long)]
    labels: PathBuf,
    /// Ground-truth labels, one per line.
    #[arg(long, conflicts_with_all = ["input", "generate"])]
    truth: Option<PathBuf>,
    /// CSV with a label column to take ground truth from.
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,
    #[arg(long, value_name = "SPEC.json")]
    generate: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    /// Inclusive t grid as MIN:MAX:STEP.
    #[arg(long, default_value = "2:13:1")]
    t_range: String,
    /// Comma-separated neighbourhood sizes, e.g. 2%,3% or 5,10.
    #[arg(long, default_value = "2%,3%", value_delimiter = ',')]
    n0: Vec<NeighborCount>,
    #[arg(long)]
    threshold_mode: Option<ThresholdMode>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated dataset sizes (each >= 10).
    #[arg(long, default_value = "1000,2000,4000", value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Fixed neighbourhood size used at every n.
    #[arg(long, default_value_t = 20)]
    n0: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    /// Cluster labels to colour by; the dataset's own labels otherwise.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    plot_out: PathBuf,
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Io => EXIT_IO,
        ErrorCategory::Validation => EXIT_VALIDATION,
        ErrorCategory::Algorithmic => EXIT_ALGORITHMIC,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("FC_THREADS must be a non-negative integer, got {raw:?}")))?;
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn load_source(source: &Source, seed: Option<u64>) -> Result<Dataset> {
    match (&source.input, &source.generate) {
        (Some(path), _) => {
            if seed.is_some() {
                warn("--seed has no effect with --input");
            }
            datagen::load_csv(path)
        }
        (None, Some(spec)) => load_generated(spec, seed),
        (None, None) => Err(Error::Invalid("one of --input or --generate is required".into())),
    }
}

fn load_generated(spec: &Path, seed: Option<u64>) -> Result<Dataset> {
    let mut spec = GenSpec::load(spec)?;
    if let Some(seed) = seed {
        spec = spec.with_seed(seed);
    }
    datagen::generate(&spec)
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Fully resolved clustering configuration.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub fc_knn: bool,
    pub params: FcParams,
}

impl RunConfig {
    fn from_args(a: &AlgoArgs) -> Self {
        let fc_knn = a.algorithm == Algorithm::FcKnn;
        let mode = a.threshold_mode.unwrap_or(if fc_knn {
            ThresholdMode::Scaled
        } else {
            ThresholdMode::Global
        });
        if !fc_knn {
            if a.n0.is_some() {
                warn("--n0 is ignored by --algorithm fc");
            }
            if a.t.is_some() && mode != ThresholdMode::Scaled {
                warn("--t is ignored by --algorithm fc unless --threshold-mode scaled");
            }
        }
        let defaults = FcParams::default();
        RunConfig {
            fc_knn,
            params: FcParams {
                t: a.t.unwrap_or(defaults.t),
                n0: a.n0.unwrap_or(defaults.n0),
                metric: a.metric,
                threshold_mode: mode,
                ..defaults
            },
        }
    }
}

/// Output of one clustering run.
pub struct RunOutcome {
    pub partition: Partition,
    pub denoise: Option<DenoiseResult>,
    pub warnings: Vec<String>,
}

/// Cluster `dm` as `cfg` says.
pub fn run_clustering(dm: &DistanceMatrix, cfg: &RunConfig) -> Result<RunOutcome> {
    if cfg.fc_knn {
        let out = fc_knn(dm, &cfg.params)?;
        Ok(RunOutcome {
            partition: out.partition,
            denoise: Some(out.denoise),
            warnings: out.warnings,
        })
    } else {
        if cfg.params.threshold_mode == ThresholdMode::Scaled && !(cfg.params.t > 0.0) {
            return Err(Error::Invalid(format!("t must be > 0, got {}", cfg.params.t)));
        }
        Ok(RunOutcome {
            partition: fission_cluster(dm, cfg.params.threshold_mode.stop_rule(cfg.params.t))?,
            denoise: None,
            warnings: Vec::new(),
        })
    }
}

#[derive(Serialize)]
struct Timings {
    distance_matrix_ms: f64,
    cluster_ms: f64,
}

#[derive(Serialize)]
struct ClusterReport<'a> {
    dataset: &'a str,
    n: usize,
    dim: usize,
    algorithm: &'static str,
    metric: String,
    threshold_mode: ThresholdMode,
    t: Option<f64>,
    n0: Option<usize>,
    k: usize,
    cluster_sizes: Vec<usize>,
    split_trace: &'a [SplitRecord],
    denoise: Option<&'a DenoiseResult>,
    warnings: &'a [String],
    evaluation: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<Timings>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("cannot encode report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Write every output only after all of them have been rendered.
fn write_outputs(outputs: &[(&Path, &[u8])]) -> Result<()> {
    for (path, bytes) in outputs {
        datagen::write_atomic(path, bytes)?;
    }
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> Result<()> {
    let cfg = RunConfig::from_args(&a.algo);
    let ds = load_source(&a.source, a.seed)?;
    if !cfg.params.metric.is_proper() {
        warn(&format!(
            "{} violates the triangle inequality; cracks may not separate clusters",
            cfg.params.metric
        ));
    }
    if a.plot_out.is_some() && ds.dim() != 2 {
        return Err(plot_dim_error());
    }

    let started = Instant::now();
    let dm = distance_matrix(&ds, cfg.params.metric)?;
    let matrix_time = started.elapsed();
    let started = Instant::now();
    let outcome = run_clustering(&dm, &cfg)?;
    let cluster_time = started.elapsed();
    for w in &outcome.warnings {
        warn(w);
    }

    let partition = &outcome.partition;
    let evaluation = ds.labels().map(|truth| evaluate(&partition.labels, truth)).transpose()?;
    let report = ClusterReport {
        dataset: ds.name(),
        n: ds.len(),
        dim: ds.dim(),
        algorithm: if cfg.fc_knn { "fc-knn" } else { "fc" },
        metric: cfg.params.metric.to_string(),
        threshold_mode: cfg.params.threshold_mode,
        t: (cfg.fc_knn || cfg.params.threshold_mode == ThresholdMode::Scaled).then_some(cfg.params.t),
        n0: outcome.denoise.as_ref().map(|d| d.n0),
        k: partition.k,
        cluster_sizes: partition.clusters().iter().map(Vec::len).collect(),
        split_trace: &partition.split_trace,
        denoise: outcome.denoise.as_ref(),
        warnings: &outcome.warnings,
        evaluation,
        timings: a.timings.then(|| Timings {
            distance_matrix_ms: millis(matrix_time),
            cluster_ms: millis(cluster_time),
        }),
    };

    let report_text = to_json(&report)?;
    let labels_text = datagen::labels_text(partition)?;
    let svg = a.plot_out.as_ref().map(|_| render_svg(&ds, &partition.labels)).transpose()?;
    let mut outputs: Vec<(&Path, &[u8])> = Vec::new();
    if let Some(p) = &a.labels_out {
        outputs.push((p, labels_text.as_bytes()));
    }
    if let Some(p) = &a.report_out {
        outputs.push((p, report_text.as_bytes()));
    }
    if let (Some(p), Some(svg)) = (&a.plot_out, &svg) {
        outputs.push((p, svg.as_bytes()));
    }
    write_outputs(&outputs)?;
    if a.report_out.is_none() {
        print!("{report_text}");
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut spec = match (&a.recipe.generate, &a.recipe.kind) {
        (Some(path), _) => GenSpec::load(path)?,
        (None, Some(kind)) => GenSpec::default_of(kind, 1)?,
        (None, None) => return Err(Error::Invalid("one of --generate or --kind is required".into())),
    };
    if let Some(seed) = a.seed {
        spec = spec.with_seed(seed);
    }
    let ds = datagen::generate(&spec)?;
    datagen::save_csv(&ds, &a.output)?;
    eprintln!(
        "wrote {} points ({} classes) to {}",
        ds.len(),
        ds.class_count().unwrap_or(0),
        a.output.display()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let pred = datagen::load_labels(&a.labels)?;
    let truth = match (&a.truth, &a.input, &a.generate) {
        (Some(path), _, _) => datagen::load_labels(path)?.labels,
        (None, Some(path), _) => labels_of(&datagen::load_csv(path)?)?,
        (None, None, Some(spec)) => labels_of(&load_generated(spec, a.seed)?)?,
        (None, None, None) => {
            return Err(Error::Invalid("ground truth needs --truth, --input or --generate".into()))
        }
    };
    let report = to_json(&evaluate(&pred.labels, &truth)?)?;
    match &a.report_out {
        Some(path) => datagen::write_atomic(path, report.as_bytes()),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn labels_of(ds: &Dataset) -> Result<Vec<usize>> {
    ds.labels()
        .map(<[usize]>::to_vec)
        .ok_or_else(|| Error::Invalid(format!("dataset {} has no label column", ds.name())))
}

/// Parse `MIN:MAX:STEP` into the inclusive grid `MIN, MIN+STEP, ...`.
pub fn parse_t_range(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Invalid(format!("bad t range {text:?}: {why}"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("expected MIN:MAX:STEP"))?;
    let [lo, hi, step] = parts[..] else {
        return Err(bad("expected MIN:MAX:STEP"));
    };
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if lo > hi {
        return Err(bad("MIN is greater than MAX"));
    }
    if !(step > 0.0) {
        return Err(bad("STEP must be > 0"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub n0: String,
    pub n0_resolved: usize,
    pub k: usize,
    pub accuracy: Option<f64>,
    pub separated: bool,
    pub r_final: f64,
}

/// A maximal run of consecutive t values (for one n0) with the same k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plateau {
    pub n0: String,
    pub t_min: f64,
    pub t_max: f64,
    pub k: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub dataset: String,
    pub n: usize,
    pub metric: String,
    pub threshold_mode: ThresholdMode,
    pub rows: Vec<SweepRow>,
    pub plateaus: Vec<Plateau>,
}

/// Rows are grouped by n0 with t ascending inside each group.
pub fn plateaus(rows: &[SweepRow]) -> Vec<Plateau> {
    let mut out: Vec<Plateau> = Vec::new();
    for row in rows {
        match out.last_mut() {
            Some(p) if p.n0 == row.n0 && p.k == row.k => {
                p.t_max = row.t;
                p.runs += 1;
            }
            _ => out.push(Plateau {
                n0: row.n0.clone(),
                t_min: row.t,
                t_max: row.t,
                k: row.k,
                runs: 1,
            }),
        }
    }
    out
}

/// FC-KNN over every `(n0, t)` pair, sharing one distance matrix.
pub fn sweep(
    ds: &Dataset,
    metric: Metric,
    mode: ThresholdMode,
    ts: &[f64],
    n0s: &[NeighborCount],
) -> Result<SweepReport> {
    if ts.is_empty() || n0s.is_empty() {
        return Err(Error::Invalid("sweep needs at least one t and one n0".into()));
    }
    let dm = distance_matrix(ds, metric)?;
    let mut rows = Vec::with_capacity(ts.len() * n0s.len());
    for &n0 in n0s {
        for &t in ts {
            let params = FcParams {
                t,
                n0,
                metric,
                threshold_mode: mode,
                ..FcParams::default()
            };
            let out = fc_knn(&dm, &params)?;
            let accuracy = ds
                .labels()
                .map(|truth| crate::evaluation::accuracy(&out.partition.labels, truth))
                .transpose()?
                .map(|(acc, _)| acc);
            rows.push(SweepRow {
                t,
                n0: n0.to_string(),
                n0_resolved: out.denoise.n0,
                k: out.partition.k,
                accuracy,
                separated: out.denoise.separated,
                r_final: out.denoise.r_final,
            });
        }
    }
    let plateaus = plateaus(&rows);
    Ok(SweepReport {
        dataset: ds.name().to_string(),
        n: ds.len(),
        metric: metric.to_string(),
        threshold_mode: mode,
        rows,
        plateaus,
    })
}

pub fn sweep_table(report: &SweepReport) -> String {
    let mut out = String::from("n0\tt\tk\taccuracy\tseparated\tr_final\n");
    for r in &report.rows {
        let acc = r.accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", r.n0, r.t, r.k, acc, r.separated, r.r_final);
    }
    out.push_str("\nplateaus (n0: t_min..t_max -> k)\n");
    for p in &report.plateaus {
        let _ = writeln!(out, "{}: {}..{} -> {} ({} runs)", p.n0, p.t_min, p.t_max, p.k, p.runs);
    }
    out
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let ts = parse_t_range(&a.t_range)?;
    let ds = load_source(&a.source, a.seed)?;
    let mode = a.threshold_mode.unwrap_or(ThresholdMode::Scaled);
    let report = sweep(&ds, a.metric, mode, &ts, &a.n0)?;
    if let Some(path) = &a.report_out {
        datagen::write_atomic(path, to_json(&report)?.as_bytes())?;
    }
    print!("{}", sweep_table(&report));
    Ok(())
}

/// Median wall-clock time of each pipeline stage at one size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub n0: usize,
    pub repeats: usize,
    pub distance_matrix_ms: f64,
    pub knn_density_ms: f64,
    pub fc_ms: f64,
    /// `None` when FC-KNN fails at this size (e.g. too few points left).
    pub fc_knn_ms: Option<f64>,
}

/// Five-blob data of exactly `n` points.
pub fn bench_dataset(n: usize, seed: u64) -> Result<Dataset> {
    let spec = GenSpec::from_json(&format!(
        r#"{{"kind": "blobs", "k": 5, "points_per_cluster": {}, "seed": {seed}}}"#,
        n.div_ceil(5)
    ))?;
    let full = datagen::generate(&spec)?;
    Dataset::new(format!("bench-{n}"), full.points().take(n).map(<[f64]>::to_vec).collect())
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2.0
    }
}

fn time_ms<T>(f: impl FnOnce() -> Result<T>) -> Result<f64> {
    let started = Instant::now();
    std::hint::black_box(f()?);
    Ok(millis(started.elapsed()))
}

/// `fc` and `fc_knn` columns include building the distance matrix.
pub fn bench(sizes: &[usize], repeats: usize, n0: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || repeats == 0 {
        return Err(Error::Invalid("bench needs at least one size and one repeat".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 10) {
        return Err(Error::Invalid(format!("bench sizes must be >= 10, got {n}")));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let ds = bench_dataset(n, seed)?;
        let params = FcParams {
            n0: NeighborCount::Fixed(n0),
            ..FcParams::default()
        };
        params.validate(n)?;
        let dm = distance_matrix(&ds, Metric::Euclidean)?;
        let mut samples = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for _ in 0..repeats {
            samples[0].push(time_ms(|| distance_matrix(&ds, Metric::Euclidean))?);
            samples[1].push(time_ms(|| knn_density(&dm, n0))?);
            samples[2].push(time_ms(|| {
                let dm = distance_matrix(&ds, Metric::Euclidean)?;
                fission_cluster(&dm, Default::default())
            })?);
            match time_ms(|| {
                let dm = distance_matrix(&ds, Metric::Euclidean)?;
                fc_knn(&dm, &params)
            }) {
                Ok(ms) => samples[3].push(ms),
                Err(e) if e.category() == ErrorCategory::Algorithmic => {
                    warn(&format!("fc-knn at n = {n}: {e}"));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let fck = (samples[3].len() == repeats).then(|| median(std::mem::take(&mut samples[3])));
        let [dmt, knn, fc, _] = samples.map(|s| if s.is_empty() { f64::NAN } else { median(s) });
        rows.push(BenchRow {
            n,
            n0,
            repeats,
            distance_matrix_ms: dmt,
            knn_density_ms: knn,
            fc_ms: fc,
            fc_knn_ms: fck,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,n0,repeats,distance_matrix_ms,knn_density_ms,fc_ms,fc_knn_ms\n");
    for r in rows {
        let fck = r.fc_knn_ms.map_or_else(String::new, |ms| format!("{ms:.3}"));
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.3},{:.3},{fck}",
            r.n, r.n0, r.repeats, r.distance_matrix_ms, r.knn_density_ms, r.fc_ms
        );
    }
    out
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let table = bench_csv(&bench(&a.sizes, a.repeats, a.n0, a.seed)?);
    match &a.output {
        Some(path) => datagen::write_atomic(path, table.as_bytes()),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn plot_dim_error() -> Error {
    Error::Invalid("plot requires 2-D data".into())
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const SVG_SIZE: f64 = 600.0;
const SVG_MARGIN: f64 = 20.0;

/// SVG scatter of a 2-D dataset coloured by `labels`. The bytes depend only
/// on the inputs.
pub fn render_svg(ds: &Dataset, labels: &[usize]) -> Result<String> {
    if ds.dim() != 2 {
        return Err(plot_dim_error());
    }
    if labels.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            left: labels.len(),
            right: ds.len(),
        });
    }
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in ds.points() {
        x_lo = x_lo.min(p[0]);
        x_hi = x_hi.max(p[0]);
        y_lo = y_lo.min(p[1]);
        y_hi = y_hi.max(p[1]);
    }
    let span = (x_hi - x_lo).max(y_hi - y_lo);
    let scale = if span > 0.0 { (SVG_SIZE - 2.0 * SVG_MARGIN) / span } else { 1.0 };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, &label) in ds.points().zip(labels) {
        let cx = SVG_MARGIN + (p[0] - x_lo) * scale;
        // SVG y grows downwards.
        let cy = SVG_SIZE - SVG_MARGIN - (p[1] - y_lo) * scale;
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{}"/>"#,
            PALETTE[label % PALETTE.len()]
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let ds = load_source(&a.source, a.seed)?;
    if ds.dim() != 2 {
        return Err(plot_dim_error());
    }
    let labels = match &a.labels {
        Some(path) => datagen::load_labels(path)?.labels,
        None => labels_of(&ds)?,
    };
    datagen::write_atomic(&a.plot_out, render_svg(&ds, &labels)?.as_bytes())
}
