//! End-to-end orchestration, artifact files and the scaling benchmark.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::allocation::{
    allocate_segments, batch_labels_to_samples, denoise_threshold, SegmentLabels,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result, Stage};
use crate::eval::{score, Score};
use crate::ingest::{
    forward_fill, load_delimited, make_ground_truth_batch_labels, LabelSeries, MultivariateSeries,
};
use crate::recovery::{glasso_batch, CIGraphSequence, PrecisionBatch};
use crate::synth::{generate_piecewise_gaussian, SyntheticSpec, WeightRange};
use crate::trajectory::TrajectorySignal;
use crate::windowing::{make_windows, window_matrices};

pub const SCHEMA_VERSION: u32 = 1;

pub const GRAPHS_FILE: &str = "graphs.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SAMPLE_LABELS_FILE: &str = "labels_samples.csv";
pub const BATCH_LABELS_FILE: &str = "labels_batches.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Wall-clock seconds spent in each stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub ingest: f64,
    pub windowing: f64,
    pub recovery: f64,
    pub trajectory: f64,
    pub allocation: f64,
    pub eval: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.ingest + self.windowing + self.recovery + self.trajectory + self.allocation + self.eval
    }
}

/// In-memory result of one segmentation run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub names: Vec<String>,
    pub n_samples: usize,
    pub starts: Vec<usize>,
    pub precisions: PrecisionBatch,
    pub graphs: CIGraphSequence,
    pub trajectory: TrajectorySignal,
    pub labels: SegmentLabels,
    pub truth_batch: Option<Vec<u8>>,
    pub score: Option<Score>,
    pub timings: StageTimings,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub n_samples: usize,
    pub n_variables: usize,
    pub n_windows: usize,
    pub accuracy: Option<f64>,
    pub total: Option<usize>,
    pub matching: Option<usize>,
    pub reference_accuracy: Option<f64>,
    pub lambda_per_chunk: Vec<f64>,
    pub unconverged_windows: usize,
    pub seconds: StageTimings,
    pub config: PipelineConfig,
}

impl EvalReport {
    pub fn new(output: &PipelineOutput, config: &PipelineConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n_samples: output.n_samples,
            n_variables: output.names.len(),
            n_windows: output.starts.len(),
            accuracy: output.score.map(|s| s.accuracy),
            total: output.score.map(|s| s.total),
            matching: output.score.map(|s| s.matching),
            reference_accuracy: config.reference_accuracy,
            lambda_per_chunk: output.precisions.lambda_used.clone(),
            unconverged_windows: output.precisions.unconverged(),
            seconds: output.timings.clone(),
            config: config.clone(),
        }
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs windowing through allocation (and scoring, when `truth` is given) on a
/// series without missing values.
pub fn segment_series(
    series: &MultivariateSeries,
    truth: Option<&LabelSeries>,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.validate()?;
    in_pool(config.threads, || segment_in_pool(series, truth, config))?
}

fn segment_in_pool(
    series: &MultivariateSeries,
    truth: Option<&LabelSeries>,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let windows = make_windows(series, config.window, config.stride)
        .map_err(|e| e.at_stage(Stage::Windowing))?;
    let correlations = window_matrices(&windows, config.variance_floor, config.covariance);
    let starts = windows.starts().to_vec();
    timings.windowing = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let precisions = glasso_batch(&correlations, config.window, &config.solver_settings())
        .map_err(|e| e.at_stage(Stage::Recovery))?;
    let graphs =
        CIGraphSequence::from_precisions(&precisions).map_err(|e| e.at_stage(Stage::Recovery))?;
    timings.recovery = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let trajectory = TrajectorySignal::compute(&graphs, config.metric)
        .map_err(|e| e.at_stage(Stage::Trajectory))?;
    timings.trajectory = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let signal = if config.normalize {
        &trajectory.d2g_norm
    } else {
        &trajectory.d2g
    };
    let denoised = denoise_threshold(signal, config.threshold);
    let batch_labels = allocate_segments(&denoised, &config.allocation());
    let sample_labels =
        batch_labels_to_samples(&batch_labels, &starts, config.window, series.len())
            .map_err(|e| e.at_stage(Stage::Allocation))?;
    timings.allocation = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let (truth_batch, score) = match truth {
        Some(truth) => {
            if truth.len() != series.len() {
                return Err(Error::LengthMismatch {
                    left: truth.len(),
                    right: series.len(),
                }
                .at_stage(Stage::Eval));
            }
            let tb = make_ground_truth_batch_labels(truth, &starts, config.window)
                .map_err(|e| e.at_stage(Stage::Eval))?;
            let s = score(&batch_labels, &tb).map_err(|e| e.at_stage(Stage::Eval))?;
            (Some(tb), Some(s))
        }
        None => (None, None),
    };
    timings.eval = clock.elapsed().as_secs_f64();

    Ok(PipelineOutput {
        names: series.names.clone(),
        n_samples: series.len(),
        starts,
        precisions,
        graphs,
        trajectory,
        labels: SegmentLabels {
            batch_labels,
            sample_labels,
        },
        truth_batch,
        score,
        timings,
    })
}

/// Reads a `sample_index,label` CSV (header required).
pub fn read_truth_csv(path: impl AsRef<Path>) -> Result<LabelSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let index: usize =
            record
                .get(0)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Parse {
                    row,
                    message: "bad sample_index".into(),
                })?;
        if index != labels.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected sample_index {}, found {index}", labels.len()),
            });
        }
        let label: u8 = record
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Parse {
                row,
                message: "bad label".into(),
            })?;
        labels.push(label);
    }
    LabelSeries::new(labels)
}

/// Reads a `batch_index,window_start,label` CSV as written by
/// [`write_artifacts`], returning window starts and labels.
pub fn read_batch_labels_csv(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<u8>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let mut starts = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |k: usize, what: &str| {
            record
                .get(k)
                .unwrap_or("")
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse {
                    row,
                    message: format!("bad {what}"),
                })
        };
        starts.push(field(1, "window_start")?);
        let label = field(2, "label")?;
        if label > 1 {
            return Err(Error::Parse {
                row,
                message: format!("label {label} is not 0 or 1"),
            });
        }
        labels.push(label as u8);
    }
    Ok((starts, labels))
}

/// Scores a batch-label CSV against a per-sample truth CSV.
pub fn evaluate_files(
    batch_labels: impl AsRef<Path>,
    truth: impl AsRef<Path>,
    window: usize,
) -> Result<Score> {
    let (starts, pred) =
        read_batch_labels_csv(batch_labels).map_err(|e| e.at_stage(Stage::Ingest))?;
    let truth = read_truth_csv(truth).map_err(|e| e.at_stage(Stage::Ingest))?;
    let expected = make_ground_truth_batch_labels(&truth, &starts, window)
        .map_err(|e| e.at_stage(Stage::Eval))?;
    score(&pred, &expected).map_err(|e| e.at_stage(Stage::Eval))
}

/// Loads the configured input, segments it and writes every artifact to
/// `config.out`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvalReport> {
    config.validate()?;
    let clock = Instant::now();
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input path given".into()).at_stage(Stage::Ingest))?;
    let (raw, file_truth) =
        load_delimited(input, config.format, &config.columns, config.labels_column)
            .map_err(|e| e.at_stage(Stage::Ingest))?;
    let series = forward_fill(&raw).map_err(|e| e.at_stage(Stage::Ingest))?;
    let truth = match (&config.truth, file_truth) {
        (Some(path), _) => Some(read_truth_csv(path).map_err(|e| e.at_stage(Stage::Ingest))?),
        (None, t) => t,
    };
    let ingest_seconds = clock.elapsed().as_secs_f64();

    let mut output = segment_series(&series, truth.as_ref(), config)?;
    output.timings.ingest = ingest_seconds;
    let report = EvalReport::new(&output, config);
    write_artifacts(&output, &report, &config.out).map_err(|e| e.at_stage(Stage::Output))?;
    Ok(report)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path, source })
}

fn io_err(path: PathBuf) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { path, source }
}

#[derive(Serialize)]
struct GraphEntry<'a> {
    index: usize,
    start: usize,
    lambda: f64,
    matrix: Vec<&'a [f64]>,
}

#[derive(Serialize)]
struct GraphsDocument<'a> {
    schema_version: u32,
    window: usize,
    stride: usize,
    variables: &'a [String],
    graphs: Vec<GraphEntry<'a>>,
}

/// Writes the graphs JSON, trajectory CSV, both label CSVs and the summary.
pub fn write_artifacts(output: &PipelineOutput, report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;

    // Graphs are symmetric, so column-major storage doubles as rows.
    let doc = GraphsDocument {
        schema_version: SCHEMA_VERSION,
        window: report.config.window,
        stride: report.config.stride,
        variables: &output.names,
        graphs: output
            .graphs
            .graphs
            .iter()
            .enumerate()
            .map(|(b, g): (usize, &DMatrix<f64>)| GraphEntry {
                index: b,
                start: output.starts[b],
                lambda: output.precisions.lambda_for_window(b),
                matrix: g.as_slice().chunks(g.nrows()).collect(),
            })
            .collect(),
    };
    let mut w = create(dir, GRAPHS_FILE)?;
    serde_json::to_writer(&mut w, &doc).map_err(|e| Error::Serialize(e.to_string()))?;
    w.flush().map_err(io_err(dir.join(GRAPHS_FILE)))?;

    let t = &output.trajectory;
    let mut w = create(dir, TRAJECTORY_FILE)?;
    let mut lines = String::from("batch_index,window_start,dG,d2G,d2G_norm\n");
    for (b, start) in output.starts.iter().enumerate() {
        let dg = t.dg.get(b).map(|v| v.to_string()).unwrap_or_default();
        lines.push_str(&format!(
            "{b},{start},{dg},{},{}\n",
            t.d2g[b], t.d2g_norm[b]
        ));
    }
    w.write_all(lines.as_bytes())
        .map_err(io_err(dir.join(TRAJECTORY_FILE)))?;
    w.flush().map_err(io_err(dir.join(TRAJECTORY_FILE)))?;

    let mut w = create(dir, BATCH_LABELS_FILE)?;
    let mut lines = String::from("batch_index,window_start,label\n");
    for (b, (start, label)) in output
        .starts
        .iter()
        .zip(&output.labels.batch_labels)
        .enumerate()
    {
        lines.push_str(&format!("{b},{start},{label}\n"));
    }
    w.write_all(lines.as_bytes())
        .map_err(io_err(dir.join(BATCH_LABELS_FILE)))?;
    w.flush().map_err(io_err(dir.join(BATCH_LABELS_FILE)))?;

    let mut w = create(dir, SAMPLE_LABELS_FILE)?;
    let mut lines = String::with_capacity(output.n_samples * 10);
    lines.push_str("sample_index,label\n");
    for (t, label) in output.labels.sample_labels.iter().enumerate() {
        lines.push_str(&format!("{t},{label}\n"));
    }
    w.write_all(lines.as_bytes())
        .map_err(io_err(dir.join(SAMPLE_LABELS_FILE)))?;
    w.flush().map_err(io_err(dir.join(SAMPLE_LABELS_FILE)))?;

    let mut w = create(dir, SUMMARY_FILE)?;
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| Error::Serialize(e.to_string()))?;
    w.flush().map_err(io_err(dir.join(SUMMARY_FILE)))?;
    Ok(())
}

/// Writes a series as generic CSV with a header of variable names.
pub fn write_series_csv(series: &MultivariateSeries, path: &Path) -> Result<()> {
    let mut w = File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(path.to_path_buf()))?;
    let mut text = series.names.join(",");
    text.push('\n');
    for row in series.values.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes())
        .map_err(io_err(path.to_path_buf()))?;
    w.flush().map_err(io_err(path.to_path_buf()))
}

pub fn write_truth_csv(truth: &LabelSeries, path: &Path) -> Result<()> {
    let mut text = String::from("sample_index,label\n");
    for (t, l) in truth.labels.iter().enumerate() {
        text.push_str(&format!("{t},{l}\n"));
    }
    fs::write(path, text).map_err(io_err(path.to_path_buf()))
}

/// Synthetic fixture shaped for `config`: `count` segments of `length` samples,
/// density 0.4, weights ±[0.2, 0.5], truth guard `Z·M`.
pub fn synthetic_spec_for(
    config: &PipelineConfig,
    dim: usize,
    count: usize,
    length: usize,
) -> SyntheticSpec {
    SyntheticSpec::uniform(
        config.seed,
        dim,
        count,
        length,
        0.4,
        WeightRange { min: 0.2, max: 0.5 },
        config.guard_z * config.window,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub seconds: f64,
    pub accuracy: f64,
}

/// Times the segmentation pipeline on synthetic series of each length in
/// `lengths` (segments of `segment_len` samples, the last one absorbing any
/// remainder). Generation is not timed. Each length runs `repeats` times and
/// the fastest run is kept.
pub fn bench_scaling(
    config: &PipelineConfig,
    dim: usize,
    lengths: &[usize],
    segment_len: usize,
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    lengths
        .iter()
        .map(|&n| {
            let count = (n / segment_len).max(1);
            let mut spec = synthetic_spec_for(config, dim, count, segment_len);
            if let Some(last) = spec.segments.last_mut() {
                last.length = n - (count - 1) * segment_len;
            }
            let data = generate_piecewise_gaussian(&spec)?;
            let mut best = f64::INFINITY;
            let mut accuracy = 0.0;
            for _ in 0..repeats.max(1) {
                let clock = Instant::now();
                let out = segment_series(&data.series, Some(&data.truth), config)?;
                best = best.min(clock.elapsed().as_secs_f64());
                accuracy = out.score.map(|s| s.accuracy).unwrap_or(f64::NAN);
            }
            Ok(BenchRow {
                n,
                seconds: best,
                accuracy,
            })
        })
        .collect()
}

pub fn write_bench_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut text = String::from("n,seconds,accuracy\n");
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r.n, r.seconds, r.accuracy));
    }
    fs::write(path, text).map_err(io_err(path.to_path_buf()))
}
