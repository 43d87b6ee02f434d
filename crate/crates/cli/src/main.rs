//! `tglad` command line: segment a series, generate synthetic data, score
//! labels and run the scaling benchmark.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tglad::allocation::GuardUnits;
use tglad::config::{PipelineConfig, PRESET_PAMAP2, PRESET_SYNTH};
use tglad::ingest::InputFormat;
use tglad::pipeline::{
    bench_scaling, evaluate_files, run_pipeline, write_bench_csv, write_series_csv, write_truth_csv,
};
use tglad::recovery::LambdaMode;
use tglad::synth::{generate_piecewise_gaussian, SyntheticSpec, WeightRange};
use tglad::trajectory::DistanceMetric;
use tglad::windowing::CovarianceKind;

#[derive(Parser, Debug)]
#[command(
    name = "tglad",
    version,
    about = "Time-series segmentation with conditional-independence graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment a series and write graphs, trajectory, labels and a summary.
    Segment(ConfigArgs),
    /// Generate a piecewise-stationary Gaussian series with known segments.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Score a batch-label CSV against a per-sample truth CSV.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Batch labels as written by `segment`.
        #[arg(long, default_value = "tglad-out/labels_batches.csv")]
        labels: PathBuf,
    },
    /// Time the pipeline on synthetic series of several lengths.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        /// Series lengths in samples.
        #[arg(long, value_delimiter = ',', default_value = "100000,200000")]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        segment_length: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

/// Configuration sources, lowest precedence first: built-in defaults, preset,
/// config file, flags.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long, env = "TGLAD_CONFIG")]
    config: Option<PathBuf>,
    /// Built-in preset: pamap2-paper or synth-default.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// generic-csv or pamap2.
    #[arg(long)]
    format: Option<InputFormat>,
    /// 0-based column indices of the variables.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
    #[arg(long)]
    labels_column: Option<usize>,
    /// Per-sample truth CSV (sample_index,label).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Window length M in samples.
    #[arg(long)]
    window: Option<usize>,
    /// Stride s in samples.
    #[arg(long)]
    stride: Option<usize>,
    /// Windows sharing one penalty.
    #[arg(long)]
    batch_size: Option<usize>,
    /// auto or a fixed penalty.
    #[arg(long)]
    lambda: Option<LambdaMode>,
    /// signed-sum, l1, l2 or frobenius.
    #[arg(long)]
    metric: Option<DistanceMetric>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    guard_z: Option<usize>,
    /// samples or batches.
    #[arg(long)]
    guard_units: Option<GuardUnits>,
    /// correlation or raw.
    #[arg(long)]
    covariance: Option<CovarianceKind>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    segments: usize,
    #[arg(long, default_value_t = 10_000)]
    segment_length: usize,
    /// Edge density of each segment's precision matrix.
    #[arg(long, default_value_t = 0.4)]
    density: f64,
    #[arg(long, default_value_t = 0.2)]
    weight_min: f64,
    #[arg(long, default_value_t = 0.5)]
    weight_max: f64,
}

fn preset_text(name: &str) -> Result<&'static str> {
    match name {
        "pamap2-paper" => Ok(PRESET_PAMAP2),
        "synth-default" => Ok(PRESET_SYNTH),
        other => bail!("unknown preset '{other}' (expected pamap2-paper or synth-default)"),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut table = toml::Table::new();
        if let Some(name) = &self.preset {
            table.extend(toml::from_str::<toml::Table>(preset_text(name)?)?);
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let file: toml::Table = toml::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            table.extend(file);
        }
        let mut config = PipelineConfig::from_toml_str(&toml::to_string(&table)?)?;
        self.apply(&mut config);
        config.validate()?;
        Ok(config)
    }

    fn apply(&self, c: &mut PipelineConfig) {
        fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
            if let Some(v) = flag {
                *slot = v.clone();
            }
        }
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.labels_column.is_some() {
            c.labels_column = self.labels_column;
        }
        if self.truth.is_some() {
            c.truth = self.truth.clone();
        }
        set(&mut c.format, &self.format);
        set(&mut c.columns, &self.columns);
        set(&mut c.window, &self.window);
        set(&mut c.stride, &self.stride);
        set(&mut c.chunk_size, &self.batch_size);
        set(&mut c.lambda, &self.lambda);
        set(&mut c.metric, &self.metric);
        set(&mut c.threshold, &self.threshold);
        set(&mut c.guard_z, &self.guard_z);
        set(&mut c.guard_units, &self.guard_units);
        set(&mut c.covariance, &self.covariance);
        set(&mut c.max_iterations, &self.max_iters);
        set(&mut c.seed, &self.seed);
        set(&mut c.threads, &self.threads);
        set(&mut c.out, &self.out);
    }
}

fn segment(args: &ConfigArgs) -> Result<()> {
    let config = args.resolve()?;
    let report = run_pipeline(&config)?;
    log::info!("wrote artifacts to {}", config.out.display());
    match report.accuracy {
        Some(a) => println!("windows={} accuracy={a:.4}", report.n_windows),
        None => println!("windows={}", report.n_windows),
    }
    Ok(())
}

fn synth(args: &ConfigArgs, s: &SynthArgs) -> Result<()> {
    let config = args.resolve()?;
    let spec = SyntheticSpec::uniform(
        config.seed,
        s.dim,
        s.segments,
        s.segment_length,
        s.density,
        WeightRange {
            min: s.weight_min,
            max: s.weight_max,
        },
        config.guard_z * config.window,
    );
    let data = generate_piecewise_gaussian(&spec)?;
    let out = &config.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_series_csv(&data.series, &out.join("series.csv"))?;
    write_truth_csv(&data.truth, &out.join("truth.csv"))?;
    let precisions: Vec<Vec<Vec<f64>>> = data
        .precisions
        .iter()
        .map(|p| p.row_iter().map(|r| r.iter().copied().collect()).collect())
        .collect();
    let sidecar = serde_json::json!({
        "seed": config.seed,
        "boundaries": data.boundaries,
        "segment_lengths": spec.segments.iter().map(|g| g.length).collect::<Vec<_>>(),
        "truth_guard": spec.truth_guard,
        "precisions": precisions,
    });
    write_json(&out.join("precisions.json"), &sidecar)?;
    println!(
        "samples={} variables={}",
        data.series.len(),
        data.series.dim()
    );
    Ok(())
}

fn eval(args: &ConfigArgs, labels: &Path) -> Result<()> {
    let config = args.resolve()?;
    let Some(truth) = &config.truth else {
        bail!("eval needs --truth (or `truth` in the config)");
    };
    let score = evaluate_files(labels, truth, config.window)?;
    println!("{}", serde_json::to_string(&score)?);
    Ok(())
}

fn bench(
    args: &ConfigArgs,
    lengths: &[usize],
    dim: usize,
    segment_length: usize,
    repeats: usize,
) -> Result<()> {
    let config = args.resolve()?;
    let rows = bench_scaling(&config, dim, lengths, segment_length, repeats)?;
    fs::create_dir_all(&config.out)
        .with_context(|| format!("creating {}", config.out.display()))?;
    let path = config.out.join("bench.csv");
    write_bench_csv(&rows, &path)?;
    for r in &rows {
        println!(
            "n={} seconds={:.3} accuracy={:.4}",
            r.n, r.seconds, r.accuracy
        );
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !text.ends_with(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Segment(args) => segment(args),
        Command::Synth { config, synth: s } => synth(config, s),
        Command::Eval { config, labels } => eval(config, labels),
        Command::Bench {
            config,
            lengths,
            dim,
            segment_length,
            repeats,
        } => bench(config, lengths, *dim, *segment_length, *repeats),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
