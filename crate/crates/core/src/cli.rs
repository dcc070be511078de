//! Command-line front end: `compress`, `decompress`, `eval` and `benchmark`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 a constrained
//! run ended above its budget, 4 I/O or decode failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::Error;
use crate::imageio::{self, PixelDataset};
use crate::siren::SirenConfig;
use crate::trainer::{self, standard_target, Method, MetricsLog, TrainConfig, TrainedModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const SUMMARY_HEADER: &str = "image,method,target_bpp,best_feasible_psnr,final_bpp,wall_s";

#[derive(Debug, Parser)]
#[command(
    name = "sparse-inr",
    version,
    about = "Compress images as sparse sinusoidal networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a network to an image and write the compressed model.
    Compress(CompressArgs),
    /// Render a compressed model to a PNG.
    Decompress(DecompressArgs),
    /// Report PSNR and size of a compressed model against an image.
    Eval(EvalArgs),
    /// Run a grid of images × methods × targets.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressArgs {
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Budget in bits per pixel (loonie and mp only).
    #[arg(long)]
    pub target_bpp: Option<f64>,
    /// Architecture as `LAYERSxWIDTH`, e.g. `5x30`.
    #[arg(long)]
    pub arch: Option<String>,
    /// One of the standard budgets 0.07, 0.15, 0.3, 0.6; picks the
    /// architecture and dual learning rate.
    #[arg(long)]
    pub paper_target: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output `.l0ne` model.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metrics CSV (defaults to the model path with a `.csv` extension).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub lr_weights: Option<f64>,
    #[arg(long)]
    pub lr_gates: Option<f64>,
    #[arg(long)]
    pub lr_dual: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Reset the multiplier to zero whenever the constraint is met.
    #[arg(long)]
    pub restarts: Option<bool>,
    /// JSON file with any of the above; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DecompressArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub dir: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Initial architecture for loonie and mp instead of the standard one.
    #[arg(long)]
    pub arch: Option<String>,
    /// Architecture for coin instead of the standard one.
    #[arg(long)]
    pub coin_arch: Option<String>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub lr_dual: Option<f64>,
    /// Rows in summary format from other codecs, appended to the summary.
    #[arg(long)]
    pub extra_csv: Option<PathBuf>,
    /// Runs executed concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. }
            | Error::Image { .. }
            | Error::UnsupportedFormat(_)
            | Error::EmptyImage { .. }
            | Error::Decode(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Compress(a) => cmd_compress(a),
        Command::Decompress(a) => cmd_decompress(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("bad config {}: {e}", path.display())))
}

fn parse_arch(s: &str) -> Result<SirenConfig, Failure> {
    s.parse().map_err(|e: Error| Failure::usage(e.to_string()))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::io(format!("{}: {e}", path.display()))
}

macro_rules! merge_fields {
    ($flags:ident, $file:ident; $($f:ident),*) => {
        $( $flags.$f = $flags.$f.or($file.$f); )*
    };
}

impl CompressArgs {
    fn merged(mut self) -> Result<Self, Failure> {
        if let Some(path) = self.config.clone() {
            let file: CompressArgs = read_json(&path)?;
            merge_fields!(self, file; image, method, target_bpp, arch, paper_target, steps, seed,
                out, metrics, lr_weights, lr_gates, lr_dual, eval_every, restarts);
        }
        Ok(self)
    }
}

impl BenchmarkArgs {
    fn merged(mut self) -> Result<Self, Failure> {
        if let Some(path) = self.config.clone() {
            let file: BenchmarkArgs = read_json(&path)?;
            merge_fields!(self, file; dir, methods, targets, steps, seed, out_dir, arch, coin_arch,
                eval_every, lr_dual, extra_csv, jobs);
        }
        Ok(self)
    }
}

/// Training configuration from compress flags, before the image is known.
pub fn resolve_train_config(args: &CompressArgs) -> Result<TrainConfig, Failure> {
    let method = args
        .method
        .ok_or_else(|| Failure::usage("--method is required"))?;
    let mut config = match args.paper_target {
        Some(t) => {
            if args.arch.is_some() {
                return Err(Failure::usage(
                    "--paper-target picks the architecture; drop --arch",
                ));
            }
            if args.target_bpp.is_some() {
                return Err(Failure::usage(
                    "--paper-target sets the budget; drop --target-bpp",
                ));
            }
            TrainConfig::for_standard_target(method, t)?
        }
        None => {
            let arch = args
                .arch
                .as_deref()
                .ok_or_else(|| Failure::usage("one of --arch or --paper-target is required"))?;
            TrainConfig::for_method(method, parse_arch(arch)?, args.target_bpp)?
        }
    };
    if let Some(v) = args.steps {
        config.steps = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.lr_weights {
        config.lr_weights = v;
    }
    if let Some(v) = args.lr_gates {
        config.lr_gates = v;
    }
    if let Some(v) = args.lr_dual {
        config.lr_dual = v;
    }
    if let Some(v) = args.eval_every {
        config.eval_every = v;
    }
    if let Some(v) = args.restarts {
        config.restarts = v;
    }
    Ok(config)
}

#[derive(Serialize)]
struct ResolvedCompress<'a> {
    image: &'a Path,
    out: &'a Path,
    metrics: &'a Path,
    #[serde(flatten)]
    train: &'a TrainConfig,
}

fn write_metrics(log: &MetricsLog, path: &Path, comment: &str) -> Result<(), Failure> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    log.write_csv(&mut out, Some(comment))
        .map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn is_infeasible(config: &TrainConfig, model: &TrainedModel, pixels: usize) -> bool {
    config.method == Method::Loonie
        && config
            .target_bpp
            .is_some_and(|t| model.casted_bpp(pixels).bpp > t)
}

pub fn cmd_compress(args: CompressArgs) -> CmdResult {
    let args = args.merged()?;
    let config = resolve_train_config(&args)?;
    let image = args
        .image
        .as_deref()
        .ok_or_else(|| Failure::usage("--image is required"))?;
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| Failure::usage("--out is required"))?;
    let metrics = args
        .metrics
        .clone()
        .unwrap_or_else(|| out.with_extension("csv"));
    let dataset = imageio::load_image(image)?;
    config.validate(dataset.pixel_count())?;

    let (model, log) = trainer::train(&config, &dataset)?;
    codec::save_model(&model, dataset.height, dataset.width, out)?;
    let resolved = ResolvedCompress {
        image,
        out,
        metrics: &metrics,
        train: &config,
    };
    let json = serde_json::to_string(&resolved).expect("config serializes");
    write_metrics(&log, &metrics, &format!("config: {json}"))?;

    let size = codec::size_report(&model, dataset.height, dataset.width);
    let fmt_opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.4}"));
    println!(
        "method={} arch={} psnr_f16={} best_feasible_psnr={} bpp={:.5} file_bpp={:.5} active_params={}",
        config.method,
        config.arch,
        fmt_opt(log.last().map(|r| r.psnr_f16)),
        fmt_opt(log.best_feasible_psnr()),
        size.payload_bpp,
        size.file_bpp,
        size.active_params
    );
    if is_infeasible(&config, &model, dataset.pixel_count()) {
        eprintln!(
            "error: final model is {:.5} BPP, above the {} BPP target",
            size.payload_bpp,
            config.target_bpp.unwrap_or_default()
        );
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(EXIT_OK)
}

pub fn cmd_decompress(args: DecompressArgs) -> CmdResult {
    let (model, (h, w)) = codec::load_model(&args.model)?;
    let height = args.height.unwrap_or(h);
    let width = args.width.unwrap_or(w);
    if height == 0 || width == 0 {
        return Err(Failure::usage(format!(
            "cannot render a {height}x{width} image"
        )));
    }
    let rgb = codec::decompress_to_image(&model, height, width)?;
    imageio::save_rgb8(&rgb, height, width, &args.out)?;
    Ok(EXIT_OK)
}

pub fn cmd_eval(args: EvalArgs) -> CmdResult {
    let (model, (h, w)) = codec::load_model(&args.model)?;
    let dataset = imageio::load_image(&args.image)?;
    if (dataset.height, dataset.width) != (h, w) {
        return Err(Failure::usage(format!(
            "model was fitted to {h}x{w} but the image is {}x{}",
            dataset.height, dataset.width
        )));
    }
    let rgb = codec::decompress_to_image(&model, h, w)?;
    let psnr = imageio::psnr_rgb8(&dataset.to_rgb8(), &rgb)?;
    let size = codec::size_report(&model, h, w);
    println!(
        "psnr_db={psnr:.6} bpp={:.6} file_bpp={:.6} active_params={}",
        size.payload_bpp, size.file_bpp, size.active_params
    );
    Ok(EXIT_OK)
}

/// One cell of the benchmark grid.
#[derive(Debug, Clone)]
struct Run {
    image: PathBuf,
    method: Method,
    target_bpp: f64,
    config: TrainConfig,
}

impl Run {
    fn stem(&self) -> String {
        let image = self.image.file_stem().unwrap_or_default().to_string_lossy();
        format!("{image}_{}_{}", self.method, self.target_bpp)
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut images: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pnm"))
        })
        .collect();
    images.sort();
    if images.is_empty() {
        return Err(Failure::usage(format!(
            "no PNG/PPM images in {}",
            dir.display()
        )));
    }
    Ok(images)
}

fn benchmark_config(
    args: &BenchmarkArgs,
    method: Method,
    target: f64,
) -> Result<TrainConfig, Failure> {
    let custom = match method {
        Method::Coin => args.coin_arch.as_deref(),
        _ => args.arch.as_deref(),
    };
    let mut config = match custom {
        Some(arch) => {
            let target = (method != Method::Coin).then_some(target);
            let mut c = TrainConfig::for_method(method, parse_arch(arch)?, target)?;
            if let (Method::Loonie, Some(t)) = (method, standard_target(target.unwrap_or(f64::NAN)))
            {
                c.lr_dual = t.dual_lr;
            }
            c
        }
        None => TrainConfig::for_standard_target(method, target).map_err(|_| {
            Failure::usage(format!(
                "{target} is not a standard target; pass --arch/--coin-arch for custom budgets"
            ))
        })?,
    };
    if let Some(v) = args.steps {
        config.steps = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.eval_every {
        config.eval_every = v;
    }
    if let (Some(v), Method::Loonie) = (args.lr_dual, method) {
        config.lr_dual = v;
    }
    Ok(config)
}

struct RunResult {
    row: String,
    infeasible: bool,
}

fn execute(run: &Run, dataset: &PixelDataset, out_dir: &Path) -> Result<RunResult, Failure> {
    let (model, log) = trainer::train(&run.config, dataset)?;
    let stem = run.stem();
    codec::save_model(
        &model,
        dataset.height,
        dataset.width,
        out_dir.join(format!("{stem}.l0ne")),
    )?;
    let json = serde_json::to_string(&run.config).expect("config serializes");
    write_metrics(
        &log,
        &out_dir.join(format!("{stem}.csv")),
        &format!("image: {}\nconfig: {json}", run.image.display()),
    )?;
    let final_bpp = model.casted_bpp(dataset.pixel_count()).bpp;
    let best = log
        .best_feasible_psnr()
        .map_or("nan".to_string(), |v| v.to_string());
    let wall_s = log.last().map_or(0.0, |r| r.wall_ms as f64 / 1000.0);
    let image = run.image.file_name().unwrap_or_default().to_string_lossy();
    let mut row = String::new();
    write!(
        row,
        "{image},{},{},{best},{final_bpp},{wall_s}",
        run.method, run.target_bpp
    )
    .expect("writing to a String");
    Ok(RunResult {
        row,
        infeasible: is_infeasible(&run.config, &model, dataset.pixel_count()),
    })
}

fn read_extra_rows(path: &Path) -> Result<Vec<String>, Failure> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == SUMMARY_HEADER {
            continue;
        }
        if line.split(',').count() != 6 {
            return Err(Failure::usage(format!(
                "{}: row {line:?} does not match `{SUMMARY_HEADER}`",
                path.display()
            )));
        }
        rows.push(line.to_string());
    }
    Ok(rows)
}

pub fn cmd_benchmark(args: BenchmarkArgs) -> CmdResult {
    let args = args.merged()?;
    let dir = args
        .dir
        .as_deref()
        .ok_or_else(|| Failure::usage("--dir is required"))?;
    let out_dir = args
        .out_dir
        .as_deref()
        .ok_or_else(|| Failure::usage("--out-dir is required"))?;
    let methods = args
        .methods
        .clone()
        .ok_or_else(|| Failure::usage("--methods is required"))?;
    let targets = args
        .targets
        .clone()
        .ok_or_else(|| Failure::usage("--targets is required"))?;
    let jobs = args.jobs.unwrap_or(1);
    if methods.is_empty() || targets.is_empty() || jobs == 0 {
        return Err(Failure::usage(
            "--methods, --targets and --jobs must be non-empty",
        ));
    }
    let extra = match &args.extra_csv {
        Some(p) => read_extra_rows(p)?,
        None => Vec::new(),
    };

    let images = list_images(dir)?;
    let datasets = images
        .iter()
        .map(imageio::load_image)
        .collect::<Result<Vec<_>, _>>()?;
    let mut runs = Vec::new();
    for (i, image) in images.iter().enumerate() {
        for &method in &methods {
            for &target in &targets {
                let config = benchmark_config(&args, method, target)?;
                config.validate(datasets[i].pixel_count()).map_err(|e| {
                    Failure::usage(format!("{} {method} @ {target}: {e}", image.display()))
                })?;
                runs.push((
                    i,
                    Run {
                        image: image.clone(),
                        method,
                        target_bpp: target,
                        config,
                    },
                ));
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let results: Vec<Mutex<Option<Result<RunResult, Failure>>>> =
        runs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(runs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((i, run)) = runs.get(k) else { break };
                let outcome = execute(run, &datasets[*i], out_dir);
                *results[k].lock().expect("unpoisoned") = Some(outcome);
            });
        }
    });

    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut infeasible = false;
    for slot in results {
        let result = slot
            .into_inner()
            .expect("unpoisoned")
            .expect("every run executed")?;
        infeasible |= result.infeasible;
        summary.push_str(&result.row);
        summary.push('\n');
    }
    for row in extra {
        summary.push_str(&row);
        summary.push('\n');
    }
    let path = out_dir.join("summary.csv");
    fs::write(&path, summary).map_err(io_err(&path))?;
    println!("{} runs, summary at {}", runs.len(), path.display());
    Ok(if infeasible { EXIT_INFEASIBLE } else { EXIT_OK })
}
