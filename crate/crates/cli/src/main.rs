use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use polyseg::contour::{resample, PolarChain, Point};
use polyseg::dataset::{
    augment_all, image_center, load_dataset, load_label, read_manifest, synth_generate, write_dataset,
    write_manifest, AugmentSpec, Image, ManifestEntry, SynthSpec,
};
use polyseg::errata::errata_report;
use polyseg::gradcheck::{loss_gradcheck, GradcheckConfig};
use polyseg::loss::{mse_boundary, JmBackend, JmLoss, LossBackend, LossReport};
use polyseg::metrics::{metrics_csv, MetricOptions};
use polyseg::predictor::{model_gradcheck, tiny_descriptor, Checkpoint, OptimizerKind};
use polyseg::trainer::{
    evaluate, render_overlay, train_with, write_log, EvalOptions, LrSchedule, OverlayColors, TrainConfig,
    TrainLoss,
};

#[derive(Parser)]
#[command(name = "polyseg", version, about = "Nested contour regression on polar chains")]
struct Cli {
    /// Base seed for every random stream of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    log_level: LogLevel,
    /// Worker cap. Computation is single-threaded, so values above 1 have no effect.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a contour label file on equally spaced rays.
    Resample(ResampleArgs),
    /// Evaluate a loss between predicted and ground-truth chains.
    Loss(LossArgs),
    /// Finite-difference check of loss or model gradients.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic nested-contour dataset.
    Synth(SynthArgs),
    /// Write flipped, rotated and noisy variants of a dataset.
    Augment(AugmentArgs),
    /// Train a radius regressor.
    Train(TrainArgs),
    /// Score a trained model on a dataset.
    Eval(EvalArgs),
    /// Draw predicted and ground-truth contours over an image.
    Render(RenderArgs),
    /// Compare the per-case closed forms with the exact overlap.
    ErrataReport(ErrataArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum LogLevel {
    Quiet,
    Error,
    Warn,
    Info,
    Debug,
    Json,
}

static LOG_LEVEL: OnceLock<LogLevel> = OnceLock::new();

fn log(level: LogLevel, msg: &str) {
    let current = *LOG_LEVEL.get().unwrap_or(&LogLevel::Info);
    let name = match level {
        LogLevel::Error => "error",
        LogLevel::Warn => "warn",
        LogLevel::Debug => "debug",
        _ => "info",
    };
    if current == LogLevel::Json {
        if level != LogLevel::Debug {
            eprintln!("{}", serde_json::json!({ "level": name, "message": msg }));
        }
    } else if level <= current && current != LogLevel::Quiet {
        eprintln!("[{name}] {msg}");
    }
}

fn info(msg: &str) {
    log(LogLevel::Info, msg);
}

/// Bad flag values found after parsing; reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Args)]
struct ResampleArgs {
    /// Contour text file, one `x y` pair per line.
    #[arg(long)]
    labels: PathBuf,
    /// `auto` for the image center, or `x,y`.
    #[arg(long, default_value = "auto")]
    center: String,
    #[arg(long, default_value_t = 32)]
    nv: usize,
    /// Image side length used by `--center auto`.
    #[arg(long)]
    size: Option<usize>,
    /// Image whose size is used by `--center auto`.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LossArgs {
    /// Chain JSON, or `{"lumen": chain, "media": chain}`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
    backend: BackendArg,
    /// Include the gradient in the output.
    #[arg(long)]
    grad: bool,
    /// Fail on singular paper-form wedges instead of using the exact form.
    #[arg(long)]
    no_fallback: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Exact,
    Paper,
    Mse,
}

impl From<BackendArg> for LossBackend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => LossBackend::Exact,
            BackendArg::Paper => LossBackend::Paper,
            BackendArg::Mse => LossBackend::Mse,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GradTarget {
    Exact,
    Paper,
    Mse,
    /// Full predictor on a tiny descriptor.
    Model,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = GradTarget::Exact)]
    backend: GradTarget,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Relative finite-difference step.
    #[arg(long)]
    eps: Option<f64>,
    /// Default 1e-4 for losses and 1e-6 for the model.
    #[arg(long)]
    tol: Option<f64>,
    /// Rays per chain for loss checks.
    #[arg(long, default_value_t = 16)]
    nv: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 32)]
    nv: usize,
    #[arg(long, default_value_t = 3)]
    harmonics: usize,
    #[arg(long, default_value_t = 0.15)]
    alpha_max: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 51.0)]
    noise_variance_255: f64,
    #[arg(long, default_value_t = 45.0)]
    rotation_max_deg: f64,
    /// Also add noise to the unmodified originals.
    #[arg(long)]
    noise_originals: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, conflicts_with = "synth_dir", required_unless_present = "synth_dir")]
    manifest: Option<PathBuf>,
    /// Directory written by `synth`.
    #[arg(long)]
    synth_dir: Option<PathBuf>,
    /// Resize inputs to this side length; defaults to the stored image size.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 32)]
    nv: usize,
    #[arg(long, default_value = "jm-exact")]
    loss: TrainLoss,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value = "constant")]
    lr_schedule: LrSchedule,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    /// Comma-separated conv block widths.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
    channels: Vec<usize>,
    /// Comma-separated hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "256")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.9)]
    split_fraction: f64,
    /// Add flipped, rotated and noisy variants of the training split.
    #[arg(long)]
    augment: bool,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    #[arg(long, default_value_t = 256)]
    eval_resolution: usize,
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 1024)]
    resolution: usize,
    /// Per-image metric table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Radial error histogram.
    #[arg(long)]
    hist: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    bin_width: f64,
    /// Multiplier applied to Hausdorff distances, e.g. millimetres per pixel.
    #[arg(long, default_value_t = 1.0)]
    hd_scale: f64,
    /// Directory for per-image prediction JSON.
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    /// Feed raw intensities; must match the training setting.
    #[arg(long)]
    no_standardize: bool,
    /// Summary JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    image: PathBuf,
    /// Prediction JSON with `lumen` and `media` chains.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt_lumen: PathBuf,
    #[arg(long)]
    gt_media: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ErrataArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Lumen and media chains of one image.
#[derive(Debug, Serialize, Deserialize)]
struct ChainPair {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    lumen: PolarChain,
    media: PolarChain,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ChainInput {
    Pair(ChainPair),
    Single(PolarChain),
}

#[derive(Serialize)]
struct BoundaryReport {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad: Option<Vec<f64>>,
    per_segment: Vec<f64>,
    backend: LossBackend,
    fallbacks: usize,
}

#[derive(Serialize)]
struct PairReport {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad: Option<Vec<f64>>,
    per_segment: Vec<[f64; 2]>,
    backend: LossBackend,
    fallbacks: usize,
}

#[derive(Serialize)]
struct EvalSummary {
    images: usize,
    resolution: usize,
    jm_lumen: f64,
    jm_media: f64,
    hd_lumen: f64,
    hd_media: f64,
    hd_paper_literal_lumen: f64,
    hd_paper_literal_media: f64,
    radial_error_mean: f64,
    radial_error_std: f64,
    radial_error_count: usize,
}

fn json_text<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes") + "\n"
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_center(spec: &str, size: Option<usize>) -> Result<Point> {
    if spec == "auto" {
        let size = size.ok_or_else(|| usage("--center auto needs --size or --image"))?;
        return Ok(image_center(size));
    }
    let parts: Vec<&str> = spec.split(',').collect();
    let coords: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    match coords.as_deref() {
        Some(&[x, y]) if x.is_finite() && y.is_finite() => Ok(Point::new(x, y)),
        _ => Err(usage(format!("--center expects `auto` or `x,y`, got `{spec}`"))),
    }
}

fn cmd_resample(a: &ResampleArgs) -> Result<()> {
    let size = match (&a.image, a.size) {
        (Some(path), _) => {
            let img = Image::load_gray(path)?;
            Some(img.width.max(img.height))
        }
        (None, s) => s,
    };
    let center = parse_center(&a.center, size)?;
    let contour = load_label(&a.labels)?;
    let chain = resample(&contour, center, a.nv)?;
    write_or_print(a.out.as_deref(), &json_text(&chain))
}

fn cmd_loss(a: &LossArgs) -> Result<()> {
    let pred: ChainInput = read_json(&a.pred)?;
    let gt: ChainInput = read_json(&a.gt)?;
    let backend = LossBackend::from(a.backend);
    let jm = |b| JmLoss { backend: b, fallback: !a.no_fallback };
    let text = match (pred, gt) {
        (ChainInput::Single(p), ChainInput::Single(g)) => {
            if p.center() != g.center() {
                bail!("predicted and ground-truth chains have different centers");
            }
            let b = match backend {
                LossBackend::Exact => jm(JmBackend::Exact).boundary(p.radii(), g.radii())?,
                LossBackend::Paper => jm(JmBackend::Paper).boundary(p.radii(), g.radii())?,
                LossBackend::Mse => mse_boundary(p.radii(), g.radii())?,
            };
            json_text(&BoundaryReport {
                value: b.value,
                grad: a.grad.then_some(b.grad),
                per_segment: b.per_segment,
                backend,
                fallbacks: b.fallbacks,
            })
        }
        (ChainInput::Pair(p), ChainInput::Pair(g)) => {
            let chains = [&p.lumen, &p.media, &g.lumen, &g.media];
            if chains.iter().any(|c| c.center() != p.lumen.center()) {
                bail!("chains have different centers");
            }
            let (pl, pm, gl, gm) = (p.lumen.radii(), p.media.radii(), g.lumen.radii(), g.media.radii());
            let r: LossReport = match backend {
                LossBackend::Exact => jm(JmBackend::Exact).evaluate(pl, pm, gl, gm)?,
                LossBackend::Paper => jm(JmBackend::Paper).evaluate(pl, pm, gl, gm)?,
                LossBackend::Mse => polyseg::loss::mse_loss(pl, pm, gl, gm)?,
            };
            json_text(&PairReport {
                value: r.value,
                grad: a.grad.then_some(r.grad),
                per_segment: r.per_segment,
                backend,
                fallbacks: r.fallbacks,
            })
        }
        _ => return Err(usage("--pred and --gt must both be single chains or both lumen/media pairs")),
    };
    write_or_print(a.out.as_deref(), &text)
}

fn cmd_gradcheck(a: &GradcheckArgs, seed: u64) -> Result<()> {
    let (text, ok) = match a.backend {
        GradTarget::Model => {
            let tol = a.tol.unwrap_or(1e-6);
            let r = model_gradcheck(tiny_descriptor(), seed, a.trials, tol)?;
            let ok = r.failures == 0;
            (json_text(&r), ok)
        }
        target => {
            let backend = match target {
                GradTarget::Exact => LossBackend::Exact,
                GradTarget::Paper => LossBackend::Paper,
                _ => LossBackend::Mse,
            };
            let defaults = GradcheckConfig::default();
            let config = GradcheckConfig {
                backend,
                trials: a.trials,
                eps: a.eps.unwrap_or(defaults.eps),
                tol: a.tol.unwrap_or(defaults.tol),
                seed,
                n_v: a.nv,
                ..defaults
            };
            let s = loss_gradcheck(&config)?;
            (json_text(&s), s.ok)
        }
    };
    write_or_print(a.out.as_deref(), &text)?;
    if !ok {
        bail!("gradient check failed");
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let spec = SynthSpec {
        count: a.count,
        size: a.size,
        n_v: a.nv,
        harmonics: a.harmonics,
        alpha_max: a.alpha_max,
        seed,
        ..SynthSpec::default()
    };
    spec.validate()?;
    let samples = synth_generate(&spec)?;
    write_dataset(&a.out, &samples)?;
    fs::write(a.out.join("synth_spec.json"), json_text(&spec))
        .with_context(|| format!("writing {}", a.out.join("synth_spec.json").display()))?;
    info(&format!("wrote {} samples to {}", samples.len(), a.out.display()));
    Ok(())
}

/// Rays used to build chains when only contours are needed.
const CONTOUR_ONLY_NV: usize = 32;

fn cmd_augment(a: &AugmentArgs, seed: u64) -> Result<()> {
    let samples = load_dataset(&a.manifest, None, CONTOUR_ONLY_NV)?;
    let spec = AugmentSpec {
        rotation_max_deg: a.rotation_max_deg,
        noise_variance_255: a.noise_variance_255,
        noise_originals: a.noise_originals,
        seed,
    };
    let out = augment_all(&samples, &spec)?;
    write_dataset(&a.out, &out)?;
    info(&format!("wrote {} samples to {}", out.len(), a.out.display()));
    Ok(())
}

fn absolute_entries(manifest: &Path, ids: &[String]) -> Result<Vec<ManifestEntry>> {
    let all = read_manifest(manifest)?;
    let abs = |p: &Path| fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()));
    ids.iter()
        .map(|id| {
            let e = all.iter().find(|e| &e.id == id).expect("split ids come from the manifest");
            Ok(ManifestEntry {
                id: e.id.clone(),
                image: abs(&e.image)?,
                lumen: abs(&e.lumen)?,
                media: abs(&e.media)?,
            })
        })
        .collect()
}

fn cmd_train(a: &TrainArgs, seed: u64) -> Result<()> {
    let manifest = match (&a.manifest, &a.synth_dir) {
        (Some(m), _) => m.clone(),
        (None, Some(d)) => d.join("manifest.json"),
        (None, None) => return Err(usage("one of --manifest or --synth-dir is required")),
    };
    let optimizer = match a.optimizer {
        OptimizerArg::Adam => OptimizerKind::adam(),
        OptimizerArg::Sgd => OptimizerKind::sgd(),
    };
    let config = TrainConfig {
        n_v: a.nv,
        loss: a.loss,
        epochs: a.epochs,
        batch: a.batch,
        optimizer,
        lr: a.lr,
        lr_schedule: a.lr_schedule,
        channels: a.channels.clone(),
        hidden: a.hidden.clone(),
        init_seed: seed,
        shuffle_seed: seed.wrapping_add(1),
        split_seed: seed.wrapping_add(2),
        split_fraction: a.split_fraction,
        augment: a.augment.then(|| AugmentSpec { seed: seed.wrapping_add(3), ..AugmentSpec::default() }),
        input_standardize: !a.no_standardize,
        eval_every: a.eval_every,
        eval_resolution: a.eval_resolution,
        checkpoint_every: a.checkpoint_every,
    };
    config.validate()?;
    let dataset = load_dataset(&manifest, a.size, a.nv)?;
    info(&format!("loaded {} samples from {}", dataset.len(), manifest.display()));
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    fs::write(a.out.join("config.json"), json_text(&config))?;
    let started = std::time::Instant::now();
    let outcome = train_with(&config, &dataset, Some(&a.out), |r| {
        let mut msg = format!("epoch {} {} {:.6}", r.epoch, r.loss, r.train_loss);
        if let Some(v) = &r.val {
            msg += &format!(" val jm {:.4}/{:.4} hd {:.3}/{:.3}", v.jm_lumen, v.jm_media, v.hd_lumen, v.hd_media);
        }
        msg += &format!(" ({:.1}s)", started.elapsed().as_secs_f64());
        info(&msg);
    })?;
    Checkpoint { model: outcome.model, optimizer: Some(outcome.optimizer) }.save(&a.out.join("model.pcsg"))?;
    write_log(&a.out.join("train_log.jsonl"), &outcome.log)?;
    write_manifest(&a.out.join("train_manifest.json"), &absolute_entries(&manifest, &outcome.train_ids)?)?;
    write_manifest(&a.out.join("val_manifest.json"), &absolute_entries(&manifest, &outcome.val_ids)?)?;
    info(&format!("wrote model to {}", a.out.join("model.pcsg").display()));
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = Checkpoint::load(&a.model)?.model;
    let desc = model.descriptor().clone();
    let samples = load_dataset(&a.manifest, Some(desc.input_size), desc.n_v)?;
    if samples.is_empty() {
        bail!("manifest {} lists no samples", a.manifest.display());
    }
    if a.bin_width.is_nan() || a.bin_width <= 0.0 {
        return Err(usage("--bin-width must be positive"));
    }
    let opts = EvalOptions {
        metrics: MetricOptions { resolution: a.resolution, hd_scale: a.hd_scale },
        bin_width: a.bin_width,
        standardize: !a.no_standardize,
        ..EvalOptions::default()
    };
    let refs: Vec<_> = samples.iter().collect();
    let outcome = evaluate(&model, &refs, &opts)?;
    if let Some(path) = &a.csv {
        write_or_print(Some(path), &metrics_csv(&outcome.reports))?;
    }
    if let Some(path) = &a.hist {
        write_or_print(Some(path), &outcome.histogram.to_csv())?;
    }
    if let Some(dir) = &a.pred_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (s, (pl, pm)) in samples.iter().zip(&outcome.predictions) {
            let pair = ChainPair { id: Some(s.id.clone()), lumen: pl.clone(), media: pm.clone() };
            fs::write(dir.join(format!("{}.json", s.id)), json_text(&pair))?;
        }
    }
    let mean = outcome.mean.expect("non-empty evaluation");
    let h = &outcome.histogram;
    let summary = EvalSummary {
        images: samples.len(),
        resolution: a.resolution,
        jm_lumen: mean.jm_lumen,
        jm_media: mean.jm_media,
        hd_lumen: mean.hd_lumen,
        hd_media: mean.hd_media,
        hd_paper_literal_lumen: mean.hd_paper_literal_lumen,
        hd_paper_literal_media: mean.hd_paper_literal_media,
        radial_error_mean: h.mean,
        radial_error_std: h.std,
        radial_error_count: h.total,
    };
    write_or_print(a.out.as_deref(), &json_text(&summary))
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let image = Image::load_gray(&a.image)?;
    let pred: ChainPair = read_json(&a.pred)?;
    let lumen = load_label(&a.gt_lumen)?;
    let media = load_label(&a.gt_media)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    render_overlay(&image, (&pred.lumen, &pred.media), (&lumen, &media), &OverlayColors::default(), &a.out)?;
    Ok(())
}

fn cmd_errata(a: &ErrataArgs, seed: u64) -> Result<()> {
    let report = errata_report(a.trials, seed)?;
    match &a.out {
        Some(path) => {
            write_or_print(Some(path), &json_text(&report))?;
            print!("{}", report.table());
        }
        None => print!("{}", json_text(&report)),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    match &cli.command {
        Command::Resample(a) => cmd_resample(a),
        Command::Loss(a) => cmd_loss(a),
        Command::Gradcheck(a) => cmd_gradcheck(a, cli.seed),
        Command::Synth(a) => cmd_synth(a, cli.seed),
        Command::Augment(a) => cmd_augment(a, cli.seed),
        Command::Train(a) => cmd_train(a, cli.seed),
        Command::Eval(a) => cmd_eval(a),
        Command::Render(a) => cmd_render(a),
        Command::ErrataReport(a) => cmd_errata(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = LOG_LEVEL.set(cli.log_level);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("error: {u}\n\nFor more information, try '--help'.");
                return ExitCode::from(2);
            }
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string(), "causes": causes })
            );
            ExitCode::from(1)
        }
    }
}
