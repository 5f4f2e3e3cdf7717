//! Training and evaluation loops, radial error histograms and overlays.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{CartesianContour, GeometryError, Point, PolarChain, MIN_RADIUS};
use crate::dataset::{augment_all, item_rng, split, AugmentSpec, DatasetError, Image, LabeledSample};
use crate::loss::{jm_loss, mse_loss, JmBackend, LossBackend, LossError, LossReport};
use crate::metrics::{contour_metrics, mean_report, MetricOptions, MetricReport, MetricsError};
use crate::predictor::{
    BackwardScratch, Checkpoint, Descriptor, ForwardCache, Gradients, Optimizer, OptimizerKind,
    PredictorError, Regressor, Tensor,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {value} at epoch {epoch}, batch {batch} (sample {sample})")]
    NonFiniteLoss { epoch: usize, batch: usize, sample: String, value: f64 },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainLoss {
    #[serde(rename = "jm-exact")]
    JmExact,
    #[serde(rename = "jm-paper")]
    JmPaper,
    #[serde(rename = "mse")]
    Mse,
}

impl TrainLoss {
    pub fn name(self) -> &'static str {
        match self {
            TrainLoss::JmExact => "jm-exact",
            TrainLoss::JmPaper => "jm-paper",
            TrainLoss::Mse => "mse",
        }
    }

    pub fn backend(self) -> LossBackend {
        match self {
            TrainLoss::JmExact => LossBackend::Exact,
            TrainLoss::JmPaper => LossBackend::Paper,
            TrainLoss::Mse => LossBackend::Mse,
        }
    }

    pub fn evaluate(self, pred_lumen: &[f64], pred_media: &[f64], gt: &LabeledSample) -> Result<LossReport, LossError> {
        let (gl, gm) = (gt.lumen_chain.radii(), gt.media_chain.radii());
        match self {
            TrainLoss::JmExact => jm_loss(pred_lumen, pred_media, gl, gm, JmBackend::Exact),
            TrainLoss::JmPaper => jm_loss(pred_lumen, pred_media, gl, gm, JmBackend::Paper),
            TrainLoss::Mse => mse_loss(pred_lumen, pred_media, gl, gm),
        }
    }
}

impl std::str::FromStr for TrainLoss {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jm-exact" => Ok(TrainLoss::JmExact),
            "jm-paper" => Ok(TrainLoss::JmPaper),
            "mse" => Ok(TrainLoss::Mse),
            other => Err(format!("unknown loss '{other}' (expected jm-exact, jm-paper or mse)")),
        }
    }
}

/// Learning-rate multiplier over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base rate to zero over all steps.
    Cosine,
}

impl LrSchedule {
    /// Multiplier for 0-based `step` out of `total`.
    pub fn factor(self, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total.max(1) as f64).cos()),
        }
    }
}

impl std::str::FromStr for LrSchedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "cosine" => Ok(LrSchedule::Cosine),
            other => Err(format!("unknown schedule '{other}' (expected constant or cosine)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_v: usize,
    pub loss: TrainLoss,
    pub epochs: usize,
    pub batch: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    /// Conv channels and hidden widths; input size and `n_v` come from the data.
    pub channels: Vec<usize>,
    pub hidden: Vec<usize>,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub split_seed: u64,
    pub split_fraction: f64,
    /// Expands the training split with flipped, rotated and noisy copies.
    pub augment: Option<AugmentSpec>,
    /// Per-image zero-mean, unit-variance input scaling.
    pub input_standardize: bool,
    /// Validation metrics every this many epochs (and after the last); 0 disables.
    pub eval_every: usize,
    pub eval_resolution: usize,
    /// Checkpoint every this many epochs when an output directory is given; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_v: 32,
            loss: TrainLoss::JmExact,
            epochs: 200,
            batch: 32,
            optimizer: OptimizerKind::adam(),
            lr: 1e-3,
            lr_schedule: LrSchedule::Constant,
            channels: vec![16, 32, 64, 128],
            hidden: vec![256],
            init_seed: 0,
            shuffle_seed: 1,
            split_seed: 2,
            split_fraction: 0.9,
            augment: None,
            input_standardize: true,
            eval_every: 10,
            eval_resolution: 256,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split fraction {} not in (0, 1)", self.split_fraction));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        Ok(())
    }

    pub fn descriptor(&self, input_size: usize) -> Descriptor {
        Descriptor {
            channels: self.channels.clone(),
            hidden: self.hidden.clone(),
            ..Descriptor::reference(input_size, self.n_v)
        }
    }
}

/// Validation snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    /// Mean per-image Jaccard loss (exact form), whatever the training loss.
    pub jm_loss: f64,
    pub jm_lumen: f64,
    pub jm_media: f64,
    pub hd_lumen: f64,
    pub hd_media: f64,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: String,
    /// Mean per-image training loss over the epoch.
    pub train_loss: f64,
    pub fallbacks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<ValRecord>,
}

pub struct TrainOutcome {
    pub model: Regressor<f32>,
    pub optimizer: Optimizer<f32>,
    pub log: Vec<EpochRecord>,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

/// Network input for one sample, optionally standardized.
pub fn input_image(sample: &LabeledSample, standardize: bool) -> Image {
    if standardize {
        sample.image.standardized()
    } else {
        sample.image.clone()
    }
}

fn stack(images: &[&Image]) -> Result<Tensor<f32>, PredictorError> {
    let first = images[0];
    let mut data = Vec::with_capacity(images.len() * first.data.len());
    for img in images {
        data.extend_from_slice(&img.data);
    }
    Tensor::new(vec![images.len(), first.height, first.width, first.channels], data)
}

/// Lumen and media radii of one output row, floored at [`MIN_RADIUS`] so a
/// saturated output still satisfies the loss preconditions.
fn split_radii(row: &[f32]) -> (Vec<f64>, Vec<f64>) {
    let n = row.len() / 2;
    let lift = |v: &[f32]| v.iter().map(|&r| (r as f64).max(MIN_RADIUS)).collect();
    (lift(&row[..n]), lift(&row[n..]))
}

/// Writes the log as JSON lines.
pub fn write_log(path: &Path, log: &[EpochRecord]) -> Result<(), TrainError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    for r in log {
        writeln!(f, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io_err(path))?;
    }
    Ok(())
}

/// Trains on a seeded split of `dataset`. When `out_dir` is given, periodic
/// checkpoints are written there.
pub fn train(config: &TrainConfig, dataset: &[LabeledSample], out_dir: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    train_with(config, dataset, out_dir, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    config: &TrainConfig,
    dataset: &[LabeledSample],
    out_dir: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if let Some(s) = dataset.iter().find(|s| s.n_v() != config.n_v) {
        return Err(TrainError::InvalidConfig(format!(
            "sample {} has {} rays, config expects {}",
            s.id,
            s.n_v(),
            config.n_v
        )));
    }
    let (train_idx, val_idx) = if dataset.len() == 1 {
        (vec![0], Vec::new())
    } else {
        split(dataset.len(), config.split_fraction, config.split_seed)
    };
    let train_base: Vec<LabeledSample> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let val: Vec<&LabeledSample> = val_idx.iter().map(|&i| &dataset[i]).collect();
    let train_set = match &config.augment {
        Some(spec) => augment_all(&train_base, spec)?,
        None => train_base,
    };
    let inputs: Vec<Image> = train_set.iter().map(|s| input_image(s, config.input_standardize)).collect();

    let size = dataset[0].size();
    let mut model = Regressor::<f32>::init(config.descriptor(size), config.init_seed)?;
    let mut optimizer = Optimizer::new(config.optimizer, config.lr, &model);
    let mut cache = ForwardCache::default();
    let mut scratch = BackwardScratch::default();
    let mut grads = Gradients { arrays: Vec::new() };
    let outputs = model.descriptor().outputs();
    let n = train_set.len();
    let batches = n.div_ceil(config.batch);
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut item_rng(config.shuffle_seed, epoch as u64));
        let mut loss_sum = 0.0;
        let mut fallbacks = 0;
        for b in 0..batches {
            // The last batch is padded by wrapping around the epoch order; the
            // padding contributes gradient but is not counted twice in the log.
            let idx: Vec<usize> = (0..config.batch).map(|k| order[(b * config.batch + k) % n]).collect();
            let fresh = config.batch.min(n - b * config.batch);
            let images: Vec<&Image> = idx.iter().map(|&i| &inputs[i]).collect();
            let radii = model.forward_into(&stack(&images)?, &mut cache)?;
            let mut d_radii = vec![0f32; config.batch * outputs];
            let scale = 1.0 / config.batch as f64;
            for (k, &i) in idx.iter().enumerate() {
                let (pl, pm) = split_radii(radii.row(k));
                let report = config.loss.evaluate(&pl, &pm, &train_set[i])?;
                if !report.value.is_finite() || report.grad.iter().any(|g| !g.is_finite()) {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: b,
                        sample: train_set[i].id.clone(),
                        value: report.value,
                    });
                }
                if k < fresh {
                    loss_sum += report.value;
                    fallbacks += report.fallbacks;
                }
                for (d, g) in d_radii[k * outputs..(k + 1) * outputs].iter_mut().zip(&report.grad) {
                    *d = (g * scale) as f32;
                }
            }
            let upstream = Tensor::new(vec![config.batch, outputs], d_radii)?;
            model.backward_into(&cache, &upstream, &mut grads, &mut scratch)?;
            let step = (epoch - 1) * batches + b;
            optimizer.lr = config.lr * config.lr_schedule.factor(step, config.epochs * batches);
            optimizer.step(&mut model, &grads)?;
        }
        if !model.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: batches - 1,
                sample: "parameters".into(),
                value: f64::NAN,
            });
        }
        let due = config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs);
        let val_record = if due && !val.is_empty() {
            Some(validate(&model, &val, config)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            loss: config.loss.name().into(),
            train_loss: loss_sum / n as f64,
            fallbacks,
            val: val_record,
        };
        on_epoch(&record);
        log.push(record);
        if let Some(dir) = out_dir {
            if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
                let ck = Checkpoint { model: model.clone(), optimizer: Some(optimizer.clone()) };
                ck.save(&dir.join(format!("checkpoint_{epoch:05}.pcsg")))?;
            }
        }
    }
    Ok(TrainOutcome {
        model,
        optimizer,
        log,
        train_ids: train_idx.iter().map(|&i| dataset[i].id.clone()).collect(),
        val_ids: val_idx.iter().map(|&i| dataset[i].id.clone()).collect(),
    })
}

fn validate(model: &Regressor<f32>, val: &[&LabeledSample], config: &TrainConfig) -> Result<ValRecord, TrainError> {
    let opts = MetricOptions { resolution: config.eval_resolution, hd_scale: 1.0 };
    let preds = predict_chains(model, val, config.input_standardize, config.batch)?;
    let mut jm_loss_sum = 0.0;
    let mut reports = Vec::with_capacity(val.len());
    for (s, (pl, pm)) in val.iter().zip(&preds) {
        jm_loss_sum += TrainLoss::JmExact.evaluate(pl.radii(), pm.radii(), s)?.value;
        reports.push(contour_metrics(
            &s.id,
            &pl.to_cartesian(),
            &pm.to_cartesian(),
            &s.lumen_gt,
            &s.media_gt,
            opts,
        )?);
    }
    let mean = mean_report(&reports).expect("validation set is not empty");
    Ok(ValRecord {
        jm_loss: jm_loss_sum / val.len() as f64,
        jm_lumen: mean.jm_lumen,
        jm_media: mean.jm_media,
        hd_lumen: mean.hd_lumen,
        hd_media: mean.hd_media,
    })
}

/// Predicted `(lumen, media)` chains about each sample's image center.
pub fn predict_chains(
    model: &Regressor<f32>,
    samples: &[&LabeledSample],
    standardize: bool,
    batch: usize,
) -> Result<Vec<(PolarChain, PolarChain)>, TrainError> {
    let mut out = Vec::with_capacity(samples.len());
    let mut cache = ForwardCache::default();
    let r_max = model.descriptor().r_max;
    for chunk in samples.chunks(batch.max(1)) {
        let images: Vec<Image> = chunk.iter().map(|s| input_image(s, standardize)).collect();
        let refs: Vec<&Image> = images.iter().collect();
        let radii = model.forward_into(&stack(&refs)?, &mut cache)?;
        for (k, s) in chunk.iter().enumerate() {
            let (pl, pm) = split_radii(radii.row(k));
            let center = s.lumen_chain.center();
            out.push((PolarChain::clamped(center, pl, r_max)?, PolarChain::clamped(center, pm, r_max)?));
        }
    }
    Ok(out)
}

/// Radial error histogram with bins of width `bin_width` centered on its multiples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub bin_width: f64,
    /// Left edge of every bin, ascending.
    pub bin_left: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    pub std: f64,
    pub total: usize,
}

impl ErrorHistogram {
    pub fn from_errors(errors: &[f64], bin_width: f64) -> Self {
        assert!(bin_width > 0.0, "bin width must be positive");
        let n = errors.len();
        let mean = if n > 0 { errors.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let var = if n > 0 { errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64 } else { 0.0 };
        let bin = |e: f64| (e / bin_width).round() as i64;
        let (lo, hi) = errors.iter().fold((i64::MAX, i64::MIN), |(lo, hi), &e| (lo.min(bin(e)), hi.max(bin(e))));
        let (bin_left, counts) = if n == 0 {
            (Vec::new(), Vec::new())
        } else {
            let mut counts = vec![0usize; (hi - lo + 1) as usize];
            for &e in errors {
                counts[(bin(e) - lo) as usize] += 1;
            }
            ((lo..=hi).map(|k| (k as f64 - 0.5) * bin_width).collect(), counts)
        };
        Self { bin_width, bin_left, counts, mean, std: var.sqrt(), total: n }
    }

    /// `bin_left,bin_right,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (l, c) in self.bin_left.iter().zip(&self.counts) {
            out.push_str(&format!("{:.6},{:.6},{}\n", l, l + self.bin_width, c));
        }
        out
    }
}

pub struct EvalOutcome {
    pub reports: Vec<MetricReport>,
    pub mean: Option<MetricReport>,
    pub histogram: ErrorHistogram,
    pub predictions: Vec<(PolarChain, PolarChain)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub metrics: MetricOptions,
    pub bin_width: f64,
    pub standardize: bool,
    pub batch: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { metrics: MetricOptions::default(), bin_width: 0.5, standardize: true, batch: 32 }
    }
}

/// Scores given predictions against the original annotations.
pub fn evaluate_predictions(
    samples: &[&LabeledSample],
    predictions: Vec<(PolarChain, PolarChain)>,
    opts: &EvalOptions,
) -> Result<EvalOutcome, TrainError> {
    let mut reports = Vec::with_capacity(samples.len());
    let mut errors = Vec::with_capacity(samples.len() * 2 * predictions.first().map_or(0, |p| p.0.n_v()));
    for (s, (pl, pm)) in samples.iter().zip(&predictions) {
        reports.push(contour_metrics(&s.id, &pl.to_cartesian(), &pm.to_cartesian(), &s.lumen_gt, &s.media_gt, opts.metrics)?);
        for (pred, gt) in [(pl, &s.lumen_chain), (pm, &s.media_chain)] {
            errors.extend(pred.radii().iter().zip(gt.radii()).map(|(r, a)| r - a));
        }
    }
    Ok(EvalOutcome {
        mean: mean_report(&reports),
        reports,
        histogram: ErrorHistogram::from_errors(&errors, opts.bin_width),
        predictions,
    })
}

pub fn evaluate(model: &Regressor<f32>, samples: &[&LabeledSample], opts: &EvalOptions) -> Result<EvalOutcome, TrainError> {
    let predictions = predict_chains(model, samples, opts.standardize, opts.batch)?;
    evaluate_predictions(samples, predictions, opts)
}

/// RGB colors of the four overlay layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayColors {
    pub gt_lumen: [u8; 3],
    pub gt_media: [u8; 3],
    pub pred_lumen: [u8; 3],
    pub pred_media: [u8; 3],
}

impl Default for OverlayColors {
    fn default() -> Self {
        Self {
            gt_lumen: [0, 0, 255],
            gt_media: [0, 255, 255],
            pred_lumen: [255, 0, 255],
            pred_media: [255, 255, 255],
        }
    }
}

/// Pixels covered by the closed polyline through `points`, in drawing order.
pub fn polyline_pixels(points: &[Point], width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &a) in points.iter().enumerate() {
        let b = points[(i + 1) % points.len()];
        let steps = (b.x - a.x).abs().max((b.y - a.y).abs()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (x, y) = ((a.x + t * (b.x - a.x)).round(), (a.y + t * (b.y - a.y)).round());
            if x >= 0.0 && y >= 0.0 && (x as usize) < width && (y as usize) < height {
                let p = (x as usize, y as usize);
                if out.last() != Some(&p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Pixel layers of an overlay: gt lumen, gt media, predicted lumen, predicted media.
pub fn overlay_layers(
    width: usize,
    height: usize,
    pred: (&PolarChain, &PolarChain),
    gt: (&CartesianContour, &CartesianContour),
) -> [Vec<(usize, usize)>; 4] {
    [
        polyline_pixels(gt.0.points(), width, height),
        polyline_pixels(gt.1.points(), width, height),
        polyline_pixels(pred.0.to_cartesian().points(), width, height),
        polyline_pixels(pred.1.to_cartesian().points(), width, height),
    ]
}

/// Grayscale image with ground truth drawn first and predictions on top.
pub fn render_overlay_image(
    image: &Image,
    pred: (&PolarChain, &PolarChain),
    gt: (&CartesianContour, &CartesianContour),
    colors: &OverlayColors,
) -> image::RgbImage {
    let (w, h) = (image.width, image.height);
    let luma = image.luma();
    let mut out = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = crate::dataset::quantize(luma.get(x as usize, y as usize, 0));
        image::Rgb([v, v, v])
    });
    let layers = overlay_layers(w, h, pred, gt);
    let palette = [colors.gt_lumen, colors.gt_media, colors.pred_lumen, colors.pred_media];
    for (pixels, color) in layers.iter().zip(palette) {
        for &(x, y) in pixels {
            out.put_pixel(x as u32, y as u32, image::Rgb(color));
        }
    }
    out
}

pub fn render_overlay(
    image: &Image,
    pred: (&PolarChain, &PolarChain),
    gt: (&CartesianContour, &CartesianContour),
    colors: &OverlayColors,
    path: &Path,
) -> Result<(), TrainError> {
    render_overlay_image(image, pred, gt, colors)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| TrainError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) })
}
