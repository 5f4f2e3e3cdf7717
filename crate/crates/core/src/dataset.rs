//! Images, contour labels, preprocessing, augmentation and the synthetic generator.
//!
//! Pixel `(i, j)` (column, row) has its center at coordinate `(i, j)`; label
//! files use the same frame, with y growing downward. The geometric center of
//! an `S×S` image is therefore `((S-1)/2, (S-1)/2)`, and all chains are
//! sampled about that point.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{
    format_contour_text, parse_contour_text, resample, CartesianContour, ContourParseError,
    GeometryError, Point, PolarChain,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Label { path: PathBuf, source: ContourParseError },
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("sample {id}: media radius {media:.4} is inside lumen radius {lumen:.4} on ray {ray}")]
    NotNested { id: String, ray: usize, lumen: f64, media: f64 },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("image {0}")]
    Image(#[from] image::ImageError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("image must be square after preprocessing, got {0}x{1}")]
    NotSquare(usize, usize),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Row-major `height × width × channels` image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// First channel as a single-channel image.
    pub fn luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        Image::from_fn(self.width, self.height, |x, y| self.get(x, y, 0))
    }

    /// Copies a single-channel image into `channels` identical channels.
    pub fn replicate(&self, channels: usize) -> Image {
        let src = self.luma();
        let data = src.data.iter().flat_map(|&v| std::iter::repeat_n(v, channels)).collect();
        Image { width: self.width, height: self.height, channels, data }
    }

    /// Bilinear sample of channel `c`; pixels outside the frame read as 0.
    pub fn sample(&self, x: f64, y: f64, c: usize) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let at = |xi: f64, yi: f64| -> f32 {
            if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
                0.0
            } else {
                self.get(xi as usize, yi as usize, c)
            }
        };
        let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1.0, y0) * fx;
        let bottom = at(x0, y0 + 1.0) * (1.0 - fx) + at(x0 + 1.0, y0 + 1.0) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear sample clamped to the frame, for resizing.
    fn sample_clamped(&self, x: f64, y: f64, c: usize) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let top = self.get(x0, y0, c) * (1.0 - fx) + self.get(x1, y0, c) * fx;
        let bottom = self.get(x0, y1, c) * (1.0 - fx) + self.get(x1, y1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Resizes with the same coordinate map as labels: `x' = x · width'/width`.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Image {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Image::new(width, height, self.channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..self.channels {
                    out.data[(y * width + x) * self.channels + c] =
                        self.sample_clamped(x as f64 * sx, y as f64 * sy, c);
                }
            }
        }
        out
    }

    /// Maps every output pixel `p` to the input position `inverse(p)`.
    pub fn warp(&self, inverse: impl Fn(Point) -> Point) -> Image {
        let mut out = Image::new(self.width, self.height, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                let src = inverse(Point::new(x as f64, y as f64));
                for c in 0..self.channels {
                    out.data[(y * self.width + x) * self.channels + c] = self.sample(src.x, src.y, c);
                }
            }
        }
        out
    }

    pub fn load_gray(path: &Path) -> Result<Image, DatasetError> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        Ok(Image { width: w as usize, height: h as usize, channels: 1, data })
    }

    /// Writes the first channel as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<(), DatasetError> {
        let luma = self.luma();
        let bytes: Vec<u8> = luma.data.iter().map(|&v| quantize(v)).collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Zero-mean, unit-variance copy (constant images become all zeros).
    pub fn standardized(&self) -> Image {
        let n = self.data.len() as f64;
        let mean = self.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = self.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let inv = if var > 1e-12 { 1.0 / var.sqrt() } else { 0.0 };
        let data = self.data.iter().map(|&v| ((v as f64 - mean) * inv) as f32).collect();
        Image { data, ..*self }
    }
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Geometric center of an `size × size` image.
pub fn image_center(size: usize) -> Point {
    let c = (size as f64 - 1.0) / 2.0;
    Point::new(c, c)
}

/// A preprocessed image with its original and resampled labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub id: String,
    pub image: Image,
    pub lumen_gt: CartesianContour,
    pub media_gt: CartesianContour,
    pub lumen_chain: PolarChain,
    pub media_chain: PolarChain,
}

impl LabeledSample {
    /// Resamples both contours about the image center and checks nesting.
    pub fn new(
        id: impl Into<String>,
        image: Image,
        lumen_gt: CartesianContour,
        media_gt: CartesianContour,
        n_v: usize,
    ) -> Result<Self, DatasetError> {
        if image.width != image.height {
            return Err(DatasetError::NotSquare(image.width, image.height));
        }
        let center = image_center(image.width);
        let lumen_chain = resample(&lumen_gt, center, n_v)?;
        let media_chain = resample(&media_gt, center, n_v)?;
        let sample = Self { id: id.into(), image, lumen_gt, media_gt, lumen_chain, media_chain };
        sample.check_nested()?;
        Ok(sample)
    }

    pub fn size(&self) -> usize {
        self.image.width
    }

    pub fn n_v(&self) -> usize {
        self.lumen_chain.n_v()
    }

    pub fn check_nested(&self) -> Result<(), DatasetError> {
        let lumen = self.lumen_chain.radii();
        let media = self.media_chain.radii();
        match lumen.iter().zip(media).position(|(l, m)| m < l) {
            Some(ray) => Err(DatasetError::NotNested {
                id: self.id.clone(),
                ray,
                lumen: lumen[ray],
                media: media[ray],
            }),
            None => Ok(()),
        }
    }

    /// Applies the same point map to both labels and re-samples.
    fn transformed(
        &self,
        id: String,
        image: Image,
        map: impl Fn(Point) -> Point + Copy,
    ) -> Result<Self, DatasetError> {
        let lumen = self.lumen_gt.map(map)?;
        let media = self.media_gt.map(map)?;
        Self::new(id, image, lumen, media, self.n_v())
    }
}

/// Scales a raw grayscale image to `size × size`, replicates it into three
/// channels and maps the labels with the same coordinate scaling.
pub fn preprocess(
    id: &str,
    raw: &Image,
    lumen: &CartesianContour,
    media: &CartesianContour,
    size: usize,
    n_v: usize,
) -> Result<LabeledSample, DatasetError> {
    let sx = size as f64 / raw.width as f64;
    let sy = size as f64 / raw.height as f64;
    let image = if raw.width == size && raw.height == size {
        raw.luma()
    } else {
        raw.luma().resize_bilinear(size, size)
    };
    let scale = |p: Point| Point::new(p.x * sx, p.y * sy);
    LabeledSample::new(id, image.replicate(3), lumen.map(scale)?, media.map(scale)?, n_v)
}

pub fn load_label(path: &Path) -> Result<CartesianContour, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_contour_text(&text).map_err(|source| DatasetError::Label { path: path.to_path_buf(), source })
}

pub fn save_label(path: &Path, contour: &CartesianContour) -> Result<(), DatasetError> {
    fs::write(path, format_contour_text(contour)).map_err(io_err(path))
}

/// Geometric augmentations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flip {
    LeftRight,
    UpDown,
    Both,
}

impl Flip {
    pub fn apply(self, p: Point, size: usize) -> Point {
        let m = size as f64 - 1.0;
        match self {
            Flip::LeftRight => Point::new(m - p.x, p.y),
            Flip::UpDown => Point::new(p.x, m - p.y),
            Flip::Both => Point::new(m - p.x, m - p.y),
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Flip::LeftRight => "lr",
            Flip::UpDown => "ud",
            Flip::Both => "lrud",
        }
    }
}

pub fn rotate_point(p: Point, center: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    let d = p - center;
    Point::new(center.x + c * d.x - s * d.y, center.y + s * d.x + c * d.y)
}

pub fn flip_sample(sample: &LabeledSample, flip: Flip) -> Result<LabeledSample, DatasetError> {
    let size = sample.size();
    // Flips are involutions, so the inverse image map is the flip itself.
    let image = sample.image.warp(|p| flip.apply(p, size));
    sample.transformed(format!("{}_{}", sample.id, flip.suffix()), image, move |p| flip.apply(p, size))
}

/// Rotates image and labels by `angle` radians about the image center.
/// Pixels that come from outside the frame are black.
pub fn rotate_sample(sample: &LabeledSample, angle: f64) -> Result<LabeledSample, DatasetError> {
    let center = image_center(sample.size());
    let image = sample.image.warp(|p| rotate_point(p, center, -angle));
    sample.transformed(format!("{}_rot", sample.id), image, move |p| rotate_point(p, center, angle))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    /// Rotation angle is drawn uniformly from `[-max, max]` degrees.
    pub rotation_max_deg: f64,
    /// Noise variance on the 0–255 intensity scale; `0.2 × 255` by default.
    pub noise_variance_255: f64,
    /// Also add noise to the unaugmented copies.
    pub noise_originals: bool,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self { rotation_max_deg: 45.0, noise_variance_255: 0.2 * 255.0, noise_originals: false, seed: 0 }
    }
}

impl AugmentSpec {
    pub fn noise_sigma(&self) -> f64 {
        self.noise_variance_255.sqrt() / 255.0
    }
}

/// Per-item generator: stream `index` of the ChaCha8 generator seeded by `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn add_gaussian_noise(image: &mut Image, sigma: f64, rng: &mut impl Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for v in &mut image.data {
        *v = (*v as f64 + normal.sample(rng)).clamp(0.0, 1.0) as f32;
    }
}

/// The four augmented variants of one sample: left-right flip, up-down flip,
/// both flips and a random rotation, each with additive Gaussian noise.
/// `index` selects the random stream so results do not depend on ordering.
pub fn augment(
    sample: &LabeledSample,
    spec: &AugmentSpec,
    index: u64,
) -> Result<Vec<LabeledSample>, DatasetError> {
    let mut rng = item_rng(spec.seed, index);
    let max = spec.rotation_max_deg.to_radians();
    let angle = if max > 0.0 { rng.gen_range(-max..=max) } else { 0.0 };
    let mut out = vec![
        flip_sample(sample, Flip::LeftRight)?,
        flip_sample(sample, Flip::UpDown)?,
        flip_sample(sample, Flip::Both)?,
        rotate_sample(sample, angle)?,
    ];
    for s in &mut out {
        add_gaussian_noise(&mut s.image, spec.noise_sigma(), &mut rng);
    }
    Ok(out)
}

/// Originals followed by their augmented variants.
pub fn augment_all(
    samples: &[LabeledSample],
    spec: &AugmentSpec,
) -> Result<Vec<LabeledSample>, DatasetError> {
    let mut out = Vec::with_capacity(samples.len() * 5);
    for (i, s) in samples.iter().enumerate() {
        let mut original = s.clone();
        if spec.noise_originals {
            // Separate stream family from the variants.
            let mut rng = item_rng(spec.seed ^ 0x6e_6f69_7365, i as u64);
            add_gaussian_noise(&mut original.image, spec.noise_sigma(), &mut rng);
        }
        out.push(original);
        out.extend(augment(s, spec, i as u64)?);
    }
    Ok(out)
}

/// Seeded split into `(train, val)` index lists, each sorted ascending.
/// The training part has `floor(fraction · n)` items.
pub fn split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(fraction > 0.0 && fraction < 1.0, "split fraction must be in (0, 1)");
    let n_train = ((fraction * n as f64) + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut val = idx[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// One manifest row; paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub lumen: PathBuf,
    pub media: PathBuf,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|source| DatasetError::Manifest { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        for p in [&mut e.image, &mut e.lumen, &mut e.media] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(entries).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Loads and preprocesses every manifest entry.
pub fn load_dataset(
    manifest: &Path,
    size: Option<usize>,
    n_v: usize,
) -> Result<Vec<LabeledSample>, DatasetError> {
    read_manifest(manifest)?
        .iter()
        .map(|e| {
            let raw = Image::load_gray(&e.image)?;
            let lumen = load_label(&e.lumen)?;
            let media = load_label(&e.media)?;
            preprocess(&e.id, &raw, &lumen, &media, size.unwrap_or(raw.width), n_v)
        })
        .collect()
}

/// Writes samples as `images/*.png`, `labels/*.lum.txt`, `labels/*.med.txt`
/// and `manifest.json` under `dir`.
pub fn write_dataset(dir: &Path, samples: &[LabeledSample]) -> Result<Vec<ManifestEntry>, DatasetError> {
    let images = dir.join("images");
    let labels = dir.join("labels");
    fs::create_dir_all(&images).map_err(io_err(&images))?;
    fs::create_dir_all(&labels).map_err(io_err(&labels))?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let entry = ManifestEntry {
            id: s.id.clone(),
            image: PathBuf::from(format!("images/{}.png", s.id)),
            lumen: PathBuf::from(format!("labels/{}.lum.txt", s.id)),
            media: PathBuf::from(format!("labels/{}.med.txt", s.id)),
        };
        s.image.save_png(&dir.join(&entry.image))?;
        save_label(&dir.join(&entry.lumen), &s.lumen_gt)?;
        save_label(&dir.join(&entry.media), &s.media_gt)?;
        entries.push(entry);
    }
    write_manifest(&dir.join("manifest.json"), &entries)?;
    Ok(entries)
}

/// Parameters of the synthetic vessel generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub count: usize,
    pub size: usize,
    pub n_v: usize,
    /// Number of Fourier harmonics perturbing each boundary.
    pub harmonics: usize,
    /// Lumen harmonic amplitudes are uniform in `[-alpha_max, alpha_max]`.
    pub alpha_max: f64,
    /// Media amplitudes are bounded by `alpha_max · media_alpha_frac`.
    pub media_alpha_frac: f64,
    /// Lumen base radius as a fraction of the image size.
    pub lumen_radius_frac: f64,
    /// Relative per-sample jitter of the base radius.
    pub radius_jitter: f64,
    /// Media base radius over lumen base radius.
    pub media_ratio: f64,
    /// Vertices of each stored ground-truth contour.
    pub contour_points: usize,
    /// Standard deviation of the multiplicative speckle.
    pub speckle: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            count: 500,
            size: 64,
            n_v: 32,
            harmonics: 3,
            alpha_max: 0.15,
            media_alpha_frac: 1.0 / 3.0,
            lumen_radius_frac: 0.2,
            radius_jitter: 0.1,
            media_ratio: 1.8,
            contour_points: 256,
            speckle: 0.15,
            noise: 0.03,
            seed: 0,
        }
    }
}

const LUMEN_LEVEL: f64 = 0.12;
const MEDIA_LEVEL: f64 = 0.78;
const BACKGROUND_LEVEL: f64 = 0.42;

impl SynthSpec {
    /// Rejects specs whose worst-case shapes are not star-shaped, not nested,
    /// or leave the frame.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidSpec(m));
        if self.size < 8 || self.n_v < 3 || self.contour_points < 3 {
            return bad(format!(
                "size {} / n_v {} / contour_points {} too small",
                self.size, self.n_v, self.contour_points
            ));
        }
        if !(self.alpha_max >= 0.0 && self.media_alpha_frac >= 0.0 && self.radius_jitter >= 0.0) {
            return bad("amplitudes and jitter must be non-negative".into());
        }
        if !(self.radius_jitter < 1.0 && self.lumen_radius_frac > 0.0) {
            return bad("base radius must stay positive".into());
        }
        let h = self.harmonics as f64;
        let lumen_swing = h * self.alpha_max;
        let media_swing = h * self.alpha_max * self.media_alpha_frac;
        if lumen_swing >= 1.0 || media_swing >= 1.0 {
            return bad(format!("harmonic amplitudes sum to {lumen_swing:.3}; contours would not be star-shaped"));
        }
        if self.media_ratio * (1.0 - media_swing) <= 1.0 + lumen_swing {
            return bad("media may cross the lumen for these amplitudes and ratio".into());
        }
        let r_max = self.lumen_radius_frac
            * self.size as f64
            * (1.0 + self.radius_jitter)
            * self.media_ratio
            * (1.0 + media_swing);
        let room = (self.size as f64 - 1.0) / 2.0 - 1.0;
        if r_max > room {
            return bad(format!("media radius may reach {r_max:.2} px, frame allows {room:.2}"));
        }
        Ok(())
    }
}

/// Radius function `R (1 + Σ α_h cos(hφ + ψ_h))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialShape {
    pub base: f64,
    pub terms: Vec<(f64, f64)>,
}

impl RadialShape {
    fn random(base: f64, harmonics: usize, amp: f64, rng: &mut impl Rng) -> Self {
        let terms = (1..=harmonics)
            .map(|_| {
                let a = if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 };
                (a, rng.gen_range(0.0..TAU))
            })
            .collect();
        Self { base, terms }
    }

    pub fn radius(&self, phi: f64) -> f64 {
        let wobble: f64 = self
            .terms
            .iter()
            .enumerate()
            .map(|(k, &(a, psi))| a * ((k + 1) as f64 * phi + psi).cos())
            .sum();
        self.base * (1.0 + wobble)
    }

    pub fn contour(&self, center: Point, points: usize) -> CartesianContour {
        let pts = (0..points)
            .map(|j| {
                let phi = TAU * j as f64 / points as f64;
                Point::from_polar(center, self.radius(phi), phi)
            })
            .collect();
        CartesianContour::new(pts).expect("positive radii give distinct points")
    }
}

/// One synthetic vessel cross-section.
pub fn synth_sample(spec: &SynthSpec, index: usize) -> Result<LabeledSample, DatasetError> {
    let mut rng = item_rng(spec.seed, index as u64);
    let scale = 1.0 + spec.radius_jitter * rng.gen_range(-1.0..=1.0);
    let lumen_base = spec.lumen_radius_frac * spec.size as f64 * scale;
    let lumen = RadialShape::random(lumen_base, spec.harmonics, spec.alpha_max, &mut rng);
    let media = RadialShape::random(
        lumen_base * spec.media_ratio,
        spec.harmonics,
        spec.alpha_max * spec.media_alpha_frac,
        &mut rng,
    );
    let center = image_center(spec.size);
    let speckle = Normal::new(0.0, spec.speckle.max(0.0)).expect("finite speckle");
    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("finite noise");
    let mut data = Vec::with_capacity(spec.size * spec.size);
    for y in 0..spec.size {
        for x in 0..spec.size {
            let d = Point::new(x as f64, y as f64) - center;
            let rho = d.norm();
            let phi = d.y.atan2(d.x).rem_euclid(TAU);
            // Linear one-pixel ramp across each boundary.
            let in_lumen = (lumen.radius(phi) - rho + 0.5).clamp(0.0, 1.0);
            let in_media = (media.radius(phi) - rho + 0.5).clamp(0.0, 1.0).max(in_lumen);
            let clean = BACKGROUND_LEVEL * (1.0 - in_media)
                + MEDIA_LEVEL * (in_media - in_lumen)
                + LUMEN_LEVEL * in_lumen;
            let v = clean * (1.0 + speckle.sample(&mut rng)) + noise.sample(&mut rng);
            data.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    let image = Image { width: spec.size, height: spec.size, channels: 1, data };
    LabeledSample::new(
        format!("synth_{index:05}"),
        image.replicate(3),
        lumen.contour(center, spec.contour_points),
        media.contour(center, spec.contour_points),
        spec.n_v,
    )
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<LabeledSample>, DatasetError> {
    spec.validate()?;
    (0..spec.count).map(|i| synth_sample(spec, i)).collect()
}

/// Maximum radius representable on an `size × size` image (half its diagonal).
pub fn r_max(size: usize) -> f64 {
    (size as f64) * std::f64::consts::SQRT_2 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(center: Point, r: f64, n: usize) -> CartesianContour {
        RadialShape { base: r, terms: vec![] }.contour(center, n)
    }

    fn gradient_image(size: usize) -> Image {
        Image::from_fn(size, size, |x, y| ((x + 2 * y) as f32 / (3 * size) as f32).min(1.0))
    }

    fn sample(size: usize, n_v: usize) -> LabeledSample {
        let c = image_center(size);
        let lumen = RadialShape { base: 6.0, terms: vec![(0.1, 0.3), (0.05, 1.0)] }.contour(c, 200);
        let media = RadialShape { base: 11.0, terms: vec![(0.03, 2.0)] }.contour(c, 200);
        LabeledSample::new("s", gradient_image(size).replicate(3), lumen, media, n_v).unwrap()
    }

    #[test]
    fn preprocess_scales_labels_and_preserves_constants() {
        let raw = Image::from_fn(448, 448, |_, _| 0.37);
        let lumen = circle(Point::new(223.5, 223.5), 100.0, 400);
        let media = circle(Point::new(223.5, 223.5), 150.0, 400);
        let s = preprocess("a", &raw, &lumen, &media, 224, 16).unwrap();
        assert_eq!((s.image.width, s.image.height, s.image.channels), (224, 224, 3));
        assert!(s.image.data.iter().all(|&v| (v - 0.37).abs() < 1e-6));
        let pts = vec![Point::new(100.0, 200.0), Point::new(300.0, 200.0), Point::new(200.0, 300.0)];
        let scaled = CartesianContour::new(pts).unwrap().map(|p| Point::new(p.x * 0.5, p.y * 0.5)).unwrap();
        assert_eq!(scaled.points()[0], Point::new(50.0, 100.0));
        // Circle of radius 100 about (223.5, 223.5) becomes radius 50 about (111.75, 111.75);
        // sampled about (111.5, 111.5) the radii stay within 0.25·√2 px of 50.
        assert!(s.lumen_chain.radii().iter().all(|r| (r - 50.0).abs() < 0.36));
    }

    #[test]
    fn preprocess_circle_radii_at_exact_center() {
        let raw = Image::from_fn(448, 448, |_, _| 0.5);
        // Scaling maps (223, 223) to (111.5, 111.5), the 224-image center.
        let lumen = circle(Point::new(223.0, 223.0), 100.0, 2000);
        let media = circle(Point::new(223.0, 223.0), 150.0, 2000);
        let s = preprocess("a", &raw, &lumen, &media, 224, 32).unwrap();
        assert!(s.lumen_chain.radii().iter().all(|r| (r - 50.0).abs() < 1e-3));
    }

    #[test]
    fn preprocess_is_idempotent_at_target_size() {
        let s = sample(32, 16);
        let again = preprocess("s", &s.image, &s.lumen_gt, &s.media_gt, 32, 16).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn lr_flip_maps_corner_and_is_involution() {
        assert_eq!(Flip::LeftRight.apply(Point::new(223.0, 0.0), 224), Point::new(0.0, 0.0));
        let s = sample(32, 16);
        let twice = flip_sample(&flip_sample(&s, Flip::LeftRight).unwrap(), Flip::LeftRight).unwrap();
        assert_eq!(twice.image, s.image);
        for (p, q) in twice.lumen_gt.points().iter().zip(s.lumen_gt.points()) {
            assert!(p.distance(*q) < 1e-12);
        }
        for (p, q) in twice.lumen_chain.radii().iter().zip(s.lumen_chain.radii()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn flips_permute_rays() {
        let s = sample(32, 16);
        let n = 16;
        let lr = flip_sample(&s, Flip::LeftRight).unwrap();
        let ud = flip_sample(&s, Flip::UpDown).unwrap();
        for k in 0..n {
            // LR maps angle φ to π - φ, UD maps φ to -φ.
            let lr_k = (n / 2 + n - k) % n;
            let ud_k = (n - k) % n;
            assert!((lr.lumen_chain.radii()[lr_k] - s.lumen_chain.radii()[k]).abs() < 1e-9);
            assert!((ud.media_chain.radii()[ud_k] - s.media_chain.radii()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_round_trip() {
        let s = sample(48, 16);
        let angle = 0.6;
        let back = rotate_sample(&rotate_sample(&s, angle).unwrap(), -angle).unwrap();
        for (p, q) in back.lumen_gt.points().iter().zip(s.lumen_gt.points()) {
            assert!(p.distance(*q) < 1e-9);
        }
        let c = image_center(48);
        let mut worst = 0.0f32;
        for y in 0..48 {
            for x in 0..48 {
                if Point::new(x as f64, y as f64).distance(c) < 22.0 {
                    worst = worst.max((back.image.get(x, y, 0) - s.image.get(x, y, 0)).abs());
                }
            }
        }
        assert!(worst <= 0.05, "{worst}");
    }

    #[test]
    fn rotation_by_ray_multiple_permutes_chain() {
        let s = sample(48, 16);
        let step = TAU / 16.0;
        let r = rotate_sample(&s, 3.0 * step).unwrap();
        for k in 0..16 {
            let diff = r.lumen_chain.radii()[(k + 3) % 16] - s.lumen_chain.radii()[k];
            assert!(diff.abs() < 1e-6, "{diff}");
        }
    }

    #[test]
    fn augment_is_seeded() {
        let s = sample(32, 16);
        let spec = AugmentSpec { seed: 9, ..Default::default() };
        let a = augment(&s, &spec, 3).unwrap();
        let b = augment(&s, &spec, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|v| v.image.data.iter().all(|x| (0.0..=1.0).contains(x))));
        let c = augment(&s, &AugmentSpec { seed: 10, ..spec }, 3).unwrap();
        assert_ne!(a[3].image, c[3].image);
        assert!((spec.noise_sigma() - 51f64.sqrt() / 255.0).abs() < 1e-15);
    }

    #[test]
    fn split_sizes() {
        let (t, v) = split(109, 0.9, 1);
        assert_eq!((t.len(), v.len()), (98, 11));
        let (t, v) = split(2, 0.5, 1);
        assert_eq!((t.len(), v.len()), (1, 1));
        assert_eq!(split(109, 0.9, 5), split(109, 0.9, 5));
        let (t, v) = split(50, 0.7, 3);
        let mut all: Vec<usize> = t.iter().chain(&v).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn synth_without_harmonics_gives_circles() {
        let spec = SynthSpec { count: 3, harmonics: 0, radius_jitter: 0.0, ..Default::default() };
        for s in synth_generate(&spec).unwrap() {
            let r = s.lumen_chain.radii();
            assert!(r.iter().all(|x| (x - r[0]).abs() < 1e-9), "{r:?}");
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec { count: 4, seed: 11, ..Default::default() };
        assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
        let other = SynthSpec { seed: 12, ..spec.clone() };
        assert_ne!(synth_generate(&spec).unwrap()[0].image, synth_generate(&other).unwrap()[0].image);
    }

    #[test]
    fn synth_rejects_crossing_amplitudes() {
        let spec = SynthSpec { alpha_max: 0.3, ..Default::default() };
        assert!(matches!(spec.validate(), Err(DatasetError::InvalidSpec(_))));
        let spec = SynthSpec { media_ratio: 1.2, ..Default::default() };
        assert!(matches!(spec.validate(), Err(DatasetError::InvalidSpec(_))));
        assert!(SynthSpec::default().validate().is_ok());
    }

    #[test]
    fn not_nested_is_rejected() {
        let c = image_center(32);
        let err = LabeledSample::new("x", gradient_image(32), circle(c, 8.0, 64), circle(c, 5.0, 64), 8)
            .unwrap_err();
        assert!(matches!(err, DatasetError::NotNested { .. }));
    }

    #[test]
    fn dataset_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { count: 2, seed: 4, ..Default::default() };
        let samples = synth_generate(&spec).unwrap();
        write_dataset(dir.path(), &samples).unwrap();
        let loaded = load_dataset(&dir.path().join("manifest.json"), None, spec.n_v).unwrap();
        assert_eq!(loaded.len(), 2);
        for (a, b) in loaded.iter().zip(&samples) {
            assert_eq!(a.id, b.id);
            for (p, q) in a.lumen_gt.points().iter().zip(b.lumen_gt.points()) {
                assert!(p.distance(*q) < 1e-6);
            }
            let max_err = a.image.data.iter().zip(&b.image.data).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max);
            assert!(max_err <= 0.5 / 255.0 + 1e-6);
        }
    }
}
