//! Convolutional radial regressor: image batch in, `2·n_v` radii per image out.
//!
//! Layout is NHWC throughout. Each block is a `k×k` "same" convolution, ReLU
//! and 2×2 max-pool; the head is a stack of fully connected layers (ReLU on
//! the hidden ones) followed by the bounded output `r_max · σ(z)`, which equals
//! `r_max · (1 - exp(-softplus(z)))`. Output row `b` holds the lumen radii
//! followed by the media radii.

use std::fmt::Debug;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PCSG";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint is truncated")]
    TruncatedFile,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Element type of tensors and parameters.
pub trait Scalar:
    Float + FromPrimitive + Default + Debug + Send + Sync + std::iter::Sum + std::ops::AddAssign + 'static
{
    /// `C = α·A·B + β·C` with explicit strides.
    ///
    /// # Safety
    /// Pointers and strides must describe valid `m×k`, `k×n` and `m×n` matrices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// `C = op(A)·op(B) + β·C` on row-major buffers; `op` transposes when the flag is set.
#[allow(clippy::too_many_arguments)]
fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_t: bool,
    b: &[T],
    b_t: bool,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_t { (1, k) } else { (n, 1) };
    // SAFETY: lengths are checked above and strides match the stated layouts.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

fn cast<A: ToPrimitive, B: NumCast>(v: A) -> B {
    B::from(v).expect("finite value converts")
}

/// Dense row-major tensor with up to four dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, PredictorError> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > 4 || expected != data.len() {
            return Err(PredictorError::ShapeMismatch { expected: shape, found: vec![data.len()] });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Slice along the first axis.
    pub fn row(&self, i: usize) -> &[T] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| cast(v)).collect() }
    }
}

/// Optional input stage ahead of the convolution trunk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frontend {
    #[default]
    Identity,
}

/// Architecture of a regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub input_size: usize,
    pub input_channels: usize,
    /// Output channels of each conv block; every block halves the spatial size.
    pub channels: Vec<usize>,
    pub kernel: usize,
    /// Widths of the hidden fully connected layers.
    pub hidden: Vec<usize>,
    pub n_v: usize,
    /// Upper bound of the predicted radii.
    pub r_max: f64,
    #[serde(default)]
    pub frontend: Frontend,
}

impl Descriptor {
    /// Four blocks (16, 32, 64, 128), one hidden layer of 256, three input channels.
    pub fn reference(input_size: usize, n_v: usize) -> Self {
        Self {
            input_size,
            input_channels: 3,
            channels: vec![16, 32, 64, 128],
            kernel: 3,
            hidden: vec![256],
            n_v,
            r_max: crate::dataset::r_max(input_size),
            frontend: Frontend::Identity,
        }
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        let bad = |m: String| Err(PredictorError::InvalidDescriptor(m));
        if self.input_size == 0 || self.input_channels == 0 {
            return bad("input size and channels must be positive".into());
        }
        if self.kernel.is_multiple_of(2) {
            return bad(format!("kernel {} must be odd", self.kernel));
        }
        let factor = 1usize.checked_shl(self.channels.len() as u32).unwrap_or(0);
        if factor == 0 || !self.input_size.is_multiple_of(factor) {
            return bad(format!(
                "input size {} is not divisible by 2^{}",
                self.input_size,
                self.channels.len()
            ));
        }
        if self.channels.iter().chain(&self.hidden).any(|&c| c == 0) {
            return bad("layer widths must be positive".into());
        }
        if self.n_v < 3 {
            return bad(format!("n_v {} < 3", self.n_v));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return bad(format!("r_max {} must be positive", self.r_max));
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        2 * self.n_v
    }

    fn blocks(&self) -> Vec<ConvShape> {
        let mut size = self.input_size;
        let mut cin = self.input_channels;
        self.channels
            .iter()
            .map(|&cout| {
                let s = ConvShape { size, cin, cout, k: self.kernel };
                size /= 2;
                cin = cout;
                s
            })
            .collect()
    }

    fn flat_features(&self) -> usize {
        let size = self.input_size >> self.channels.len();
        let c = self.channels.last().copied().unwrap_or(self.input_channels);
        size * size * c
    }

    fn fc_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.flat_features()];
        widths.extend(&self.hidden);
        widths.push(self.outputs());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Names and shapes of all parameter arrays in storage order.
    pub fn parameter_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks().iter().enumerate() {
            out.push((format!("conv{i}.weight"), vec![b.k * b.k * b.cin, b.cout]));
            out.push((format!("conv{i}.bias"), vec![b.cout]));
        }
        for (i, (fin, fout)) in self.fc_shapes().into_iter().enumerate() {
            out.push((format!("fc{i}.weight"), vec![fin, fout]));
            out.push((format!("fc{i}.bias"), vec![fout]));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvShape {
    /// Spatial input size (square).
    size: usize,
    cin: usize,
    cout: usize,
    k: usize,
}

/// Initial parameter distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitScheme {
    pub weight_std: f64,
    pub bias: f64,
}

impl Default for InitScheme {
    fn default() -> Self {
        Self { weight_std: 0.01, bias: 1.0 }
    }
}

/// Regressor parameters. Every mutation through [`Regressor::params_mut`]
/// invalidates earlier forward caches.
#[derive(Debug, Clone)]
pub struct Regressor<T = f32> {
    descriptor: Descriptor,
    params: Vec<Vec<T>>,
    generation: u64,
}

pub type RegressorState = Regressor<f32>;

impl<T: Scalar> PartialEq for Regressor<T> {
    fn eq(&self, other: &Self) -> bool {
        self.descriptor == other.descriptor && self.params == other.params
    }
}

/// Parameter gradients, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub arrays: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn is_zero(&self) -> bool {
        self.arrays.iter().flatten().all(|v| v.is_zero())
    }
}

#[derive(Debug, Clone, Default)]
struct BlockCache<T> {
    cols: Vec<T>,
    act: Vec<T>,
    pooled: Vec<T>,
    argmax: Vec<u32>,
}

/// Activations kept by a forward pass for the backward pass. A cache can be
/// reused across calls to avoid reallocating its buffers.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f32> {
    generation: Option<u64>,
    batch: usize,
    blocks: Vec<BlockCache<T>>,
    /// Input of each fully connected layer.
    fc_inputs: Vec<Vec<T>>,
    logits: Vec<T>,
    /// `σ(z)` of the output layer.
    sigmoid: Vec<T>,
}

impl<T> Default for ForwardCache<T> {
    fn default() -> Self {
        Self {
            generation: None,
            batch: 0,
            blocks: Vec::new(),
            fc_inputs: Vec::new(),
            logits: Vec::new(),
            sigmoid: Vec::new(),
        }
    }
}

/// Reusable buffers for backward passes.
#[derive(Debug, Clone)]
pub struct BackwardScratch<T = f32> {
    dy: Vec<T>,
    dx: Vec<T>,
    dact: Vec<T>,
    dcols: Vec<T>,
}

impl<T> Default for BackwardScratch<T> {
    fn default() -> Self {
        Self { dy: Vec::new(), dx: Vec::new(), dact: Vec::new(), dcols: Vec::new() }
    }
}

fn reset<T: Scalar>(buf: &mut Vec<T>, len: usize) {
    buf.clear();
    buf.resize(len, T::zero());
}

impl<T: Scalar> Regressor<T> {
    /// Weights `N(0, 0.01²)`, biases 1.
    pub fn init(descriptor: Descriptor, seed: u64) -> Result<Self, PredictorError> {
        Self::init_with(descriptor, seed, InitScheme::default())
    }

    pub fn init_with(descriptor: Descriptor, seed: u64, scheme: InitScheme) -> Result<Self, PredictorError> {
        descriptor.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scheme.weight_std)
            .map_err(|e| PredictorError::InvalidDescriptor(e.to_string()))?;
        let params = descriptor
            .parameter_layout()
            .iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                if name.ends_with(".bias") {
                    vec![cast(scheme.bias); n]
                } else {
                    (0..n).map(|_| cast(normal.sample(&mut rng))).collect()
                }
            })
            .collect();
        Ok(Self { descriptor, params, generation: 0 })
    }

    pub fn from_parts(descriptor: Descriptor, params: Vec<Vec<T>>) -> Result<Self, PredictorError> {
        descriptor.validate()?;
        let layout = descriptor.parameter_layout();
        if layout.len() != params.len() {
            return Err(PredictorError::ShapeMismatch {
                expected: vec![layout.len()],
                found: vec![params.len()],
            });
        }
        for ((_, shape), p) in layout.iter().zip(&params) {
            let n: usize = shape.iter().product();
            if p.len() != n {
                return Err(PredictorError::ShapeMismatch { expected: shape.clone(), found: vec![p.len()] });
            }
        }
        Ok(Self { descriptor, params, generation: 0 })
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn params(&self) -> &[Vec<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<T>] {
        self.generation += 1;
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().flatten().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Regressor<U> {
        Regressor {
            descriptor: self.descriptor.clone(),
            params: self.params.iter().map(|p| p.iter().map(|&v| cast(v)).collect()).collect(),
            generation: 0,
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<usize, PredictorError> {
        let d = &self.descriptor;
        let s = input.shape();
        let expected = [s.first().copied().unwrap_or(0), d.input_size, d.input_size, d.input_channels];
        if s.len() != 4 || s[1..] != expected[1..] || s[0] == 0 {
            return Err(PredictorError::ShapeMismatch { expected: expected.to_vec(), found: s.to_vec() });
        }
        Ok(s[0])
    }

    /// Radii `[B, 2·n_v]` without keeping activations.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>, PredictorError> {
        Ok(self.forward(input)?.0)
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>), PredictorError> {
        let mut cache = ForwardCache::default();
        let radii = self.forward_into(input, &mut cache)?;
        Ok((radii, cache))
    }

    /// [`Regressor::forward`] reusing the buffers of `cache`.
    pub fn forward_into(&self, input: &Tensor<T>, cache: &mut ForwardCache<T>) -> Result<Tensor<T>, PredictorError> {
        let batch = self.check_input(input)?;
        let d = &self.descriptor;
        let shapes = d.blocks();
        cache.generation = None;
        cache.batch = batch;
        cache.blocks.resize_with(shapes.len(), Default::default);
        for (i, shape) in shapes.iter().copied().enumerate() {
            let (w, b) = (&self.params[2 * i], &self.params[2 * i + 1]);
            let (prev, rest) = cache.blocks.split_at_mut(i);
            let x: &[T] = if i == 0 { input.data() } else { &prev[i - 1].pooled };
            let bc = &mut rest[0];
            let rows = batch * shape.size * shape.size;
            im2col(x, batch, shape, &mut bc.cols);
            bc.act.resize(rows * shape.cout, T::zero());
            for r in bc.act.chunks_exact_mut(shape.cout) {
                r.copy_from_slice(b);
            }
            gemm(rows, shape.k * shape.k * shape.cin, shape.cout, &bc.cols, false, w, false, T::one(), &mut bc.act);
            bc.act.iter_mut().for_each(|v| *v = v.max(T::zero()));
            max_pool(&bc.act, batch, shape.size, shape.cout, &mut bc.pooled, &mut bc.argmax);
        }
        let fc = d.fc_shapes();
        let offset = 2 * d.channels.len();
        cache.fc_inputs.resize_with(fc.len(), Vec::new);
        let first: &[T] = cache.blocks.last().map_or(input.data(), |b| &b.pooled);
        cache.fc_inputs[0].clear();
        cache.fc_inputs[0].extend_from_slice(first);
        for (i, &(fin, fout)) in fc.iter().enumerate() {
            let (w, b) = (&self.params[offset + 2 * i], &self.params[offset + 2 * i + 1]);
            let (inputs, rest) = cache.fc_inputs.split_at_mut(i + 1);
            let x = &inputs[i];
            let y = rest.first_mut().unwrap_or(&mut cache.logits);
            y.resize(batch * fout, T::zero());
            for r in y.chunks_exact_mut(fout) {
                r.copy_from_slice(b);
            }
            gemm(batch, fin, fout, x, false, w, false, T::one(), y);
            if i + 1 < fc.len() {
                y.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
        }
        let r_max: T = cast(d.r_max);
        cache.sigmoid.clear();
        cache.sigmoid.extend(cache.logits.iter().map(|&z| T::one() / (T::one() + (-z).exp())));
        // A saturated sigmoid rounds to 0 or 1; keep radii strictly inside (0, r_max).
        let (lo, hi) = (T::min_positive_value(), r_max * (T::one() - T::epsilon()));
        let radii = cache.sigmoid.iter().map(|&s| (r_max * s).max(lo).min(hi)).collect();
        cache.generation = Some(self.generation);
        Ok(Tensor { shape: vec![batch, d.outputs()], data: radii })
    }

    /// Gradients of `Σ d_radii · radii` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache<T>, d_radii: &Tensor<T>) -> Result<Gradients<T>, PredictorError> {
        let mut grads = Gradients { arrays: Vec::new() };
        self.backward_into(cache, d_radii, &mut grads, &mut BackwardScratch::default())?;
        Ok(grads)
    }

    /// [`Regressor::backward`] writing into `grads` and reusing `scratch`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache<T>,
        d_radii: &Tensor<T>,
        grads: &mut Gradients<T>,
        scratch: &mut BackwardScratch<T>,
    ) -> Result<(), PredictorError> {
        if cache.generation != Some(self.generation) {
            return Err(PredictorError::StaleCache);
        }
        let d = &self.descriptor;
        let batch = cache.batch;
        if d_radii.shape() != [batch, d.outputs()] {
            return Err(PredictorError::ShapeMismatch {
                expected: vec![batch, d.outputs()],
                found: d_radii.shape().to_vec(),
            });
        }
        grads.arrays.resize_with(self.params.len(), Vec::new);
        for (g, p) in grads.arrays.iter_mut().zip(&self.params) {
            g.resize(p.len(), T::zero());
        }
        let r_max: T = cast(d.r_max);
        let BackwardScratch { dy, dx, dact, dcols } = scratch;
        dy.clear();
        dy.extend(d_radii.data().iter().zip(&cache.sigmoid).map(|(&g, &s)| g * r_max * s * (T::one() - s)));

        let fc = d.fc_shapes();
        let offset = 2 * d.channels.len();
        for (i, &(fin, fout)) in fc.iter().enumerate().rev() {
            let x = &cache.fc_inputs[i];
            gemm(fin, batch, fout, x, true, dy, false, T::zero(), &mut grads.arrays[offset + 2 * i]);
            column_sums(dy, fout, &mut grads.arrays[offset + 2 * i + 1]);
            if i == 0 && d.channels.is_empty() {
                break;
            }
            dx.resize(batch * fin, T::zero());
            gemm(batch, fout, fin, dy, false, &self.params[offset + 2 * i], true, T::zero(), dx);
            // Every remaining input is a ReLU output (or a pooled one).
            for (g, &v) in dx.iter_mut().zip(x) {
                if v <= T::zero() {
                    *g = T::zero();
                }
            }
            std::mem::swap(dy, dx);
        }

        for (i, shape) in d.blocks().into_iter().enumerate().rev() {
            let bc = &cache.blocks[i];
            let rows = batch * shape.size * shape.size;
            reset(dact, rows * shape.cout);
            for (&g, &idx) in dy.iter().zip(&bc.argmax) {
                dact[idx as usize] += g;
            }
            for (g, &a) in dact.iter_mut().zip(&bc.act) {
                if a <= T::zero() {
                    *g = T::zero();
                }
            }
            let kk = shape.k * shape.k * shape.cin;
            gemm(kk, rows, shape.cout, &bc.cols, true, dact, false, T::zero(), &mut grads.arrays[2 * i]);
            column_sums(dact, shape.cout, &mut grads.arrays[2 * i + 1]);
            if i > 0 {
                dcols.resize(rows * kk, T::zero());
                gemm(rows, shape.cout, kk, dact, false, &self.params[2 * i], true, T::zero(), dcols);
                col2im(dcols, batch, shape, dy);
            }
        }
        Ok(())
    }
}

impl Regressor<f32> {
    pub fn save(&self, path: &Path) -> Result<(), PredictorError> {
        Checkpoint { model: self.clone(), optimizer: None }.save(path)
    }

    /// Loads the model part of a checkpoint.
    pub fn load(path: &Path) -> Result<Self, PredictorError> {
        Ok(Checkpoint::load(path)?.model)
    }
}

fn column_sums<T: Scalar>(m: &[T], cols: usize, out: &mut [T]) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for row in m.chunks_exact(cols) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// Rows `(b, y, x)`, columns `(ky, kx, c)`, zero padding.
/// A reused buffer of the right length already holds zeros at every padding
/// position, so only the in-bounds runs are rewritten.
fn im2col<T: Scalar>(x: &[T], batch: usize, s: ConvShape, cols: &mut Vec<T>) {
    let len = batch * s.size * s.size * s.k * s.k * s.cin;
    if cols.len() != len {
        reset(cols, len);
    }
    for_each_patch_run(batch, s, |src, dst, n| {
        for (o, &v) in cols[dst..dst + n].iter_mut().zip(&x[src..src + n]) {
            *o = v;
        }
    });
}

fn col2im<T: Scalar>(cols: &[T], batch: usize, s: ConvShape, x: &mut Vec<T>) {
    reset(x, batch * s.size * s.size * s.cin);
    for_each_patch_run(batch, s, |src, dst, n| {
        for (o, &v) in x[src..src + n].iter_mut().zip(&cols[dst..dst + n]) {
            *o += v;
        }
    });
}

/// Calls `f(image_offset, column_offset, len)` for every contiguous run shared
/// by the input image and its patch matrix. In NHWC the in-bounds taps of one
/// kernel row are adjacent in memory.
fn for_each_patch_run(batch: usize, s: ConvShape, mut f: impl FnMut(usize, usize, usize)) {
    let (n, c, k) = (s.size, s.cin, s.k);
    let pad = k / 2;
    let row_len = k * k * c;
    for b in 0..batch {
        for y in 0..n {
            for xo in 0..n {
                let row = ((b * n + y) * n + xo) * row_len;
                let kx_lo = pad.saturating_sub(xo);
                let kx_hi = k.min(n + pad - xo);
                for ky in 0..k {
                    let iy = y + ky;
                    if iy < pad || iy >= n + pad {
                        continue;
                    }
                    let src = ((b * n + iy - pad) * n + xo + kx_lo - pad) * c;
                    let dst = row + (ky * k + kx_lo) * c;
                    f(src, dst, (kx_hi - kx_lo) * c);
                }
            }
        }
    }
}

/// 2×2 max-pool; ties go to the first element in row-major window order.
fn max_pool<T: Scalar>(act: &[T], batch: usize, n: usize, c: usize, out: &mut Vec<T>, argmax: &mut Vec<u32>) {
    let h = n / 2;
    out.resize(batch * h * h * c, T::zero());
    argmax.resize(batch * h * h * c, 0);
    for b in 0..batch {
        for y in 0..h {
            for x in 0..h {
                let i00 = ((b * n + 2 * y) * n + 2 * x) * c;
                let taps = [i00, i00 + c, i00 + n * c, i00 + n * c + c];
                let o = ((b * h + y) * h + x) * c;
                let out = &mut out[o..o + c];
                let arg = &mut argmax[o..o + c];
                out.copy_from_slice(&act[i00..i00 + c]);
                for (ch, a) in arg.iter_mut().enumerate() {
                    *a = (i00 + ch) as u32;
                }
                for &t in &taps[1..] {
                    for (ch, (&v, (best, a))) in act[t..t + c].iter().zip(out.iter_mut().zip(arg.iter_mut())).enumerate() {
                        if v > *best {
                            *best = v;
                            *a = (t + ch) as u32;
                        }
                    }
                }
            }
        }
    }
}

/// Optimizer family and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd { momentum: f64, weight_decay: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn sgd() -> Self {
        OptimizerKind::Sgd { momentum: 0.9, weight_decay: 5e-4 }
    }
}

/// Optimizer hyperparameters plus per-parameter moment buffers.
/// SGD keeps its momentum buffer in `m` and leaves `v` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer<T = f32> {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

pub type OptimizerState = Optimizer<f32>;

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, model: &Regressor<T>) -> Self {
        let zeros = || model.params.iter().map(|p| vec![T::zero(); p.len()]).collect::<Vec<_>>();
        let v = match kind {
            OptimizerKind::Adam { .. } => zeros(),
            OptimizerKind::Sgd { .. } => Vec::new(),
        };
        Self { kind, lr, step: 0, m: zeros(), v }
    }

    pub fn step(&mut self, model: &mut Regressor<T>, grads: &Gradients<T>) -> Result<(), PredictorError> {
        let shapes_match = grads.arrays.len() == model.params.len()
            && grads.arrays.iter().zip(&model.params).all(|(g, p)| g.len() == p.len())
            && self.m.len() == model.params.len();
        if !shapes_match {
            return Err(PredictorError::ShapeMismatch {
                expected: model.params.iter().map(Vec::len).collect(),
                found: grads.arrays.iter().map(Vec::len).collect(),
            });
        }
        self.step += 1;
        let lr: T = cast(self.lr);
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1: T = cast(1.0 - beta1.powi(t));
                let c2: T = cast(1.0 - beta2.powi(t));
                let (b1, b2, eps): (T, T, T) = (cast(beta1), cast(beta2), cast(eps));
                for (((p, g), m), v) in model.params_mut().iter_mut().zip(&grads.arrays).zip(&mut self.m).zip(&mut self.v) {
                    for (((w, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Sgd { momentum, weight_decay } => {
                let (mu, wd): (T, T) = (cast(momentum), cast(weight_decay));
                for ((p, g), buf) in model.params_mut().iter_mut().zip(&grads.arrays).zip(&mut self.m) {
                    for ((w, &g), b) in p.iter_mut().zip(g).zip(buf.iter_mut()) {
                        let g = g + wd * *w;
                        *b = mu * *b + g;
                        *w = *w - lr * *b;
                    }
                }
            }
        }
        Ok(())
    }
}

/// A model with an optional optimizer state, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Regressor<f32>,
    pub optimizer: Option<Optimizer<f32>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptimizerHeader {
    #[serde(flatten)]
    kind: OptimizerKind,
    lr: f64,
    step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    descriptor: Descriptor,
    optimizer: Option<OptimizerHeader>,
    arrays: Vec<ArrayHeader>,
}

impl Checkpoint {
    fn arrays(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let layout = self.model.descriptor.parameter_layout();
        let mut out: Vec<_> =
            layout.iter().zip(&self.model.params).map(|((n, s), p)| (n.clone(), s.clone(), p.as_slice())).collect();
        if let Some(opt) = &self.optimizer {
            for (prefix, bufs) in [("m", &opt.m), ("v", &opt.v)] {
                for ((n, s), b) in layout.iter().zip(bufs) {
                    out.push((format!("opt.{prefix}.{n}"), s.clone(), b.as_slice()));
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arrays = self.arrays();
        let header = CheckpointHeader {
            descriptor: self.model.descriptor.clone(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerHeader { kind: o.kind, lr: o.lr, step: o.step }),
            arrays: arrays.iter().map(|(n, s, _)| ArrayHeader { name: n.clone(), shape: s.clone() }).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 4 * self.model.descriptor.parameter_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, _, data) in arrays {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PredictorError> {
        if bytes.len() < 4 {
            return Err(PredictorError::TruncatedFile);
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(PredictorError::BadMagic);
        }
        let word = |at: usize| -> Result<u32, PredictorError> {
            let b = bytes.get(at..at + 4).ok_or(PredictorError::TruncatedFile)?;
            Ok(u32::from_le_bytes(b.try_into().expect("four bytes")))
        };
        let version = word(4)?;
        if version != CHECKPOINT_VERSION {
            return Err(PredictorError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let len = word(8)? as usize;
        let json = bytes.get(12..12 + len).ok_or(PredictorError::TruncatedFile)?;
        let header: CheckpointHeader =
            serde_json::from_slice(json).map_err(|e| PredictorError::Corrupt(e.to_string()))?;
        header.descriptor.validate()?;
        let layout = header.descriptor.parameter_layout();
        let mut pos = 12 + len;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for a in &header.arrays {
            let n: usize = a.shape.iter().product();
            let raw = bytes.get(pos..pos + 4 * n).ok_or(PredictorError::TruncatedFile)?;
            arrays.push(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes"))).collect());
            pos += 4 * n;
        }
        if pos != bytes.len() {
            return Err(PredictorError::Corrupt(format!("{} trailing bytes", bytes.len() - pos)));
        }
        let expected_arrays = match &header.optimizer {
            None => layout.len(),
            Some(o) => match o.kind {
                OptimizerKind::Adam { .. } => 3 * layout.len(),
                OptimizerKind::Sgd { .. } => 2 * layout.len(),
            },
        };
        if arrays.len() != expected_arrays {
            return Err(PredictorError::Corrupt(format!(
                "{} arrays listed, descriptor implies {expected_arrays}",
                arrays.len()
            )));
        }
        let mut rest = arrays.split_off(layout.len());
        let model = Regressor::from_parts(header.descriptor, arrays)?;
        let optimizer = header.optimizer.map(|o| {
            let v = if rest.len() > layout.len() { rest.split_off(layout.len()) } else { Vec::new() };
            Optimizer { kind: o.kind, lr: o.lr, step: o.step, m: rest, v }
        });
        Ok(Self { model, optimizer })
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictorError> {
        let io = |source| PredictorError::Io { path: path.to_path_buf(), source };
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, PredictorError> {
        let bytes = fs::read(path).map_err(|source| PredictorError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }
}

/// ReLU on/off states and pooling winners of a forward pass.
#[derive(PartialEq)]
struct ActivationPattern {
    active: Vec<bool>,
    argmax: Vec<u32>,
}

fn activation_pattern<T: Scalar>(cache: &ForwardCache<T>) -> ActivationPattern {
    let zero = T::zero();
    let mut active = Vec::new();
    let mut argmax = Vec::new();
    for b in &cache.blocks {
        active.extend(b.act.iter().map(|&v| v > zero));
        argmax.extend_from_slice(&b.argmax);
    }
    for x in cache.fc_inputs.iter().skip(1) {
        active.extend(x.iter().map(|&v| v > zero));
    }
    ActivationPattern { active, argmax }
}

/// Outcome of a finite-difference check over sampled parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGradcheck {
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: usize,
    pub tol: f64,
    /// Draws skipped because a ReLU or pooling decision changed within the stencil.
    pub kinks_skipped: usize,
}

/// Descriptor used for the full-model gradient check: 8×8 input, two blocks
/// of two channels, four rays.
pub fn tiny_descriptor() -> Descriptor {
    Descriptor {
        input_size: 8,
        input_channels: 3,
        channels: vec![2, 2],
        kernel: 3,
        hidden: vec![6],
        n_v: 4,
        r_max: 4.0,
        frontend: Frontend::Identity,
    }
}

/// Compares backward against central differences of `Σ c · radii` in f64 on
/// `samples` randomly chosen parameters.
pub fn model_gradcheck(descriptor: Descriptor, seed: u64, samples: usize, tol: f64) -> Result<ModelGradcheck, PredictorError> {
    use rand::Rng;
    // Unit-variance weights scaled by 1/sqrt(fan_in) keep the output sigmoid
    // away from saturation, where every gradient is vanishingly small.
    let scheme = InitScheme { weight_std: 1.0, bias: 0.1 };
    let mut model = Regressor::<f64>::init_with(descriptor.clone(), seed, scheme)?;
    for ((name, shape), array) in descriptor.parameter_layout().iter().zip(model.params_mut()) {
        if name.ends_with(".weight") {
            let scale = 1.0 / (shape[0] as f64).sqrt();
            array.iter_mut().for_each(|w| *w *= scale);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let batch = 2;
    let n = descriptor.input_size;
    let input = Tensor::new(
        vec![batch, n, n, descriptor.input_channels],
        (0..batch * n * n * descriptor.input_channels).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let weights = Tensor::new(
        vec![batch, descriptor.outputs()],
        (0..batch * descriptor.outputs()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let objective = |m: &Regressor<f64>| -> Result<(f64, ActivationPattern), PredictorError> {
        let (r, cache) = m.forward(&input)?;
        let value = r.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
        Ok((value, activation_pattern(&cache)))
    };
    let (_, cache) = model.forward(&input)?;
    let base = activation_pattern(&cache);
    let grads = model.backward(&cache, &weights)?;
    let mut report = ModelGradcheck { checked: 0, max_rel_err: 0.0, failures: 0, tol, kinks_skipped: 0 };
    while report.checked < samples {
        if report.kinks_skipped > 100 * samples.max(1) {
            return Err(PredictorError::InvalidDescriptor("no differentiable parameters to check".into()));
        }
        let a = rng.gen_range(0..model.params.len());
        let i = rng.gen_range(0..model.params[a].len());
        let orig = model.params[a][i];
        // Fourth-order central stencil, with a step large enough that
        // rounding stays far below the tolerance.
        let h = 1e-3 * orig.abs().max(1.0);
        let mut diffs = [0.0; 2];
        let mut smooth = true;
        for (k, d) in diffs.iter_mut().enumerate() {
            let step = (k + 1) as f64 * h;
            let mut side = |x: f64| -> Result<f64, PredictorError> {
                model.params_mut()[a][i] = x;
                let (value, pattern) = objective(&model)?;
                smooth &= pattern == base;
                Ok(value)
            };
            *d = side(orig + step)? - side(orig - step)?;
        }
        model.params_mut()[a][i] = orig;
        if !smooth {
            report.kinks_skipped += 1;
            continue;
        }
        let numeric = (8.0 * diffs[0] - diffs[1]) / (12.0 * h);
        let analytic = grads.arrays[a][i];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-12);
        report.checked += 1;
        report.max_rel_err = report.max_rel_err.max(rel);
        if rel >= tol {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Descriptor {
        Descriptor {
            input_size: 16,
            input_channels: 3,
            channels: vec![4, 8],
            kernel: 3,
            hidden: vec![12],
            n_v: 8,
            r_max: 11.0,
            frontend: Frontend::Identity,
        }
    }

    fn random_input(batch: usize, d: &Descriptor, seed: u64) -> Tensor<f32> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = batch * d.input_size * d.input_size * d.input_channels;
        Tensor::new(
            vec![batch, d.input_size, d.input_size, d.input_channels],
            (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn init_is_seeded_with_unit_biases() {
        let a = Regressor::<f32>::init(small(), 3).unwrap();
        let b = Regressor::<f32>::init(small(), 3).unwrap();
        assert_eq!(a, b);
        for ((name, _), p) in small().parameter_layout().iter().zip(a.params()) {
            if name.ends_with("bias") {
                assert!(p.iter().all(|&v| v == 1.0));
            }
        }
        assert_ne!(a, Regressor::<f32>::init(small(), 4).unwrap());
    }

    #[test]
    fn descriptor_validation() {
        let mut d = small();
        d.input_size = 18;
        assert!(matches!(d.validate(), Err(PredictorError::InvalidDescriptor(_))));
        let mut d = small();
        d.kernel = 2;
        assert!(d.validate().is_err());
        assert!(Descriptor::reference(64, 32).validate().is_ok());
    }

    #[test]
    fn batch_rows_match_single_calls() {
        let d = small();
        let model = Regressor::<f32>::init_with(d.clone(), 1, InitScheme { weight_std: 0.2, bias: 0.1 }).unwrap();
        let both = random_input(2, &d, 5);
        let out = model.predict(&both).unwrap();
        for b in 0..2 {
            let single = Tensor::new(vec![1, 16, 16, 3], both.row(b).to_vec()).unwrap();
            assert_eq!(model.predict(&single).unwrap().row(0), out.row(b));
        }
        assert!(out.data().iter().all(|&r| r > 0.0 && (r as f64) < d.r_max));
    }

    #[test]
    fn zero_image_gives_identical_rows() {
        let d = small();
        let model = Regressor::<f32>::init(d.clone(), 9).unwrap();
        let out = model.predict(&Tensor::zeros(vec![3, 16, 16, 3])).unwrap();
        assert_eq!(out.row(0), out.row(1));
        assert_eq!(out.row(1), out.row(2));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let model = Regressor::<f32>::init(small(), 0).unwrap();
        let err = model.predict(&Tensor::zeros(vec![1, 8, 8, 3])).unwrap_err();
        assert!(matches!(err, PredictorError::ShapeMismatch { .. }));
    }

    #[test]
    fn reused_buffers_match_fresh_passes() {
        let d = small();
        let model = Regressor::<f32>::init_with(d.clone(), 4, InitScheme { weight_std: 0.2, bias: 0.1 }).unwrap();
        let mut cache = ForwardCache::default();
        let mut scratch = BackwardScratch::default();
        let mut grads = Gradients { arrays: Vec::new() };
        for (batch, seed) in [(3, 1), (2, 2), (2, 3)] {
            let input = random_input(batch, &d, seed);
            let upstream = Tensor::new(vec![batch, 16], vec![0.3; batch * 16]).unwrap();
            let (fresh, fresh_cache) = model.forward(&input).unwrap();
            assert_eq!(model.forward_into(&input, &mut cache).unwrap(), fresh);
            model.backward_into(&cache, &upstream, &mut grads, &mut scratch).unwrap();
            assert_eq!(grads, model.backward(&fresh_cache, &upstream).unwrap());
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let d = small();
        let model = Regressor::<f32>::init(d.clone(), 2).unwrap();
        let (_, cache) = model.forward(&random_input(2, &d, 1)).unwrap();
        let g = model.backward(&cache, &Tensor::zeros(vec![2, 16])).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let d = small();
        let mut model = Regressor::<f32>::init(d.clone(), 2).unwrap();
        let (_, cache) = model.forward(&random_input(1, &d, 1)).unwrap();
        model.params_mut()[0][0] += 1.0;
        let err = model.backward(&cache, &Tensor::zeros(vec![1, 16])).unwrap_err();
        assert!(matches!(err, PredictorError::StaleCache));
    }

    #[test]
    fn full_model_gradcheck_f64() {
        let report = model_gradcheck(tiny_descriptor(), 17, 100, 1e-6).unwrap();
        assert_eq!(report.failures, 0, "{report:?}");
    }

    #[test]
    fn directional_derivative_f32() {
        use rand::Rng;
        let d = small();
        let mut model = Regressor::<f32>::init_with(d.clone(), 8, InitScheme { weight_std: 0.2, bias: 0.1 }).unwrap();
        let input = random_input(2, &d, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c: Vec<f32> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upstream = Tensor::new(vec![2, 16], c.clone()).unwrap();
        let (_, cache) = model.forward(&input).unwrap();
        let grads = model.backward(&cache, &upstream).unwrap();
        let mut dir: Vec<Vec<f32>> =
            model.params().iter().map(|p| p.iter().map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let norm = dir.iter().flatten().map(|v| v * v).sum::<f32>().sqrt();
        dir.iter_mut().flatten().for_each(|v| *v /= norm);
        let analytic: f64 = grads.arrays.iter().flatten().zip(dir.iter().flatten()).map(|(g, v)| (*g * *v) as f64).sum();
        let base = model.clone();
        let objective = |m: &Regressor<f32>| -> f64 {
            m.predict(&input).unwrap().data().iter().zip(&c).map(|(a, b)| (*a * *b) as f64).sum()
        };
        let h = 2e-3f32;
        let mut shifted = |sign: f32| {
            for ((p, q), v) in model.params_mut().iter_mut().zip(base.params()).zip(&dir) {
                for ((w, &w0), &dv) in p.iter_mut().zip(q).zip(v) {
                    *w = w0 + sign * h * dv;
                }
            }
            objective(&model)
        };
        let numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * h as f64);
        let rel = (numeric - analytic).abs() / analytic.abs();
        assert!(rel < 1e-3, "numeric {numeric} analytic {analytic}");
    }

    #[test]
    fn linear_head_matches_closed_form() {
        // No conv blocks, no hidden layers: r = r_max σ(x W + b).
        let d = Descriptor {
            input_size: 2,
            input_channels: 1,
            channels: vec![],
            kernel: 3,
            hidden: vec![],
            n_v: 3,
            r_max: 5.0,
            frontend: Frontend::Identity,
        };
        let model = Regressor::<f64>::init_with(d.clone(), 1, InitScheme { weight_std: 0.3, bias: 0.2 }).unwrap();
        let x = [0.3, -0.1, 0.7, 0.2];
        let target = [1.0, 2.0, 3.0, 1.5, 2.5, 3.5];
        let input = Tensor::new(vec![1, 2, 2, 1], x.to_vec()).unwrap();
        let (r, cache) = model.forward(&input).unwrap();
        // Least squares ½‖r − t‖²: upstream gradient is r − t.
        let upstream: Vec<f64> = r.data().iter().zip(&target).map(|(a, t)| a - t).collect();
        let g = model.backward(&cache, &Tensor::new(vec![1, 6], upstream.clone()).unwrap()).unwrap();
        let w = &model.params()[0];
        let b = &model.params()[1];
        for j in 0..6 {
            let z: f64 = (0..4).map(|i| x[i] * w[i * 6 + j]).sum::<f64>() + b[j];
            let s = 1.0 / (1.0 + (-z).exp());
            let dz = upstream[j] * 5.0 * s * (1.0 - s);
            assert!((g.arrays[1][j] - dz).abs() < 1e-14);
            for (i, xi) in x.iter().enumerate().take(4) {
                assert!((g.arrays[0][i * 6 + j] - xi * dz).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sgd_zero_grad_applies_weight_decay_only() {
        let mut model = Regressor::<f64>::init(small(), 1).unwrap();
        let before = model.clone();
        let mut opt = Optimizer::new(OptimizerKind::sgd(), 0.01, &model);
        let zero = Gradients { arrays: model.params().iter().map(|p| vec![0.0; p.len()]).collect() };
        opt.step(&mut model, &zero).unwrap();
        for (p, q) in model.params().iter().flatten().zip(before.params().iter().flatten()) {
            assert!((p - (q - 0.01 * 5e-4 * q)).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_first_step_is_sign_scaled() {
        let mut model = Regressor::<f64>::init(small(), 1).unwrap();
        let before = model.clone();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.01, &model);
        let grads = Gradients {
            arrays: model.params().iter().enumerate().map(|(a, p)| (0..p.len()).map(|i| ((a + i) % 7) as f64 - 3.0).collect()).collect(),
        };
        opt.step(&mut model, &grads).unwrap();
        for ((p, q), g) in model.params().iter().flatten().zip(before.params().iter().flatten()).zip(grads.arrays.iter().flatten()) {
            let expected = q - 0.01 * g / (g.abs() + 1e-8);
            assert!((p - expected).abs() < 1e-12);
        }
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn checkpoint_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let model = Regressor::<f32>::init(small(), 6).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.001, &model);
        let mut trained = model.clone();
        let g = Gradients { arrays: model.params().iter().map(|p| vec![0.5; p.len()]).collect() };
        opt.step(&mut trained, &g).unwrap();
        let ck = Checkpoint { model: trained, optimizer: Some(opt) };
        let path = dir.path().join("m.pcsg");
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);

        let sgd = Optimizer::new(OptimizerKind::sgd(), 0.01, &model);
        let ck2 = Checkpoint { model: model.clone(), optimizer: Some(sgd) };
        assert_eq!(Checkpoint::from_bytes(&ck2.to_bytes()).unwrap(), ck2);

        model.save(&path).unwrap();
        assert_eq!(Regressor::load(&path).unwrap(), model);

        let mut bytes = fs::read(&path).unwrap();
        let len = bytes.len();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..len - 3]), Err(PredictorError::TruncatedFile)));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..10]), Err(PredictorError::TruncatedFile)));
        bytes[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(PredictorError::VersionMismatch { found: 9, .. })));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(PredictorError::BadMagic)));
    }
}
