//! Color-transform parameter calibration.
//!
//! A small convolutional regressor maps a 256x256 target scene image to the
//! four color-transform parameters (brightness, contrast, hue, saturation)
//! that best replicate it from a baseline image. Output ranges are enforced
//! by construction: three sigmoid-mapped heads for the bounded parameters
//! and one softplus head for saturation, so even untrained weights yield
//! valid parameters. Training minimizes the mean squared pixel error of the
//! replicated image; the parameter-space Jacobian of the replication is
//! taken by central differences (four parameters), everything upstream is
//! analytic.

use crate::nn::{self, Conv2d, Linear, MaxPool2, Param};
use crate::transforms::{apply_color_params, Image};
use ndarray::{Array1, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

/// Calibrator checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &[u8; 8] = b"PBCALIB\0";

/// Network input side in pixels.
pub const INPUT_SIDE: usize = 256;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least 2 targets to train (got {0})")]
    InsufficientData(usize),
    #[error("invalid color params: {field} = {value}")]
    InvalidParams { field: &'static str, value: f64 },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a calibrator checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (supported: {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("checkpoint header: {0}")]
    BadHeader(#[from] serde_json::Error),
}

/// The calibrator output quadruple: the digital color transform that best
/// replicates an observed scene change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorParams {
    /// In (0, 2).
    pub brightness_factor: f64,
    /// In (0, 2).
    pub contrast_factor: f64,
    /// Degrees in (-180, 180).
    pub hue_shift: f64,
    /// Positive.
    pub saturation_factor: f64,
}

impl ColorParams {
    pub fn identity() -> Self {
        Self { brightness_factor: 1.0, contrast_factor: 1.0, hue_shift: 0.0, saturation_factor: 1.0 }
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let check = |field: &'static str, value: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(CalibrationError::InvalidParams { field, value })
            }
        };
        check("brightness_factor", self.brightness_factor, self.brightness_factor > 0.0 && self.brightness_factor < 2.0)?;
        check("contrast_factor", self.contrast_factor, self.contrast_factor > 0.0 && self.contrast_factor < 2.0)?;
        check("hue_shift", self.hue_shift, self.hue_shift > -180.0 && self.hue_shift < 180.0)?;
        check("saturation_factor", self.saturation_factor, self.saturation_factor > 0.0)?;
        Ok(())
    }

    fn as_array(&self) -> [f64; 4] {
        [self.brightness_factor, self.contrast_factor, self.hue_shift, self.saturation_factor]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self { brightness_factor: a[0], contrast_factor: a[1], hue_shift: a[2], saturation_factor: a[3] }
    }
}

/// Per-channel standardization statistics of the target data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormStats {
    pub fn identity() -> Self {
        Self { mean: [0.0; 3], std: [1.0; 3] }
    }

    /// Computed over every pixel of every target image.
    pub fn from_targets(targets: &[Image]) -> Self {
        let mut sum = [0.0; 3];
        let mut sumsq = [0.0; 3];
        let mut n = 0usize;
        for t in targets {
            for row in t.pixels().outer_iter() {
                for px in row.outer_iter() {
                    for c in 0..3 {
                        sum[c] += px[c];
                        sumsq[c] += px[c] * px[c];
                    }
                    n += 1;
                }
            }
        }
        let n = n.max(1) as f64;
        let mut mean = [0.0; 3];
        let mut std = [1.0; 3];
        for c in 0..3 {
            mean[c] = sum[c] / n;
            std[c] = ((sumsq[c] / n - mean[c] * mean[c]).max(0.0)).sqrt().max(1e-6);
        }
        Self { mean, std }
    }
}

/// Architecture descriptor embedded in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratorArch {
    pub input_side: usize,
    pub conv_channels: [usize; 2],
    pub fc_width: usize,
    pub dropout: f64,
}

impl Default for CalibratorArch {
    fn default() -> Self {
        Self { input_side: INPUT_SIDE, conv_channels: [16, 32], fc_width: 128, dropout: 0.5 }
    }
}

/// The convolutional regressor: two conv+ReLU+maxpool stages, one fully
/// connected ReLU stage with dropout, a 3-way sigmoid head for the bounded
/// parameters and a softplus head for saturation.
pub struct CalibratorModel {
    pub arch: CalibratorArch,
    pub norm_stats: NormStats,
    conv1: Conv2d,
    conv2: Conv2d,
    fc: Linear,
    head_range: Linear,
    head_pos: Linear,
}

struct ForwardCtx {
    c1: crate::nn::ConvCtx,
    a1: Array3<f64>,
    p1: crate::nn::PoolCtx,
    c2: crate::nn::ConvCtx,
    a2: Array3<f64>,
    p2: crate::nn::PoolCtx,
    flat_dim: (usize, usize, usize),
    fc_ctx: crate::nn::LinearCtx,
    fc_act: Array1<f64>,
    drop_mask: Option<Array1<f64>>,
    range_ctx: crate::nn::LinearCtx,
    pos_ctx: crate::nn::LinearCtx,
    range_logits: Array1<f64>,
    pos_logit: f64,
}

impl CalibratorModel {
    pub fn new(arch: CalibratorArch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = arch.input_side;
        let flat = (side / 4) * (side / 4) * arch.conv_channels[1];
        Self {
            conv1: Conv2d::new(3, arch.conv_channels[0], 3, 1, 1, &mut rng),
            conv2: Conv2d::new(arch.conv_channels[0], arch.conv_channels[1], 3, 1, 1, &mut rng),
            fc: Linear::new(flat, arch.fc_width, &mut rng),
            head_range: Linear::new(arch.fc_width, 3, &mut rng),
            head_pos: Linear::new(arch.fc_width, 1, &mut rng),
            arch,
            norm_stats: NormStats::identity(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut dyn AnyParam> {
        vec![
            &mut self.conv1.w,
            &mut self.conv1.b,
            &mut self.conv2.w,
            &mut self.conv2.b,
            &mut self.fc.w,
            &mut self.fc.b,
            &mut self.head_range.w,
            &mut self.head_range.b,
            &mut self.head_pos.w,
            &mut self.head_pos.b,
        ]
    }

    fn standardize(&self, target: &Image) -> Array3<f64> {
        let side = self.arch.input_side;
        let resized = target.resize(side, side);
        let mut x = Array3::zeros((3, side, side));
        for y in 0..side {
            for xx in 0..side {
                let p = resized.get(y, xx);
                for c in 0..3 {
                    x[[c, y, xx]] = (p[c] - self.norm_stats.mean[c]) / self.norm_stats.std[c];
                }
            }
        }
        x
    }

    /// Maps head outputs into parameter space:
    /// brightness/contrast = 2*sigmoid, hue = (sigmoid - 0.5) * 360,
    /// saturation = softplus.
    fn heads_to_params(range_logits: &Array1<f64>, pos_logit: f64) -> ColorParams {
        ColorParams {
            brightness_factor: 2.0 * nn::sigmoid(range_logits[0]),
            contrast_factor: 2.0 * nn::sigmoid(range_logits[1]),
            hue_shift: (nn::sigmoid(range_logits[2]) - 0.5) * 360.0,
            saturation_factor: nn::softplus(pos_logit),
        }
    }

    fn forward(&self, x: &Array3<f64>, drop_rng: Option<&mut ChaCha8Rng>) -> (ColorParams, ForwardCtx) {
        let (y1, c1) = self.conv1.forward(x);
        let a1 = y1.mapv(|v| nn::leaky_relu(v, 0.0));
        let (p1out, p1) = MaxPool2::forward(&a1);
        let (y2, c2) = self.conv2.forward(&p1out);
        let a2 = y2.mapv(|v| nn::leaky_relu(v, 0.0));
        let (p2out, p2) = MaxPool2::forward(&a2);
        let flat_dim = p2out.dim();
        let flat = Array1::from_iter(p2out.iter().copied());
        let (fc_y, fc_ctx) = self.fc.forward(&flat);
        let mut fc_act = fc_y.mapv(|v| nn::leaky_relu(v, 0.0));
        let drop_mask = drop_rng.map(|rng| {
            let mask = nn::dropout_mask(fc_act.len(), self.arch.dropout, rng);
            fc_act *= &mask;
            mask
        });
        let (range_logits, range_ctx) = self.head_range.forward(&fc_act);
        let (pos_out, pos_ctx) = self.head_pos.forward(&fc_act);
        let pos_logit = pos_out[0];
        let params = Self::heads_to_params(&range_logits, pos_logit);
        (
            params,
            ForwardCtx {
                c1,
                a1,
                p1,
                c2,
                a2,
                p2,
                flat_dim,
                fc_ctx,
                fc_act,
                drop_mask,
                range_ctx,
                pos_ctx,
                range_logits,
                pos_logit,
            },
        )
    }

    /// Backpropagates a gradient in parameter space into the weights.
    fn backward(&mut self, ctx: &ForwardCtx, dparams: [f64; 4]) {
        // Through the range mappings.
        let mut drange = Array1::zeros(3);
        for i in 0..3 {
            let s = nn::sigmoid(ctx.range_logits[i]);
            let scale = if i == 2 { 360.0 } else { 2.0 };
            drange[i] = dparams[if i == 2 { 2 } else { i }] * scale * s * (1.0 - s);
        }
        let dpos = Array1::from_elem(1, dparams[3] * nn::sigmoid(ctx.pos_logit));
        let d_fc_act_a = self.head_range.backward(&ctx.range_ctx, &drange);
        let d_fc_act_b = self.head_pos.backward(&ctx.pos_ctx, &dpos);
        let mut d_fc_act = d_fc_act_a + d_fc_act_b;
        if let Some(mask) = &ctx.drop_mask {
            d_fc_act *= mask;
        }
        // Through the FC ReLU; fc_act is post-dropout, and dropped units
        // already carry zero gradient from the mask above.
        let d_fc_y = ndarray::Zip::from(&d_fc_act)
            .and(&ctx.fc_act)
            .map_collect(|&g, &y| if y > 0.0 { g } else { 0.0 });
        let d_flat = self.fc.backward(&ctx.fc_ctx, &d_fc_y);
        let d_p2 = Array3::from_shape_vec(ctx.flat_dim, d_flat.to_vec()).unwrap();
        let d_a2 = MaxPool2::backward(&ctx.p2, &d_p2);
        let d_y2 = ndarray::Zip::from(&d_a2)
            .and(&ctx.a2)
            .map_collect(|&g, &y| g * nn::leaky_relu_grad_from_y(y, 0.0));
        let d_p1 = self.conv2.backward(&ctx.c2, &d_y2);
        let d_a1 = MaxPool2::backward(&ctx.p1, &d_p1);
        let d_y1 = ndarray::Zip::from(&d_a1)
            .and(&ctx.a1)
            .map_collect(|&g, &y| g * nn::leaky_relu_grad_from_y(y, 0.0));
        // Input gradient is not needed; only accumulate conv1 weight grads.
        let _ = self.conv1.backward(&ctx.c1, &d_y1);
    }

    fn snapshot(&self) -> Vec<Vec<f64>> {
        self.param_views().into_iter().map(|p| p.to_vec()).collect()
    }

    fn restore(&mut self, snap: &[Vec<f64>]) {
        for (p, s) in self.params_mut().into_iter().zip(snap) {
            p.load(s);
        }
    }

    fn param_views(&self) -> Vec<Vec<f64>> {
        vec![
            self.conv1.w.v.iter().copied().collect(),
            self.conv1.b.v.iter().copied().collect(),
            self.conv2.w.v.iter().copied().collect(),
            self.conv2.b.v.iter().copied().collect(),
            self.fc.w.v.iter().copied().collect(),
            self.fc.b.v.iter().copied().collect(),
            self.head_range.w.v.iter().copied().collect(),
            self.head_range.b.v.iter().copied().collect(),
            self.head_pos.w.v.iter().copied().collect(),
            self.head_pos.b.v.iter().copied().collect(),
        ]
    }

    /// Persists the model: magic, version, JSON header (arch + norm stats),
    /// then raw little-endian f64 weights.
    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(CHECKPOINT_MAGIC)?;
        f.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let header = serde_json::to_vec(&(&self.arch, &self.norm_stats))?;
        f.write_all(&(header.len() as u64).to_le_bytes())?;
        f.write_all(&header)?;
        for p in self.param_views() {
            for v in p {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CalibrationError::BadMagic);
        }
        let mut v4 = [0u8; 4];
        f.read_exact(&mut v4)?;
        let version = u32::from_le_bytes(v4);
        if version != CHECKPOINT_VERSION {
            return Err(CalibrationError::VersionMismatch { found: version, supported: CHECKPOINT_VERSION });
        }
        let mut l8 = [0u8; 8];
        f.read_exact(&mut l8)?;
        let hlen = u64::from_le_bytes(l8) as usize;
        let mut hbuf = vec![0u8; hlen];
        f.read_exact(&mut hbuf)?;
        let (arch, norm_stats): (CalibratorArch, NormStats) = serde_json::from_slice(&hbuf)?;
        let mut model = Self::new(arch, 0);
        model.norm_stats = norm_stats;
        for p in model.params_mut() {
            let n = p.len();
            let mut vals = vec![0.0f64; n];
            for v in vals.iter_mut() {
                let mut b = [0u8; 8];
                f.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            }
            p.load(&vals);
        }
        Ok(model)
    }
}

/// Erased parameter handle for optimizer loops and serialization.
trait AnyParam {
    fn len(&self) -> usize;
    fn zero_grad(&mut self);
    fn adam_step(&mut self, lr: f64, t: u64);
    fn load(&mut self, vals: &[f64]);
    fn to_vec(&self) -> Vec<f64>;
}

impl<D: ndarray::Dimension> AnyParam for Param<D> {
    fn len(&self) -> usize {
        self.v.len()
    }
    fn zero_grad(&mut self) {
        Param::zero_grad(self)
    }
    fn adam_step(&mut self, lr: f64, t: u64) {
        Param::adam_step(self, lr, 0.9, 0.999, 1e-8, t)
    }
    fn load(&mut self, vals: &[f64]) {
        for (dst, &src) in self.v.iter_mut().zip(vals) {
            *dst = src;
        }
    }
    fn to_vec(&self) -> Vec<f64> {
        self.v.iter().copied().collect()
    }
}

/// Predicts the color-transform quadruple for a target image. Deterministic
/// in evaluation mode; untrained weights still yield in-range parameters.
pub fn predict_color_params(model: &CalibratorModel, target: &Image) -> ColorParams {
    let x = model.standardize(target);
    let (params, _) = model.forward(&x, None);
    params
}

/// Training configuration for [`train_calibrator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibratorTrainConfig {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Fraction of targets held out for validation (chronological split).
    pub val_fraction: f64,
}

impl Default for CalibratorTrainConfig {
    fn default() -> Self {
        // Paper-scale defaults: MSE loss, Adam at 1e-4, batch 4, 500
        // epochs, dropout 0.5.
        Self { epochs: 500, batch_size: 4, learning_rate: 1e-4, dropout: 0.5, seed: 0, val_fraction: 0.2 }
    }
}

/// Per-epoch losses from a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibratorTrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: u32,
    pub best_val_loss: f64,
}

/// Mean squared pixel error between the replication
/// `apply_color_params(baseline, params)` and the target.
pub fn replication_mse(baseline: &Image, params: &ColorParams, target: &Image) -> f64 {
    let replicated = apply_color_params(baseline, params);
    let mut acc = 0.0;
    for (a, b) in replicated.pixels().iter().zip(target.pixels().iter()) {
        let d = a - b;
        acc += d * d;
    }
    acc / replicated.pixels().len() as f64
}

/// Central-difference gradient of the replication MSE with respect to the
/// four color parameters. The parameter space is only 4-dimensional, so
/// numeric differentiation here is cheap and robust to the piecewise HSV
/// kernels; the network itself is differentiated analytically.
fn replication_grad(baseline: &Image, params: &ColorParams, target: &Image) -> [f64; 4] {
    let steps = [1e-3, 1e-3, 0.05, 1e-3];
    let base = params.as_array();
    let mut grad = [0.0; 4];
    for i in 0..4 {
        let mut hi = base;
        let mut lo = base;
        hi[i] += steps[i];
        lo[i] -= steps[i];
        let f_hi = replication_mse(baseline, &ColorParams::from_array(hi), target);
        let f_lo = replication_mse(baseline, &ColorParams::from_array(lo), target);
        grad[i] = (f_hi - f_lo) / (2.0 * steps[i]);
    }
    grad
}

/// Trains the calibrator to replicate each target from the baseline.
/// Inputs are standardized with the target data's statistics; the returned
/// model carries the best-validation-loss weights.
pub fn train_calibrator(
    baseline: &Image,
    targets: &[Image],
    cfg: &CalibratorTrainConfig,
) -> Result<(CalibratorModel, CalibratorTrainReport), CalibrationError> {
    if targets.len() < 2 {
        return Err(CalibrationError::InsufficientData(targets.len()));
    }
    let arch = CalibratorArch { dropout: cfg.dropout, ..CalibratorArch::default() };
    let side = arch.input_side;
    let baseline = baseline.resize(side, side);
    let targets: Vec<Image> = targets.iter().map(|t| t.resize(side, side)).collect();

    let mut model = CalibratorModel::new(arch, cfg.seed);
    model.norm_stats = NormStats::from_targets(&targets);
    let inputs: Vec<Array3<f64>> = targets.iter().map(|t| model.standardize(t)).collect();

    let n_val = ((targets.len() as f64 * cfg.val_fraction).round() as usize)
        .clamp(1, targets.len() - 1);
    let n_train = targets.len() - n_val;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut report = CalibratorTrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
    };
    let mut best = model.snapshot();
    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        // Fisher-Yates with the run RNG.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1) as usize) {
            for p in model.params_mut() {
                p.zero_grad();
            }
            for &idx in chunk {
                let (params, ctx) = model.forward(&inputs[idx], Some(&mut rng));
                let loss = replication_mse(&baseline, &params, &targets[idx]);
                epoch_loss += loss;
                let mut dparams = replication_grad(&baseline, &params, &targets[idx]);
                for d in dparams.iter_mut() {
                    *d /= chunk.len() as f64;
                }
                model.backward(&ctx, dparams);
            }
            step += 1;
            for p in model.params_mut() {
                p.adam_step(cfg.learning_rate, step);
            }
        }
        let train_loss = epoch_loss / n_train as f64;
        let mut val_loss = 0.0;
        for idx in n_train..targets.len() {
            let (params, _) = model.forward(&inputs[idx], None);
            val_loss += replication_mse(&baseline, &params, &targets[idx]);
        }
        val_loss /= n_val as f64;
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best = model.snapshot();
        }
    }
    model.restore(&best);
    Ok((model, report))
}

/// Documented sampling ranges for synthetic targets. Brightness, contrast
/// and saturation are drawn from practical sub-ranges of the legal
/// parameter space (the saturation range is unbounded above); hue spans the
/// full circle.
pub const SYNTHETIC_BRIGHTNESS_RANGE: (f64, f64) = (0.6, 1.6);
pub const SYNTHETIC_CONTRAST_RANGE: (f64, f64) = (0.7, 1.4);
pub const SYNTHETIC_HUE_RANGE: (f64, f64) = (-180.0, 180.0);
pub const SYNTHETIC_SATURATION_RANGE: (f64, f64) = (0.5, 1.5);

/// Generates `n` synthetic targets by applying randomly sampled color
/// parameters to the baseline; the ground-truth parameters are returned
/// alongside. Deterministic under `seed`.
pub fn make_synthetic_targets(baseline: &Image, n: usize, seed: u64) -> Vec<(Image, ColorParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let params = ColorParams {
                brightness_factor: rng.random_range(SYNTHETIC_BRIGHTNESS_RANGE.0..SYNTHETIC_BRIGHTNESS_RANGE.1),
                contrast_factor: rng.random_range(SYNTHETIC_CONTRAST_RANGE.0..SYNTHETIC_CONTRAST_RANGE.1),
                hue_shift: rng.random_range(SYNTHETIC_HUE_RANGE.0..SYNTHETIC_HUE_RANGE.1),
                saturation_factor: rng.random_range(SYNTHETIC_SATURATION_RANGE.0..SYNTHETIC_SATURATION_RANGE.1),
            };
            (apply_color_params(baseline, &params), params)
        })
        .collect()
}
