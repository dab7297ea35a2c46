//! Patch synthesis by projected signed-gradient steps on the attack
//! objective, with expectation-over-transformation sampling.
//!
//! Each iteration samples scenes from the dataset and transformation
//! parameters from the configured ranges, renders the patched scene,
//! queries the adapter's attack loss, and pushes the gradient back through
//! the scene brightness augmentation, the alpha blend and the bilinear
//! warp onto patch texels. Steps are `step_size * sign(grad)` — ascent for
//! the global objective, descent for the local one — followed by a
//! projection onto `[0, 1]`. Runs are bit-identical under a fixed seed.

use crate::detect::{AttackKind, DetectError, DetectorAdapter};
use crate::metrics::{target_confidence, Annotation, DEFAULT_CONF_THRESH, DEFAULT_IOU_THRESH};
use crate::transforms::{
    accumulate_patch_grad, adjust_brightness, composite_patch, warp_patch_traced, Image, Patch,
    PatchKind, TrainingMeta, TransformError, TransformParams,
};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Appendix-style validity margin: the control-noise patch must leave the
/// target at least this much more confident than the adversarial patch.
pub const VALIDITY_MARGIN: f64 = 0.3;

#[derive(Debug, Error)]
pub enum PatchGenError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no annotation of target class {0}")]
    NoTargetAnnotation(u32),
    #[error("patch kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: &'static str, got: &'static str },
    #[error("patch has no recorded target class in its training metadata")]
    MissingTargetClass,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Sampling intervals over the transformation space used during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformRanges {
    pub rotation_x: (f64, f64),
    pub rotation_y: (f64, f64),
    pub rotation_z: (f64, f64),
    pub scale: (f64, f64),
    pub position_x: (f64, f64),
    pub position_y: (f64, f64),
    pub brightness: (f64, f64),
}

impl Default for TransformRanges {
    fn default() -> Self {
        Self {
            rotation_x: (0.0, 0.0),
            rotation_y: (0.0, 0.0),
            rotation_z: (-20.0, 20.0),
            scale: (0.15, 0.3),
            position_x: (0.35, 0.65),
            position_y: (0.35, 0.65),
            brightness: (0.8, 1.2),
        }
    }
}

impl TransformRanges {
    pub fn validate(&self) -> Result<(), PatchGenError> {
        let check = |name: &str, (lo, hi): (f64, f64), min: f64, max: f64| {
            if lo > hi || lo < min || hi > max {
                Err(PatchGenError::InvalidConfig(format!(
                    "{name} range ({lo}, {hi}) outside [{min}, {max}]"
                )))
            } else {
                Ok(())
            }
        };
        check("rotation_x", self.rotation_x, -89.0, 89.0)?;
        check("rotation_y", self.rotation_y, -89.0, 89.0)?;
        check("rotation_z", self.rotation_z, -90.0, 90.0)?;
        check("scale", self.scale, 1e-3, 0.5)?;
        check("position_x", self.position_x, 0.0, 1.0)?;
        check("position_y", self.position_y, 0.0, 1.0)?;
        if self.brightness.0 <= 0.0 || self.brightness.0 > self.brightness.1 {
            return Err(PatchGenError::InvalidConfig(format!(
                "brightness range {:?} must be positive",
                self.brightness
            )));
        }
        Ok(())
    }

    fn sample_interval(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    }

    /// Contains check used by tests and the sampling audit.
    pub fn contains(&self, t: &TransformParams, brightness: f64) -> bool {
        let within = |(lo, hi): (f64, f64), v: f64| v >= lo - 1e-9 && v <= hi + 1e-9;
        within(self.rotation_x, t.rotation.0)
            && within(self.rotation_y, t.rotation.1)
            && within(self.rotation_z, t.rotation.2)
            && within(self.scale, t.scale)
            && within(self.brightness, brightness)
    }
}

/// Patch training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchTrainConfig {
    pub iterations: u64,
    pub step_size: f64,
    pub batch_size: u32,
    pub patch_side: usize,
    pub transform_ranges: TransformRanges,
    pub seed: u64,
    pub attack: AttackKind,
}

impl Default for PatchTrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            step_size: 0.01,
            batch_size: 2,
            patch_side: 64,
            transform_ranges: TransformRanges::default(),
            seed: 0,
            attack: AttackKind::GlobalSuppress,
        }
    }
}

/// A labeled image collection for training.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<(Image, Vec<Annotation>)>,
    pub source_id: String,
}

impl Dataset {
    pub fn single(image: Image, annotations: Vec<Annotation>, source_id: impl Into<String>) -> Self {
        Self { samples: vec![(image, annotations)], source_id: source_id.into() }
    }
}

/// Per-run record of the optimization: the objective trace and a capped log
/// of the sampled transformation points.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PatchTrainReport {
    /// Mean attack objective per iteration (the raw adapter loss: higher is
    /// better for the global attack, lower for the local one).
    pub objective_trace: Vec<f64>,
    /// First sampled (params, brightness) pairs, for range auditing.
    pub sampled: Vec<(TransformParams, f64)>,
}

const SAMPLE_LOG_CAP: usize = 512;

/// Samples one transformation point; local attacks place the patch to
/// overlap the target's box center within a quarter of the box size.
fn sample_transform(
    rng: &mut ChaCha8Rng,
    cfg: &PatchTrainConfig,
    frame: (usize, usize),
    annotations: &[Annotation],
) -> Result<(TransformParams, f64), PatchGenError> {
    let r = &cfg.transform_ranges;
    let mut params = TransformParams {
        rotation: (
            TransformRanges::sample_interval(rng, r.rotation_x),
            TransformRanges::sample_interval(rng, r.rotation_y),
            TransformRanges::sample_interval(rng, r.rotation_z),
        ),
        scale: TransformRanges::sample_interval(rng, r.scale),
        position: (
            TransformRanges::sample_interval(rng, r.position_x),
            TransformRanges::sample_interval(rng, r.position_y),
        ),
        ..TransformParams::identity()
    };
    if let AttackKind::LocalHide { target_class } = cfg.attack {
        let target = annotations
            .iter()
            .find(|a| a.class_id == target_class)
            .ok_or(PatchGenError::NoTargetAnnotation(target_class))?;
        let (cx, cy) = target.bbox.center();
        let jx: f64 = rng.random_range(-0.25..0.25) * target.bbox.width();
        let jy: f64 = rng.random_range(-0.25..0.25) * target.bbox.height();
        params.position = (
            ((cx + jx) / frame.1 as f64).clamp(0.05, 0.95),
            ((cy + jy) / frame.0 as f64).clamp(0.05, 0.95),
        );
    }
    let brightness = TransformRanges::sample_interval(rng, r.brightness);
    Ok((params, brightness))
}

/// Optimizes a patch against the adapter on the dataset. The returned patch
/// is snapped to the 8-bit grid (the shippable artifact) and carries its
/// training provenance.
pub fn optimize_patch(
    adapter: &dyn DetectorAdapter,
    data: &Dataset,
    cfg: &PatchTrainConfig,
) -> Result<(Patch, PatchTrainReport), PatchGenError> {
    optimize_patch_with(adapter, data, cfg, |_, _, _| {})
}

/// [`optimize_patch`] with a checkpoint callback invoked as
/// `(iteration, patch_so_far, objective_trace)` — the CLI uses it to write
/// periodic checkpoints.
pub fn optimize_patch_with(
    adapter: &dyn DetectorAdapter,
    data: &Dataset,
    cfg: &PatchTrainConfig,
    mut on_iteration: impl FnMut(u64, &Patch, &[f64]),
) -> Result<(Patch, PatchTrainReport), PatchGenError> {
    if data.samples.is_empty() {
        return Err(PatchGenError::EmptyDataset);
    }
    if !adapter.capabilities().gradients {
        return Err(DetectError::GradientsUnavailable(adapter.detector_id().to_string()).into());
    }
    cfg.transform_ranges.validate()?;
    if cfg.step_size <= 0.0 {
        return Err(PatchGenError::InvalidConfig(format!("step_size {} not positive", cfg.step_size)));
    }
    if let AttackKind::LocalHide { target_class } = cfg.attack {
        if !data
            .samples
            .iter()
            .any(|(_, anns)| anns.iter().any(|a| a.class_id == target_class))
        {
            return Err(PatchGenError::NoTargetAnnotation(target_class));
        }
    }

    let kind = match cfg.attack {
        AttackKind::GlobalSuppress => PatchKind::Global,
        AttackKind::LocalHide { .. } => PatchKind::Local,
    };
    let mut patch = Patch::uniform_gray(cfg.patch_side, kind, adapter.detector_id())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = PatchTrainReport::default();

    // Ascent for the global objective (maximize loss), descent for the
    // local one (minimize target confidence).
    let direction = match cfg.attack {
        AttackKind::GlobalSuppress => 1.0,
        AttackKind::LocalHide { .. } => -1.0,
    };

    for iter in 0..cfg.iterations {
        let mut grad = Array3::<f64>::zeros((cfg.patch_side, cfg.patch_side, 3));
        let mut objective = 0.0;
        let mut used = 0u32;
        for _ in 0..cfg.batch_size.max(1) {
            let (image, annotations) = &data.samples[rng.random_range(0..data.samples.len())];
            let frame = (image.height(), image.width());
            let (params, brightness) = sample_transform(&mut rng, cfg, frame, annotations)?;
            if report.sampled.len() < SAMPLE_LOG_CAP {
                report.sampled.push((params.clone(), brightness));
            }
            let (warped, taps) = warp_patch_traced(&patch, &params, frame, true)?;
            let composited = composite_patch(image, &warped)?;
            // Scene-level brightness augmentation in clip mode: the
            // subgradient is exact (factor where unclamped, zero where
            // clamped).
            let rendered = adjust_brightness(&composited, brightness, true)?;
            let loss = adapter.attack_loss(&rendered, annotations, &cfg.attack)?;
            objective += loss.value;
            used += 1;

            // Chain rule back to patch texels.
            let mut d_comp = loss.image_grad;
            for ((y, x, c), g) in d_comp.indexed_iter_mut() {
                let pre = composited.pixels()[[y, x, c]] * brightness;
                *g = if pre > 0.0 && pre < 1.0 { *g * brightness } else { 0.0 };
                // Only the alpha-blended patch share flows to the patch.
                let a = warped.rgba[[y, x, 3]];
                *g *= a;
            }
            accumulate_patch_grad(&taps, &d_comp, cfg.patch_side, &mut grad);
        }
        objective /= used.max(1) as f64;
        report.objective_trace.push(objective);

        {
            let px = patch.pixels_mut();
            ndarray::Zip::from(px).and(&grad).for_each(|p, &g| {
                *p = (*p + direction * cfg.step_size * g.signum()).clamp(0.0, 1.0);
            });
        }
        on_iteration(iter + 1, &patch, &report.objective_trace);
    }

    patch.snap_to_8bit();
    patch.training_meta = TrainingMeta {
        iterations: cfg.iterations,
        seed: cfg.seed,
        step_size: cfg.step_size,
        batch_size: cfg.batch_size,
        target_class: cfg.attack.target_class(),
        augmentation_ranges: [
            ("rotation_x", cfg.transform_ranges.rotation_x),
            ("rotation_y", cfg.transform_ranges.rotation_y),
            ("rotation_z", cfg.transform_ranges.rotation_z),
            ("scale", cfg.transform_ranges.scale),
            ("position_x", cfg.transform_ranges.position_x),
            ("position_y", cfg.transform_ranges.position_y),
            ("brightness", cfg.transform_ranges.brightness),
        ]
        .into_iter()
        .map(|(k, (lo, hi))| (k.to_string(), [lo, hi]))
        .collect(),
        initial_objective: report.objective_trace.first().copied(),
        final_objective: report.objective_trace.last().copied(),
    };
    Ok((patch, report))
}

/// A uniform-noise control patch with no adversarial properties.
pub fn make_control_patch(side: usize, seed: u64) -> Result<Patch, TransformError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = Array3::from_shape_simple_fn((side, side, 3), || rng.random::<f64>());
    let mut patch = Patch::new(pixels, PatchKind::Control, "control", TrainingMeta {
        seed,
        ..TrainingMeta::default()
    })?;
    patch.snap_to_8bit();
    Ok(patch)
}

/// Outcome of the occlusion-vs-attack validity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalValidity {
    pub valid: bool,
    pub control_confidence: f64,
    pub adversarial_confidence: f64,
    /// `control_confidence - adversarial_confidence`.
    pub margin: f64,
}

/// Renders both the adversarial and the seed-matched control patch at the
/// same placement and compares target confidences: the data point is valid
/// only when the control leaves the target at least [`VALIDITY_MARGIN`]
/// more confident, separating attack effects from mere occlusion.
pub fn validate_local_attack(
    adapter: &dyn DetectorAdapter,
    scene: (&Image, &[Annotation]),
    patch: &Patch,
    control: &Patch,
    params: &TransformParams,
) -> Result<LocalValidity, PatchGenError> {
    if patch.kind != PatchKind::Local {
        return Err(PatchGenError::KindMismatch { expected: "local", got: kind_name(patch.kind) });
    }
    if control.kind != PatchKind::Control {
        return Err(PatchGenError::KindMismatch { expected: "control", got: kind_name(control.kind) });
    }
    let target_class = patch.training_meta.target_class.ok_or(PatchGenError::MissingTargetClass)?;
    let (image, annotations) = scene;
    let target = annotations
        .iter()
        .find(|a| a.class_id == target_class)
        .ok_or(PatchGenError::NoTargetAnnotation(target_class))?;

    let confidence_with = |p: &Patch| -> Result<f64, PatchGenError> {
        let (warped, _) = warp_patch_traced(p, params, (image.height(), image.width()), false)?;
        let rendered = composite_patch(image, &warped)?;
        let dets = adapter.detect(&rendered, DEFAULT_CONF_THRESH)?;
        Ok(target_confidence(&dets, target_class, &target.bbox, DEFAULT_IOU_THRESH))
    };
    let adversarial_confidence = confidence_with(patch)?;
    let control_confidence = confidence_with(control)?;
    let margin = control_confidence - adversarial_confidence;
    Ok(LocalValidity { valid: margin >= VALIDITY_MARGIN, control_confidence, adversarial_confidence, margin })
}

fn kind_name(kind: PatchKind) -> &'static str {
    match kind {
        PatchKind::Global => "global",
        PatchKind::Local => "local",
        PatchKind::Control => "control",
    }
}
