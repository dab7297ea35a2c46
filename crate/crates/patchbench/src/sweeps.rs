//! Declarative parameter sweeps: grids over one transformation dimension,
//! per-point evaluation of patched and clean variants, position heatmaps
//! and distance curves.
//!
//! Both variants of a grid point share the exact same scene-level
//! transform; the clean baseline differs only by the absence of the patch.
//! Per-point failures are recorded as failure markers instead of aborting
//! the grid, so the record count always equals `2 * values * repeats`.

use crate::detect::{DetectError, DetectorAdapter};
use crate::metrics::{
    mean_average_precision, target_confidence, Annotation, BBox, MetricsError,
    DEFAULT_CONF_THRESH, DEFAULT_IOU_THRESH,
};
use crate::transforms::{
    adjust_brightness, adjust_contrast, adjust_saturation, apply_patch, low_pass, quantize_colors,
    shift_hue, Image, Patch, TransformError, TransformParams,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Results-file schema version, embedded in every record line.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep values list is empty")]
    EmptyValues,
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("value {value:?} does not fit dimension {dimension:?}")]
    ValueKind { dimension: SweepDimension, value: SweepValue },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// The swept dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDimension {
    PositionGrid,
    RotationX,
    RotationY,
    RotationZ,
    Scale,
    Brightness,
    Hue,
    Lowpass,
    ColorCount,
}

/// One grid value: a scalar for most dimensions, an `(cx, cy)` pair for
/// position grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Scalar(f64),
    Position([f64; 2]),
}

impl SweepValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            SweepValue::Scalar(v) => Some(*v),
            SweepValue::Position(_) => None,
        }
    }
}

/// A declarative sweep: grid values over one dimension, everything else
/// pinned by `fixed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub spec_id: String,
    /// Scene and patch references, resolved by the configuration layer.
    #[serde(default)]
    pub scene_ref: String,
    #[serde(default)]
    pub patch_ref: String,
    pub dimension: SweepDimension,
    pub values: Vec<SweepValue>,
    #[serde(default)]
    pub fixed: TransformParams,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default)]
    pub seed: u64,
    /// Clip (fixed-exposure) semantics for the brightness transform.
    #[serde(default)]
    pub brightness_clip: bool,
}

fn default_repeats() -> u32 {
    1
}

impl SweepSpec {
    /// Applies one grid value onto a parameter set.
    pub fn point_params(&self, value: &SweepValue) -> Result<TransformParams, SweepError> {
        let mut p = self.fixed.clone();
        let scalar = value.as_scalar();
        match (self.dimension, value, scalar) {
            (SweepDimension::PositionGrid, SweepValue::Position([cx, cy]), _) => {
                p.position = (*cx, *cy);
            }
            (SweepDimension::RotationX, _, Some(v)) => p.rotation.0 = v,
            (SweepDimension::RotationY, _, Some(v)) => p.rotation.1 = v,
            (SweepDimension::RotationZ, _, Some(v)) => p.rotation.2 = v,
            (SweepDimension::Scale, _, Some(v)) => p.scale = v,
            (SweepDimension::Brightness, _, Some(v)) => p.brightness_factor = v,
            (SweepDimension::Hue, _, Some(v)) => p.hue_shift = v,
            (SweepDimension::Lowpass, _, Some(v)) if v >= 0.0 => p.lowpass_size = v.round() as u32,
            (SweepDimension::ColorCount, _, Some(v)) if v >= 0.0 => p.color_count = v.round() as u32,
            _ => return Err(SweepError::ValueKind { dimension: self.dimension, value: *value }),
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::EmptyValues);
        }
        if self.repeats == 0 {
            return Err(SweepError::InvalidSpec("repeats must be >= 1".into()));
        }
        self.fixed
            .validate()
            .map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
        for value in &self.values {
            let p = self.point_params(value)?;
            p.validate().map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }
}

/// One evaluated grid point (patched or clean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub schema_version: u32,
    pub spec_id: String,
    pub dimension: SweepDimension,
    pub value: SweepValue,
    pub repeat_index: u32,
    pub patched: bool,
    /// `None` for failed points.
    pub map: Option<f64>,
    #[serde(default)]
    pub per_class_ap: BTreeMap<u32, f64>,
    #[serde(default)]
    pub per_object_confidence: BTreeMap<String, f64>,
    /// Failure marker: the error message for this point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
    /// Per-point wall time; kept out of the serialized record so results
    /// files are byte-identical across runs (timings go to the manifest).
    #[serde(skip)]
    pub wall_time: f64,
}

/// Scene under evaluation: image, ground truth, and the name of each
/// annotated object.
pub struct SweepScene<'a> {
    pub image: &'a Image,
    pub annotations: &'a [Annotation],
    /// Object name -> annotation index.
    pub object_ids: &'a BTreeMap<String, usize>,
}

/// Scene-level transform pipeline shared by the patched and clean variants:
/// brightness -> contrast -> saturation -> hue -> low-pass -> quantization.
pub fn scene_transform(
    image: &Image,
    params: &TransformParams,
    brightness_clip: bool,
) -> Result<Image, TransformError> {
    let mut out = image.clone();
    if params.brightness_factor != 1.0 {
        out = adjust_brightness(&out, params.brightness_factor, brightness_clip)?;
    }
    if params.contrast_factor != 1.0 {
        out = adjust_contrast(&out, params.contrast_factor)?;
    }
    if params.saturation_factor != 1.0 {
        out = adjust_saturation(&out, params.saturation_factor)?;
    }
    if params.hue_shift != 0.0 {
        out = shift_hue(&out, params.hue_shift);
    }
    if params.lowpass_size > 1 {
        out = low_pass(&out, params.lowpass_size);
    }
    if params.color_count > 0 {
        out = quantize_colors(&out, params.color_count);
    }
    Ok(out)
}

fn evaluate_variant(
    scene: &SweepScene,
    adapter: &dyn DetectorAdapter,
    params: &TransformParams,
    brightness_clip: bool,
    patch: Option<&Patch>,
) -> Result<(f64, BTreeMap<u32, f64>, BTreeMap<String, f64>), SweepError> {
    let staged = match patch {
        Some(p) => apply_patch(scene.image, p, params)?,
        None => scene.image.clone(),
    };
    let transformed = scene_transform(&staged, params, brightness_clip)?;
    let dets = adapter.detect(&transformed, DEFAULT_CONF_THRESH)?;
    let eval = mean_average_precision(
        &[(dets.clone(), scene.annotations.to_vec())],
        DEFAULT_IOU_THRESH,
    )?;
    let mut per_object = BTreeMap::new();
    for (name, &idx) in scene.object_ids {
        if let Some(ann) = scene.annotations.get(idx) {
            per_object.insert(
                name.clone(),
                target_confidence(&dets, ann.class_id, &ann.bbox, DEFAULT_IOU_THRESH),
            );
        }
    }
    Ok((eval.map, eval.per_class_ap, per_object))
}

/// Runs the sweep: for every value and repeat, evaluates the patched and
/// the clean variant under the same scene-level transform. Records arrive
/// in `(value, repeat, patched-then-clean)` order; per-point failures are
/// recorded, never dropped.
pub fn run_sweep(
    spec: &SweepSpec,
    adapter: &dyn DetectorAdapter,
    scene: &SweepScene,
    patch: &Patch,
) -> Result<Vec<SweepRecord>, SweepError> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.values.len() * spec.repeats as usize * 2);
    for value in &spec.values {
        for repeat in 0..spec.repeats {
            for patched in [true, false] {
                let started = std::time::Instant::now();
                let mut record = SweepRecord {
                    schema_version: RESULTS_SCHEMA_VERSION,
                    spec_id: spec.spec_id.clone(),
                    dimension: spec.dimension,
                    value: *value,
                    repeat_index: repeat,
                    patched,
                    map: None,
                    per_class_ap: BTreeMap::new(),
                    per_object_confidence: BTreeMap::new(),
                    failed: None,
                    wall_time: 0.0,
                };
                match spec
                    .point_params(value)
                    .and_then(|params| {
                        evaluate_variant(scene, adapter, &params, spec.brightness_clip, patched.then_some(patch))
                    }) {
                    Ok((map, per_class, per_object)) => {
                        record.map = Some(map);
                        record.per_class_ap = per_class;
                        record.per_object_confidence = per_object;
                    }
                    Err(e) => record.failed = Some(e.to_string()),
                }
                record.wall_time = started.elapsed().as_secs_f64();
                records.push(record);
            }
        }
    }
    Ok(records)
}

/// A grid of target confidences over patch positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Heatmap {
    /// `grid[row][col]`, rows over y, cols over x.
    pub grid: Vec<Vec<f64>>,
    pub grid_step: usize,
    pub frame: (usize, usize),
    /// Patch scale used at every position.
    pub scale: f64,
    /// Confidence of the target with no patch at all.
    pub baseline_confidence: f64,
}

impl Heatmap {
    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }

    /// Center of a grid cell in pixel coordinates.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col * self.grid_step) as f64 + self.grid_step as f64 / 2.0,
            (row * self.grid_step) as f64 + self.grid_step as f64 / 2.0,
        )
    }
}

/// Digitally inserts the patch at every grid position and records the
/// detection confidence of the target object. Grid dimensions are
/// `ceil(H/step) x ceil(W/step)`.
pub fn position_heatmap(
    scene: &SweepScene,
    target_index: usize,
    patch: &Patch,
    adapter: &dyn DetectorAdapter,
    grid_step: usize,
    params: &TransformParams,
) -> Result<Heatmap, SweepError> {
    if grid_step == 0 {
        return Err(SweepError::InvalidSpec("grid_step must be >= 1".into()));
    }
    let target = scene
        .annotations
        .get(target_index)
        .ok_or_else(|| SweepError::InvalidSpec(format!("target index {target_index} out of range")))?;
    let (h, w) = (scene.image.height(), scene.image.width());
    let rows = h.div_ceil(grid_step);
    let cols = w.div_ceil(grid_step);
    let baseline_dets = adapter.detect(scene.image, DEFAULT_CONF_THRESH)?;
    let baseline_confidence =
        target_confidence(&baseline_dets, target.class_id, &target.bbox, DEFAULT_IOU_THRESH);
    let mut grid = vec![vec![0.0; cols]; rows];
    for row in 0..rows {
        for col in 0..cols {
            let cx = ((col * grid_step) as f64 + grid_step as f64 / 2.0) / w as f64;
            let cy = ((row * grid_step) as f64 + grid_step as f64 / 2.0) / h as f64;
            let point = TransformParams { position: (cx.min(1.0), cy.min(1.0)), ..params.clone() };
            let rendered = apply_patch(scene.image, patch, &point)?;
            let dets = adapter.detect(&rendered, DEFAULT_CONF_THRESH)?;
            grid[row][col] =
                target_confidence(&dets, target.class_id, &target.bbox, DEFAULT_IOU_THRESH);
        }
    }
    Ok(Heatmap { grid, grid_step, frame: (h, w), scale: params.scale, baseline_confidence })
}

/// Signed distance between two axis-aligned rectangles: negative when they
/// overlap, Euclidean gap otherwise.
fn rect_distance(a: (f64, f64, f64, f64), b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = a;
    let dx = (b.x1 - ax2).max(ax1 - b.x2);
    let dy = (b.y1 - ay2).max(ay1 - b.y2);
    if dx <= 0.0 && dy <= 0.0 {
        dx.max(dy)
    } else {
        (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt()
    }
}

/// Converts a heatmap into (edge distance, confidence) pairs sorted by
/// ascending distance from the patch footprint edge to the target box edge
/// (negative when overlapping).
pub fn distance_curve(heatmap: &Heatmap, target_box: &BBox) -> Vec<(f64, f64)> {
    let (_, w) = heatmap.frame;
    let half = heatmap.scale * w as f64 / 2.0;
    let mut out = Vec::with_capacity(heatmap.rows() * heatmap.cols());
    for row in 0..heatmap.rows() {
        for col in 0..heatmap.cols() {
            let (cx, cy) = heatmap.cell_center(row, col);
            let footprint = (cx - half, cy - half, cx + half, cy + half);
            out.push((rect_distance(footprint, target_box), heatmap.grid[row][col]));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{TinyDet, TinyDetArch};
    use crate::patchgen::make_control_patch;

    fn scene_parts() -> (Image, Vec<Annotation>, BTreeMap<String, usize>) {
        let layout = crate::scene::canonical_layout();
        let (img, anns) = crate::scene::render_scene(&layout, 64, 64, 3);
        let names: BTreeMap<String, usize> = anns
            .iter()
            .enumerate()
            .map(|(i, a)| (crate::scene::CLASS_NAMES[a.class_id as usize].to_string(), i))
            .collect();
        (img, anns, names)
    }

    fn adapter() -> TinyDet {
        let arch = TinyDetArch { input: (64, 64), ..TinyDetArch::default() };
        TinyDet::new("tinydet-test", crate::scene::class_names(), arch, 5).unwrap()
    }

    fn spec(dimension: SweepDimension, values: Vec<SweepValue>) -> SweepSpec {
        SweepSpec {
            spec_id: "unit".into(),
            scene_ref: String::new(),
            patch_ref: String::new(),
            dimension,
            values,
            fixed: TransformParams::identity(),
            repeats: 1,
            seed: 0,
            brightness_clip: false,
        }
    }

    #[test]
    fn empty_values_rejected() {
        let s = spec(SweepDimension::Scale, vec![]);
        assert!(matches!(s.validate(), Err(SweepError::EmptyValues)));
    }

    #[test]
    fn record_count_is_twice_grid_size() {
        let (img, anns, names) = scene_parts();
        let scene = SweepScene { image: &img, annotations: &anns, object_ids: &names };
        let adapter = adapter();
        let patch = make_control_patch(16, 2).unwrap();
        let mut s = spec(
            SweepDimension::Scale,
            vec![SweepValue::Scalar(0.15), SweepValue::Scalar(0.2), SweepValue::Scalar(0.25)],
        );
        s.repeats = 2;
        let records = run_sweep(&s, &adapter, &scene, &patch).unwrap();
        assert_eq!(records.len(), 3 * 2 * 2);
        // Failure markers never silently drop points.
        assert!(records.iter().all(|r| r.failed.is_some() || r.map.is_some()));
        // Deterministic order: value-major, then repeat, patched first.
        assert!(records[0].patched && !records[1].patched);
        assert_eq!(records[0].repeat_index, 0);
        assert_eq!(records[2].repeat_index, 1);
    }

    #[test]
    fn identity_point_matches_direct_evaluation() {
        let (img, anns, names) = scene_parts();
        let scene = SweepScene { image: &img, annotations: &anns, object_ids: &names };
        let adapter = adapter();
        let patch = make_control_patch(16, 2).unwrap();
        let s = spec(SweepDimension::RotationZ, vec![SweepValue::Scalar(0.0)]);
        let records = run_sweep(&s, &adapter, &scene, &patch).unwrap();
        let direct = evaluate_variant(&scene, &adapter, &TransformParams::identity(), false, Some(&patch)).unwrap();
        assert_eq!(records[0].map, Some(direct.0));
        let clean = evaluate_variant(&scene, &adapter, &TransformParams::identity(), false, None).unwrap();
        assert_eq!(records[1].map, Some(clean.0));
    }

    #[test]
    fn sweep_is_deterministic() {
        let (img, anns, names) = scene_parts();
        let scene = SweepScene { image: &img, annotations: &anns, object_ids: &names };
        let adapter = adapter();
        let patch = make_control_patch(16, 9).unwrap();
        let s = spec(
            SweepDimension::Hue,
            vec![SweepValue::Scalar(-90.0), SweepValue::Scalar(0.0), SweepValue::Scalar(90.0)],
        );
        let a = run_sweep(&s, &adapter, &scene, &patch).unwrap();
        let b = run_sweep(&s, &adapter, &scene, &patch).unwrap();
        let strip = |records: &[SweepRecord]| -> Vec<String> {
            records.iter().map(|r| serde_json::to_string(r).unwrap()).collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn heatmap_dimensions_follow_grid_step() {
        let (img, anns, names) = scene_parts();
        let scene = SweepScene { image: &img, annotations: &anns, object_ids: &names };
        let adapter = adapter();
        let patch = make_control_patch(16, 2).unwrap();
        let params = TransformParams { scale: 0.2, ..TransformParams::identity() };
        // Single-column grid when the step equals the width.
        let hm = position_heatmap(&scene, 0, &patch, &adapter, 64, &params).unwrap();
        assert_eq!(hm.rows(), 1);
        assert_eq!(hm.cols(), 1);
        let hm = position_heatmap(&scene, 0, &patch, &adapter, 16, &params).unwrap();
        assert_eq!(hm.rows(), 4);
        assert_eq!(hm.cols(), 4);
    }

    #[test]
    fn distance_curve_signs_and_order() {
        let hm = Heatmap {
            grid: vec![vec![0.5, 0.7], vec![0.2, 0.9]],
            grid_step: 32,
            frame: (64, 64),
            scale: 0.25,
            baseline_confidence: 0.8,
        };
        let target = BBox::new(10.0, 10.0, 30.0, 30.0).unwrap();
        let curve = distance_curve(&hm, &target);
        assert_eq!(curve.len(), 4);
        // Patch centered on the box overlaps: negative distance first.
        assert!(curve[0].0 < 0.0);
        for pair in curve.windows(2) {
            assert!(pair[0].0 <= pair[1].0);
        }
        let empty = Heatmap { grid: vec![], grid_step: 1, frame: (0, 0), scale: 0.1, baseline_confidence: 0.0 };
        assert!(distance_curve(&empty, &target).is_empty());
    }
}
