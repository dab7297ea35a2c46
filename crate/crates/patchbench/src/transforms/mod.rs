//! Pure image-transformation kernels.
//!
//! All operations are deterministic, side-effect free and keep channel
//! values inside `[0, 1]`. The patch application pipeline is
//! `warp_patch` (plane rotation + pinhole projection + bilinear resampling)
//! followed by `composite_patch` (alpha blend). Scene-level photometric and
//! information-reduction transforms operate on whole images and are applied
//! separately from patch placement.

mod blur;
mod color;
mod quantize;
mod warp;

pub use blur::low_pass;
pub use color::{adjust_brightness, adjust_contrast, adjust_saturation, apply_color_params};
pub use color::{hsv_to_rgb, luminance, rgb_to_hsv, shift_hue};
pub use quantize::quantize_colors;
pub use warp::{warp_patch, warp_patch_traced, Homography, SampleTap};

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from transform kernels.
#[derive(Debug, Error)]
pub enum TransformError {
    #[error("image dimensions must be at least 1x1, got {height}x{width}")]
    EmptyImage { height: usize, width: usize },
    #[error("channel value {value} at ({y}, {x}, {c}) outside [0, 1]")]
    ValueOutOfRange { y: usize, x: usize, c: usize, value: f64 },
    #[error("patch side must be at least {min}, got {side}")]
    PatchTooSmall { side: usize, min: usize },
    #[error("patch pixel grid must be square with 3 channels, got {0}x{1}x{2}")]
    PatchNotSquare(usize, usize, usize),
    #[error("invalid transform parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("degenerate warp: rotation ({rx}, {ry}) degrees views the patch plane edge-on")]
    DegenerateWarp { rx: f64, ry: f64 },
    #[error("patch footprint lies entirely outside a {height}x{width} frame")]
    OutOfFrame { height: usize, width: usize },
    #[error("dimension mismatch: image is {0}x{1}, layer is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("brightness factor must be positive, got {0}")]
    NonPositiveFactor(f64),
}

/// Minimum patch side in pixels.
pub const MIN_PATCH_SIDE: usize = 8;

/// An RGB image with channel values in `[0, 1]`, stored row-major as
/// `(height, width, 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array3<f64>,
}

impl Image {
    /// Wraps a pixel grid, validating dimensions and the `[0, 1]` range.
    pub fn new(pixels: Array3<f64>) -> Result<Self, TransformError> {
        let (h, w, c) = pixels.dim();
        if h == 0 || w == 0 || c != 3 {
            return Err(TransformError::EmptyImage { height: h, width: w });
        }
        for ((y, x, c), &v) in pixels.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(TransformError::ValueOutOfRange { y, x, c, value: v });
            }
        }
        Ok(Self { pixels })
    }

    /// Builds an image from a per-pixel closure returning RGB triples.
    /// Values are clamped into `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Array3::zeros((height, width, 3));
        for y in 0..height {
            for x in 0..width {
                let rgb = f(y, x);
                for c in 0..3 {
                    pixels[[y, x, c]] = rgb[c].clamp(0.0, 1.0);
                }
            }
        }
        Self { pixels }
    }

    /// A uniform image of the given color.
    pub fn constant(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn pixels(&self) -> &Array3<f64> {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> [f64; 3] {
        [self.pixels[[y, x, 0]], self.pixels[[y, x, 1]], self.pixels[[y, x, 2]]]
    }

    /// Bilinear resize to `(height, width)`.
    pub fn resize(&self, height: usize, width: usize) -> Image {
        if height == self.height() && width == self.width() {
            return self.clone();
        }
        let sy = self.height() as f64 / height as f64;
        let sx = self.width() as f64 / width as f64;
        Image::from_fn(height, width, |y, x| {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            self.sample_bilinear(src_y, src_x)
        })
    }

    /// Bilinear sample at continuous pixel coordinates, clamped to the frame.
    pub fn sample_bilinear(&self, y: f64, x: f64) -> [f64; 3] {
        let (h, w) = (self.height(), self.width());
        let y = y.clamp(0.0, (h - 1) as f64);
        let x = x.clamp(0.0, (w - 1) as f64);
        let y0 = y.floor() as usize;
        let x0 = x.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let fy = y - y0 as f64;
        let fx = x - x0 as f64;
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = self.pixels[[y0, x0, c]] * (1.0 - fx) + self.pixels[[y0, x1, c]] * fx;
            let bot = self.pixels[[y1, x0, c]] * (1.0 - fx) + self.pixels[[y1, x1, c]] * fx;
            out[c] = top * (1.0 - fy) + bot * fy;
        }
        out
    }
}

/// Which attack a patch was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    /// Suppresses detections anywhere in the scene.
    Global,
    /// Hides one target object; must overlap it.
    Local,
    /// Random noise with no adversarial property; separates occlusion
    /// effects from attack effects.
    Control,
}

/// Provenance metadata carried with a patch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    #[serde(default)]
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub step_size: f64,
    #[serde(default)]
    pub batch_size: u32,
    /// Target class id for local patches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_class: Option<u32>,
    /// Sampling ranges used during training, as `field -> [lo, hi]`.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub augmentation_ranges: std::collections::BTreeMap<String, [f64; 2]>,
    /// Attack objective at iteration 0 and at the final iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
}

/// A square adversarial (or control) patch with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pixels: Array3<f64>,
    pub kind: PatchKind,
    pub detector_id: String,
    pub training_meta: TrainingMeta,
}

impl Patch {
    pub fn new(
        pixels: Array3<f64>,
        kind: PatchKind,
        detector_id: impl Into<String>,
        training_meta: TrainingMeta,
    ) -> Result<Self, TransformError> {
        let (h, w, c) = pixels.dim();
        if h != w || c != 3 {
            return Err(TransformError::PatchNotSquare(h, w, c));
        }
        if h < MIN_PATCH_SIDE {
            return Err(TransformError::PatchTooSmall { side: h, min: MIN_PATCH_SIDE });
        }
        for ((y, x, c), &v) in pixels.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(TransformError::ValueOutOfRange { y, x, c, value: v });
            }
        }
        Ok(Self { pixels, kind, detector_id: detector_id.into(), training_meta })
    }

    /// Uniform mid-gray initialization patch.
    pub fn uniform_gray(side: usize, kind: PatchKind, detector_id: impl Into<String>) -> Result<Self, TransformError> {
        Self::new(Array3::from_elem((side, side, 3), 0.5), kind, detector_id, TrainingMeta::default())
    }

    pub fn side(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn pixels(&self) -> &Array3<f64> {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut Array3<f64> {
        &mut self.pixels
    }

    /// Snaps every channel to the 8-bit grid `round(v*255)/255`, so that
    /// PNG round-trips reproduce the in-memory patch exactly.
    pub fn snap_to_8bit(&mut self) {
        self.pixels.mapv_inplace(|v| (v * 255.0).round() / 255.0);
    }
}

/// One point `t` in the transformation space: placement, geometry,
/// photometric and information-reduction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformParams {
    /// Normalized patch center `(cx, cy)`, both in `[0, 1]`.
    pub position: (f64, f64),
    /// Patch width as a fraction of image width, in `(0, 0.5]`.
    pub scale: f64,
    /// Rotation `(rx, ry, rz)` in degrees around the camera axes, each in
    /// `[-90, 90]`. `rz` is in-plane; `|rx|` or `|ry|` at 90 is degenerate.
    pub rotation: (f64, f64, f64),
    /// Scene brightness multiplier, > 0.
    pub brightness_factor: f64,
    /// Scene contrast multiplier around mid-gray, > 0.
    pub contrast_factor: f64,
    /// Scene hue rotation in degrees, in `[-180, 180]`.
    pub hue_shift: f64,
    /// Scene saturation multiplier, >= 0.
    pub saturation_factor: f64,
    /// Box-blur kernel size; 0 or 1 disables.
    pub lowpass_size: u32,
    /// Color-quantization palette size; 0 disables.
    pub color_count: u32,
    /// Virtual pinhole focal length in pixels; `None` uses the frame width
    /// (about a 53 degree horizontal field of view).
    pub focal: Option<f64>,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl TransformParams {
    /// Identity parameters: centered quarter-width patch, no rotation, unit
    /// photometric factors, reductions disabled.
    pub fn identity() -> Self {
        Self {
            position: (0.5, 0.5),
            scale: 0.25,
            rotation: (0.0, 0.0, 0.0),
            brightness_factor: 1.0,
            contrast_factor: 1.0,
            hue_shift: 0.0,
            saturation_factor: 1.0,
            lowpass_size: 0,
            color_count: 0,
            focal: None,
        }
    }

    /// True when every photometric field is at its identity value.
    pub fn photometric_identity(&self) -> bool {
        self.brightness_factor == 1.0
            && self.contrast_factor == 1.0
            && self.hue_shift == 0.0
            && self.saturation_factor == 1.0
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let err = |field: &'static str, reason: String| Err(TransformError::InvalidParams { field, reason });
        let (cx, cy) = self.position;
        if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&cy) {
            return err("position", format!("({cx}, {cy}) outside [0,1]^2"));
        }
        if !(self.scale > 0.0 && self.scale <= 0.5) {
            return err("scale", format!("{} outside (0, 0.5]", self.scale));
        }
        let (rx, ry, rz) = self.rotation;
        for (name, v) in [("rx", rx), ("ry", ry), ("rz", rz)] {
            if !(-90.0..=90.0).contains(&v) {
                return err("rotation", format!("{name} = {v} outside [-90, 90]"));
            }
        }
        if !(self.brightness_factor > 0.0) {
            return err("brightness_factor", format!("{} not positive", self.brightness_factor));
        }
        if !(self.contrast_factor > 0.0) {
            return err("contrast_factor", format!("{} not positive", self.contrast_factor));
        }
        if !(-180.0..=180.0).contains(&self.hue_shift) {
            return err("hue_shift", format!("{} outside [-180, 180]", self.hue_shift));
        }
        if !(self.saturation_factor >= 0.0) {
            return err("saturation_factor", format!("{} negative", self.saturation_factor));
        }
        if let Some(f) = self.focal {
            if !(f > 0.0) {
                return err("focal", format!("{f} not positive"));
            }
        }
        Ok(())
    }
}

/// A patch warped into a target frame: an RGBA layer plus the projected
/// quadrilateral footprint (corner order: patch corners (0,0), (P,0),
/// (P,P), (0,P) in x,y pixel coordinates).
#[derive(Debug, Clone)]
pub struct WarpedPatch {
    /// `(height, width, 4)`; alpha is 0 outside the footprint.
    pub rgba: Array3<f64>,
    pub footprint: [(f64, f64); 4],
}

impl WarpedPatch {
    pub fn height(&self) -> usize {
        self.rgba.dim().0
    }

    pub fn width(&self) -> usize {
        self.rgba.dim().1
    }

    /// Axis-aligned bounding box of the footprint, as (x0, y0, x1, y1).
    pub fn footprint_bbox(&self) -> (f64, f64, f64, f64) {
        let xs = self.footprint.iter().map(|p| p.0);
        let ys = self.footprint.iter().map(|p| p.1);
        (
            xs.clone().fold(f64::INFINITY, f64::min),
            ys.clone().fold(f64::INFINITY, f64::min),
            xs.fold(f64::NEG_INFINITY, f64::max),
            ys.fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// Footprint area via the shoelace formula.
    pub fn footprint_area(&self) -> f64 {
        let p = &self.footprint;
        let mut acc = 0.0;
        for i in 0..4 {
            let (x0, y0) = p[i];
            let (x1, y1) = p[(i + 1) % 4];
            acc += x0 * y1 - x1 * y0;
        }
        acc.abs() / 2.0
    }
}

/// Alpha-blends a warped patch layer over an image:
/// `out = alpha * patch + (1 - alpha) * image` per pixel.
pub fn composite_patch(image: &Image, warped: &WarpedPatch) -> Result<Image, TransformError> {
    let (h, w) = (image.height(), image.width());
    if warped.height() != h || warped.width() != w {
        return Err(TransformError::DimensionMismatch(h, w, warped.height(), warped.width()));
    }
    let mut out = image.pixels().clone();
    for y in 0..h {
        for x in 0..w {
            let a = warped.rgba[[y, x, 3]];
            if a == 0.0 {
                continue;
            }
            for c in 0..3 {
                let p = warped.rgba[[y, x, c]];
                out[[y, x, c]] = (a * p + (1.0 - a) * out[[y, x, c]]).clamp(0.0, 1.0);
            }
        }
    }
    Ok(Image { pixels: out })
}

/// Applies a patch to an image: warp into the frame, then composite.
/// Photometric and information-reduction fields of `params` are not applied
/// here; scene-level transforms operate on whole images separately.
pub fn apply_patch(image: &Image, patch: &Patch, params: &TransformParams) -> Result<Image, TransformError> {
    let warped = warp_patch(patch, params, (image.height(), image.width()))?;
    composite_patch(image, &warped)
}

pub(crate) fn image_from_unchecked(pixels: Array3<f64>) -> Image {
    debug_assert!(pixels.iter().all(|v| (0.0..=1.0).contains(v)));
    Image { pixels }
}

#[cfg(test)]
mod tests;
