//! Detector adapter boundary: inference for evaluation and a
//! differentiable attack loss for patch optimization.
//!
//! Adapters are capability-tagged: inference-only backends can serve
//! sweeps, gradient-capable ones also serve patch generation. All
//! preprocessing (resizing, normalization) lives behind the adapter;
//! metrics always operate in original pixel space. Inference is
//! deterministic by construction.

mod tinydet;
pub mod train;

pub use tinydet::{TinyDet, TinyDetArch};

use crate::metrics::{Annotation, Detection};
use crate::transforms::Image;
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("model load failure: {0}")]
    ModelLoadFailure(String),
    #[error("input shape mismatch: adapter expects {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    InputShapeMismatch { expected_h: usize, expected_w: usize, got_h: usize, got_w: usize },
    #[error("adapter '{0}' does not expose gradients")]
    GradientsUnavailable(String),
    #[error("adapter '{0}' does not support inference")]
    InferenceUnavailable(String),
    #[error("unknown class id {0} for this adapter")]
    UnknownClass(u32),
}

/// What an adapter can do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub inference: bool,
    pub gradients: bool,
}

/// The attack objective bound to a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    /// Maximize the detector's training loss: suppress correct detections
    /// and attract spurious ones anywhere in the scene.
    GlobalSuppress,
    /// Minimize the detection confidence of one target class; the patch
    /// must overlap the target object.
    LocalHide { target_class: u32 },
}

impl AttackKind {
    pub fn target_class(&self) -> Option<u32> {
        match self {
            AttackKind::GlobalSuppress => None,
            AttackKind::LocalHide { target_class } => Some(*target_class),
        }
    }
}

/// A scalar attack objective with its gradient with respect to the image.
pub struct AttackLoss {
    pub value: f64,
    /// `d(value)/d(pixel)`, shaped like the image `(H, W, 3)`.
    pub image_grad: Array3<f64>,
}

/// Uniform boundary around object-detection backends.
pub trait DetectorAdapter {
    fn detector_id(&self) -> &str;
    fn class_names(&self) -> &[String];
    fn input_size(&self) -> (usize, usize);
    fn capabilities(&self) -> Capabilities;

    /// Non-max-suppressed detections above `conf_thresh`, boxes in original
    /// image pixel coordinates.
    fn detect(&self, image: &Image, conf_thresh: f64) -> Result<Vec<Detection>, DetectError>;

    /// The attack objective and its gradient with respect to image pixels.
    /// `GlobalSuppress` evaluates the detector's native training loss
    /// against the annotations (to be maximized); `LocalHide` sums the
    /// target-class confidences overlapping the target (to be minimized).
    fn attack_loss(
        &self,
        image: &Image,
        annotations: &[Annotation],
        attack: &AttackKind,
    ) -> Result<AttackLoss, DetectError> {
        let _ = (image, annotations, attack);
        Err(DetectError::GradientsUnavailable(self.detector_id().to_string()))
    }

    /// Class id for a name, by exact match.
    fn class_id(&self, name: &str) -> Option<u32> {
        self.class_names().iter().position(|n| n == name).map(|i| i as u32)
    }
}
