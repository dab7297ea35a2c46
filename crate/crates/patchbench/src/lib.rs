//! patchbench — adversarial-patch generation and robustness measurement for
//! object detectors.
//!
//! The crate is organized around a small, fully deterministic pipeline:
//!
//! 1. **transforms** – pure image kernels: patch warping/compositing under a
//!    pinhole camera model, plus scene-level photometric and
//!    information-reduction transforms (brightness, hue, contrast,
//!    saturation, box blur, color quantization).
//! 2. **metrics** – IoU matching, per-class average precision, mAP, targeted
//!    detection confidence, and image illuminance estimation.
//! 3. **detect** – the detector adapter boundary: inference with NMS and a
//!    differentiable attack loss. Ships a small fully-convolutional grid
//!    detector with hand-written forward/backward passes.
//! 4. **patchgen** – projected signed-gradient patch synthesis with
//!    expectation-over-transformation sampling, plus the random-noise
//!    control patch and the occlusion-vs-attack validity check.
//! 5. **calibration** – a convolutional regressor mapping a target scene
//!    image to the (brightness, contrast, hue, saturation) quadruple that
//!    best replicates it from a baseline image.
//! 6. **sweeps** – declarative parameter grids evaluated point by point,
//!    position heatmaps and distance curves.
//! 7. **analysis** – curve aggregation, patch color statistics, and
//!    deterministic SVG/CSV figure output.
//! 8. **io** – PNG/COCO/JSONL/TOML persistence, the bundled scene fixture,
//!    and run configuration.
//!
//! Everything is seeded and single-threaded by default: identical inputs and
//! seeds produce bit-identical outputs, including files on disk.

pub mod analysis;
pub mod calibration;
pub mod detect;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod patchgen;
pub mod scene;
pub mod sweeps;
pub mod transforms;

pub use metrics::{Annotation, BBox, Detection, EvalResult};
pub use transforms::{Image, Patch, PatchKind, TransformParams};
