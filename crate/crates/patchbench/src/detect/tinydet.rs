//! A small fully-convolutional grid detector with hand-written gradients.
//!
//! Five 3x3 conv stages (leaky ReLU) reduce the input by 16x to a
//! prediction grid; a 1x1 head emits per cell an objectness logit, four box
//! logits and one independent logistic classifier per class (multi-label,
//! so confidences are `sigmoid(obj) * sigmoid(cls)`). The training loss is
//! binary cross-entropy on objectness over all cells, binary cross-entropy
//! on every class score over all cells (background cells are explicit
//! negatives), and an MSE box term on positive cells. The receptive field
//! is local (about 47 px at the default configuration), so a patch can only
//! influence predictions in its spatial neighborhood.

use super::{AttackKind, AttackLoss, Capabilities, DetectError, DetectorAdapter};
use crate::metrics::{iou, Annotation, BBox, Detection};
use crate::nn::{self, Conv2d, ConvCtx};
use crate::transforms::Image;
use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Weight-file format version.
pub const WEIGHTS_VERSION: u32 = 1;
const WEIGHTS_MAGIC: &[u8; 8] = b"PBTDET\0\0";

/// Grid cell side in input pixels (product of the conv strides).
pub const CELL: usize = 16;
/// NMS overlap threshold.
pub const NMS_IOU: f64 = 0.5;

const LEAK: f64 = 0.1;
const LAMBDA_OBJ: f64 = 2.0;
const LAMBDA_NOOBJ: f64 = 0.5;
const LAMBDA_CLS: f64 = 1.0;
const LAMBDA_BOX: f64 = 5.0;

/// Architecture descriptor, embedded in weight files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyDetArch {
    pub input: (usize, usize),
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
}

impl Default for TinyDetArch {
    fn default() -> Self {
        Self { input: (256, 256), channels: vec![12, 24, 48, 48, 64], strides: vec![2, 2, 2, 1, 2] }
    }
}

impl TinyDetArch {
    fn validate(&self) -> Result<(), DetectError> {
        let reduction: usize = self.strides.iter().product();
        if reduction != CELL || self.channels.len() != self.strides.len() {
            return Err(DetectError::ModelLoadFailure(format!(
                "stride product must be {CELL}, got {reduction}"
            )));
        }
        if self.input.0 % CELL != 0 || self.input.1 % CELL != 0 {
            return Err(DetectError::InputShapeMismatch {
                expected_h: self.input.0 / CELL * CELL,
                expected_w: self.input.1 / CELL * CELL,
                got_h: self.input.0,
                got_w: self.input.1,
            });
        }
        Ok(())
    }
}

/// The detector model plus its identity and class vocabulary.
pub struct TinyDet {
    detector_id: String,
    class_names: Vec<String>,
    pub arch: TinyDetArch,
    convs: Vec<Conv2d>,
    head: Conv2d,
}

struct Forward {
    head_out: Array3<f64>,
    conv_ctx: Vec<ConvCtx>,
    activations: Vec<Array3<f64>>,
    head_ctx: ConvCtx,
}

/// One positive cell's regression targets.
struct CellTarget {
    gy: usize,
    gx: usize,
    fx: f64,
    fy: f64,
    wt: f64,
    ht: f64,
    class: usize,
}

impl TinyDet {
    pub fn new(
        detector_id: impl Into<String>,
        class_names: Vec<String>,
        arch: TinyDetArch,
        seed: u64,
    ) -> Result<Self, DetectError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::new();
        let mut in_c = 3;
        for (&out_c, &stride) in arch.channels.iter().zip(&arch.strides) {
            convs.push(Conv2d::new(in_c, out_c, 3, stride, 1, &mut rng));
            in_c = out_c;
        }
        let head = Conv2d::new(in_c, 5 + class_names.len(), 1, 1, 0, &mut rng);
        Ok(Self { detector_id: detector_id.into(), class_names, arch, convs, head })
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.arch.input.0 / CELL, self.arch.input.1 / CELL)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    fn image_to_chw(&self, image: &Image) -> Array3<f64> {
        let (h, w) = (image.height(), image.width());
        let mut x = Array3::zeros((3, h, w));
        for y in 0..h {
            for xx in 0..w {
                for c in 0..3 {
                    x[[c, y, xx]] = image.pixels()[[y, xx, c]];
                }
            }
        }
        x
    }

    fn forward(&self, x: &Array3<f64>) -> Forward {
        let mut conv_ctx = Vec::with_capacity(self.convs.len());
        let mut activations = Vec::with_capacity(self.convs.len());
        let mut cur = x.clone();
        for conv in &self.convs {
            let (y, ctx) = conv.forward(&cur);
            let act = y.mapv(|v| nn::leaky_relu(v, LEAK));
            conv_ctx.push(ctx);
            activations.push(act.clone());
            cur = act;
        }
        let (head_out, head_ctx) = self.head.forward(&cur);
        Forward { head_out, conv_ctx, activations, head_ctx }
    }

    /// Backpropagates a head-output gradient to the input (CHW), also
    /// accumulating weight gradients.
    fn backward(&mut self, fwd: &Forward, d_head: &Array3<f64>) -> Array3<f64> {
        let mut grad = self.head.backward(&fwd.head_ctx, d_head);
        for i in (0..self.convs.len()).rev() {
            let act = &fwd.activations[i];
            let d_pre = ndarray::Zip::from(&grad)
                .and(act)
                .map_collect(|&g, &y| g * nn::leaky_relu_grad_from_y(y, LEAK));
            grad = self.convs[i].backward(&fwd.conv_ctx[i], &d_pre);
        }
        grad
    }

    pub fn zero_grads(&mut self) {
        for c in &mut self.convs {
            c.w.zero_grad();
            c.b.zero_grad();
        }
        self.head.w.zero_grad();
        self.head.b.zero_grad();
    }

    pub fn adam_step(&mut self, lr: f64, t: u64) {
        for c in &mut self.convs {
            c.w.adam_step(lr, 0.9, 0.999, 1e-8, t);
            c.b.adam_step(lr, 0.9, 0.999, 1e-8, t);
        }
        self.head.w.adam_step(lr, 0.9, 0.999, 1e-8, t);
        self.head.b.adam_step(lr, 0.9, 0.999, 1e-8, t);
    }

    fn cell_targets(&self, annotations: &[Annotation]) -> Vec<CellTarget> {
        let (gh, gw) = self.grid();
        let (in_h, in_w) = (self.arch.input.0 as f64, self.arch.input.1 as f64);
        let mut taken = vec![false; gh * gw];
        let mut out = Vec::new();
        for ann in annotations {
            let (cx, cy) = ann.bbox.center();
            let gx = ((cx / CELL as f64).floor() as isize).clamp(0, gw as isize - 1) as usize;
            let gy = ((cy / CELL as f64).floor() as isize).clamp(0, gh as isize - 1) as usize;
            if taken[gy * gw + gx] {
                continue;
            }
            let class = ann.class_id as usize;
            if class >= self.num_classes() {
                continue;
            }
            taken[gy * gw + gx] = true;
            out.push(CellTarget {
                gy,
                gx,
                fx: (cx / CELL as f64 - gx as f64).clamp(0.0, 1.0),
                fy: (cy / CELL as f64 - gy as f64).clamp(0.0, 1.0),
                wt: (ann.bbox.width() / in_w).clamp(1e-4, 1.0),
                ht: (ann.bbox.height() / in_h).clamp(1e-4, 1.0),
                class,
            });
        }
        out
    }

    /// Native training loss and its gradient with respect to the head
    /// output, for annotations given in input pixel coordinates.
    fn train_loss_on_head(
        &self,
        head: &Array3<f64>,
        annotations: &[Annotation],
    ) -> (f64, Array3<f64>) {
        let (gh, gw) = self.grid();
        let ncls = self.num_classes();
        let cells = (gh * gw) as f64;
        let targets = self.cell_targets(annotations);
        let mut pos: Vec<Option<&CellTarget>> = vec![None; gh * gw];
        for t in &targets {
            pos[t.gy * gw + t.gx] = Some(t);
        }
        let n_pos = targets.len().max(1) as f64;

        let mut loss = 0.0;
        let mut d_head = Array3::zeros(head.dim());
        for gy in 0..gh {
            for gx in 0..gw {
                let cell = pos[gy * gw + gx];
                let obj_logit = head[[0, gy, gx]];
                let (obj_t, obj_w) = match cell {
                    Some(_) => (1.0, LAMBDA_OBJ),
                    None => (0.0, LAMBDA_NOOBJ),
                };
                loss += obj_w * nn::bce_with_logit(obj_logit, obj_t) / cells;
                d_head[[0, gy, gx]] += obj_w * nn::bce_with_logit_grad(obj_logit, obj_t) / cells;

                for c in 0..ncls {
                    let logit = head[[5 + c, gy, gx]];
                    let t = match cell {
                        Some(ct) if ct.class == c => 1.0,
                        _ => 0.0,
                    };
                    loss += LAMBDA_CLS * nn::bce_with_logit(logit, t) / cells;
                    d_head[[5 + c, gy, gx]] += LAMBDA_CLS * nn::bce_with_logit_grad(logit, t) / cells;
                }

                if let Some(ct) = cell {
                    let tgts = [ct.fx, ct.fy, ct.wt, ct.ht];
                    for (k, &tv) in tgts.iter().enumerate() {
                        let logit = head[[1 + k, gy, gx]];
                        let s = nn::sigmoid(logit);
                        let diff = s - tv;
                        loss += LAMBDA_BOX * diff * diff / n_pos;
                        d_head[[1 + k, gy, gx]] += LAMBDA_BOX * 2.0 * diff * s * (1.0 - s) / n_pos;
                    }
                }
            }
        }
        (loss, d_head)
    }

    /// One supervised training step on a single image (annotations in input
    /// coordinates). Accumulates weight gradients; returns the loss.
    pub fn train_step_accumulate(&mut self, image: &Image, annotations: &[Annotation]) -> f64 {
        debug_assert_eq!((image.height(), image.width()), self.arch.input);
        let x = self.image_to_chw(image);
        let fwd = self.forward(&x);
        let (loss, d_head) = self.train_loss_on_head(&fwd.head_out, annotations);
        let _ = self.backward(&fwd, &d_head);
        loss
    }

    /// The native training loss without gradients (evaluation helper).
    pub fn train_loss(&self, image: &Image, annotations: &[Annotation]) -> f64 {
        let (resized, _, _) = self.resize_to_input(image);
        let anns = self.scale_annotations(annotations, image);
        let x = self.image_to_chw(&resized);
        let fwd = self.forward(&x);
        self.train_loss_on_head(&fwd.head_out, &anns).0
    }

    fn resize_to_input(&self, image: &Image) -> (Image, f64, f64) {
        let (ih, iw) = self.arch.input;
        let sy = image.height() as f64 / ih as f64;
        let sx = image.width() as f64 / iw as f64;
        (image.resize(ih, iw), sy, sx)
    }

    fn scale_annotations(&self, annotations: &[Annotation], image: &Image) -> Vec<Annotation> {
        let (ih, iw) = self.arch.input;
        let sy = ih as f64 / image.height() as f64;
        let sx = iw as f64 / image.width() as f64;
        annotations
            .iter()
            .filter_map(|a| {
                let b = BBox::new(a.bbox.x1 * sx, a.bbox.y1 * sy, a.bbox.x2 * sx, a.bbox.y2 * sy).ok()?;
                Some(Annotation { bbox: b, class_id: a.class_id })
            })
            .collect()
    }

    /// Decoded box for a grid cell, in input pixel coordinates.
    fn decode_box(&self, head: &Array3<f64>, gy: usize, gx: usize) -> Option<BBox> {
        let (in_h, in_w) = (self.arch.input.0 as f64, self.arch.input.1 as f64);
        let cx = (gx as f64 + nn::sigmoid(head[[1, gy, gx]])) * CELL as f64;
        let cy = (gy as f64 + nn::sigmoid(head[[2, gy, gx]])) * CELL as f64;
        let w = nn::sigmoid(head[[3, gy, gx]]) * in_w;
        let h = nn::sigmoid(head[[4, gy, gx]]) * in_h;
        let x1 = (cx - w / 2.0).clamp(0.0, in_w);
        let y1 = (cy - h / 2.0).clamp(0.0, in_h);
        let x2 = (cx + w / 2.0).clamp(0.0, in_w);
        let y2 = (cy + h / 2.0).clamp(0.0, in_h);
        BBox::new(x1, y1, x2, y2).ok()
    }

    /// Bilinear-resize transpose: pushes a gradient on the resized image
    /// back onto the source image.
    fn resize_backward(grad_resized: &Array3<f64>, src_h: usize, src_w: usize) -> Array3<f64> {
        let (rh, rw, _) = grad_resized.dim();
        let mut out = Array3::zeros((src_h, src_w, 3));
        let sy = src_h as f64 / rh as f64;
        let sx = src_w as f64 / rw as f64;
        for y in 0..rh {
            for x in 0..rw {
                let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (src_h - 1) as f64);
                let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (src_w - 1) as f64);
                let y0 = src_y.floor() as usize;
                let x0 = src_x.floor() as usize;
                let y1 = (y0 + 1).min(src_h - 1);
                let x1 = (x0 + 1).min(src_w - 1);
                let fy = src_y - y0 as f64;
                let fx = src_x - x0 as f64;
                for c in 0..3 {
                    let g = grad_resized[[y, x, c]];
                    if g == 0.0 {
                        continue;
                    }
                    out[[y0, x0, c]] += g * (1.0 - fy) * (1.0 - fx);
                    out[[y0, x1, c]] += g * (1.0 - fy) * fx;
                    out[[y1, x0, c]] += g * fy * (1.0 - fx);
                    out[[y1, x1, c]] += g * fy * fx;
                }
            }
        }
        out
    }

    /// Persists weights with an embedded architecture header.
    pub fn save(&self, path: &Path) -> Result<(), DetectError> {
        let io_err = |e: std::io::Error| DetectError::ModelLoadFailure(e.to_string());
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        f.write_all(WEIGHTS_MAGIC).map_err(io_err)?;
        f.write_all(&WEIGHTS_VERSION.to_le_bytes()).map_err(io_err)?;
        let header = serde_json::to_vec(&(&self.detector_id, &self.class_names, &self.arch))
            .map_err(|e| DetectError::ModelLoadFailure(e.to_string()))?;
        f.write_all(&(header.len() as u64).to_le_bytes()).map_err(io_err)?;
        f.write_all(&header).map_err(io_err)?;
        for arr in self.weight_arrays() {
            for &v in &arr {
                f.write_all(&v.to_le_bytes()).map_err(io_err)?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DetectError> {
        let io_err = |e: std::io::Error| DetectError::ModelLoadFailure(format!("{}: {e}", path.display()));
        let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic).map_err(io_err)?;
        if &magic != WEIGHTS_MAGIC {
            return Err(DetectError::ModelLoadFailure("not a detector weight file".into()));
        }
        let mut v4 = [0u8; 4];
        f.read_exact(&mut v4).map_err(io_err)?;
        let version = u32::from_le_bytes(v4);
        if version != WEIGHTS_VERSION {
            return Err(DetectError::ModelLoadFailure(format!(
                "weight file version {version}, supported {WEIGHTS_VERSION}"
            )));
        }
        let mut l8 = [0u8; 8];
        f.read_exact(&mut l8).map_err(io_err)?;
        let hlen = u64::from_le_bytes(l8) as usize;
        let mut hbuf = vec![0u8; hlen];
        f.read_exact(&mut hbuf).map_err(io_err)?;
        let (detector_id, class_names, arch): (String, Vec<String>, TinyDetArch) =
            serde_json::from_slice(&hbuf).map_err(|e| DetectError::ModelLoadFailure(e.to_string()))?;
        let mut model = Self::new(detector_id, class_names, arch, 0)?;
        model.load_weights_from(&mut f).map_err(io_err)?;
        Ok(model)
    }

    fn load_weights_from(&mut self, f: &mut impl Read) -> std::io::Result<()> {
        let sizes: Vec<usize> = self.weight_arrays().iter().map(|a| a.len()).collect();
        let mut all = Vec::with_capacity(sizes.len());
        for n in sizes {
            let mut vals = vec![0.0f64; n];
            for v in vals.iter_mut() {
                let mut b = [0u8; 8];
                f.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            }
            all.push(vals);
        }
        let mut it = all.into_iter();
        for conv in &mut self.convs {
            for (dst, src) in conv.w.v.iter_mut().zip(it.next().unwrap()) {
                *dst = src;
            }
            for (dst, src) in conv.b.v.iter_mut().zip(it.next().unwrap()) {
                *dst = src;
            }
        }
        for (dst, src) in self.head.w.v.iter_mut().zip(it.next().unwrap()) {
            *dst = src;
        }
        for (dst, src) in self.head.b.v.iter_mut().zip(it.next().unwrap()) {
            *dst = src;
        }
        Ok(())
    }

    fn weight_arrays(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for conv in &self.convs {
            out.push(conv.w.v.iter().copied().collect());
            out.push(conv.b.v.iter().copied().collect());
        }
        out.push(self.head.w.v.iter().copied().collect());
        out.push(self.head.b.v.iter().copied().collect());
        out
    }
}

impl DetectorAdapter for TinyDet {
    fn detector_id(&self) -> &str {
        &self.detector_id
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn input_size(&self) -> (usize, usize) {
        self.arch.input
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { inference: true, gradients: true }
    }

    fn detect(&self, image: &Image, conf_thresh: f64) -> Result<Vec<Detection>, DetectError> {
        let (resized, sy, sx) = self.resize_to_input(image);
        let x = self.image_to_chw(&resized);
        let fwd = self.forward(&x);
        let head = &fwd.head_out;
        let (gh, gw) = self.grid();
        let mut candidates: Vec<Detection> = Vec::new();
        for gy in 0..gh {
            for gx in 0..gw {
                let obj = nn::sigmoid(head[[0, gy, gx]]);
                // Max attainable confidence in this cell is obj itself.
                if obj < conf_thresh {
                    continue;
                }
                let Some(bbox) = self.decode_box(head, gy, gx) else { continue };
                for c in 0..self.num_classes() {
                    let conf = obj * nn::sigmoid(head[[5 + c, gy, gx]]);
                    if conf >= conf_thresh {
                        candidates.push(Detection { bbox, class_id: c as u32, confidence: conf });
                    }
                }
            }
        }
        // Per-class NMS; ties keep grid scan order (stable sort).
        let mut kept: Vec<Detection> = Vec::new();
        for c in 0..self.num_classes() as u32 {
            let mut class_dets: Vec<Detection> =
                candidates.iter().filter(|d| d.class_id == c).copied().collect();
            class_dets.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap());
            let mut class_kept: Vec<Detection> = Vec::new();
            for d in class_dets {
                if class_kept.iter().all(|k| iou(&k.bbox, &d.bbox) < NMS_IOU) {
                    class_kept.push(d);
                }
            }
            kept.extend(class_kept);
        }
        // Map back to original pixel coordinates.
        let mapped = kept
            .into_iter()
            .filter_map(|d| {
                let b = BBox::new(d.bbox.x1 * sx, d.bbox.y1 * sy, d.bbox.x2 * sx, d.bbox.y2 * sy).ok()?;
                Some(Detection { bbox: b, class_id: d.class_id, confidence: d.confidence })
            })
            .collect();
        Ok(mapped)
    }

    fn attack_loss(
        &self,
        image: &Image,
        annotations: &[Annotation],
        attack: &AttackKind,
    ) -> Result<AttackLoss, DetectError> {
        if let Some(t) = attack.target_class() {
            if t as usize >= self.num_classes() {
                return Err(DetectError::UnknownClass(t));
            }
        }
        let (ih, iw) = self.arch.input;
        let needs_resize = (image.height(), image.width()) != (ih, iw);
        let (resized, _, _) = self.resize_to_input(image);
        let anns = self.scale_annotations(annotations, image);
        let x = self.image_to_chw(&resized);
        // Gradients only flow to the input here; clone so weight grads are
        // untouched for callers interleaving attack and training steps.
        let mut model = self.clone_weights_view();
        let fwd = model.forward(&x);
        let head = fwd.head_out.clone();
        let (value, d_head) = match attack {
            AttackKind::GlobalSuppress => model.train_loss_on_head(&head, &anns),
            AttackKind::LocalHide { target_class } => {
                let t = *target_class as usize;
                let targets: Vec<&Annotation> =
                    anns.iter().filter(|a| a.class_id == *target_class).collect();
                let (gh, gw) = model.grid();
                let mut loss = 0.0;
                let mut d = Array3::zeros(head.dim());
                for gy in 0..gh {
                    for gx in 0..gw {
                        let Some(bbox) = model.decode_box(&head, gy, gx) else { continue };
                        let overlaps = targets.iter().any(|a| iou(&bbox, &a.bbox) > 0.0);
                        if !overlaps {
                            continue;
                        }
                        let obj = nn::sigmoid(head[[0, gy, gx]]);
                        let cls = nn::sigmoid(head[[5 + t, gy, gx]]);
                        loss += obj * cls;
                        d[[0, gy, gx]] += obj * (1.0 - obj) * cls;
                        d[[5 + t, gy, gx]] += obj * cls * (1.0 - cls);
                    }
                }
                (loss, d)
            }
        };
        let d_input_chw = model.backward(&fwd, &d_head);
        // CHW -> HWC at input resolution.
        let mut grad_resized = Array3::zeros((ih, iw, 3));
        for y in 0..ih {
            for xx in 0..iw {
                for c in 0..3 {
                    grad_resized[[y, xx, c]] = d_input_chw[[c, y, xx]];
                }
            }
        }
        let image_grad = if needs_resize {
            Self::resize_backward(&grad_resized, image.height(), image.width())
        } else {
            grad_resized
        };
        Ok(AttackLoss { value, image_grad })
    }
}

impl TinyDet {
    /// A structural clone sharing no gradient state (weights copied).
    fn clone_weights_view(&self) -> TinyDet {
        let mut m = TinyDet::new(self.detector_id.clone(), self.class_names.clone(), self.arch.clone(), 0)
            .expect("arch already validated");
        for (dst, src) in m.convs.iter_mut().zip(&self.convs) {
            dst.w.v.assign(&src.w.v);
            dst.b.v.assign(&src.b.v);
        }
        m.head.w.v.assign(&self.head.w.v);
        m.head.b.v.assign(&self.head.b.v);
        m
    }
}
