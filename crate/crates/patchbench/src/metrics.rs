//! Detection-quality metrics: IoU matching, per-class average precision,
//! mAP, targeted detection confidence, and image illuminance.
//!
//! AP uses all-point interpolation (exact area under the precision
//! envelope) at a single IoU threshold, with greedy confidence-ordered
//! matching. Detections are pooled per class across images before the
//! precision-recall curve is built.

use crate::transforms::Image;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Default IoU threshold for matching detections to ground truth.
pub const DEFAULT_IOU_THRESH: f64 = 0.5;
/// Detector outputs below this confidence are discarded before metrics.
pub const DEFAULT_CONF_THRESH: f64 = 0.25;
/// Default linear factor mapping mean luminance to the lux-equivalent axis.
pub const DEFAULT_ILLUMINANCE_SCALE: f64 = 255.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("box must satisfy x1 < x2 and y1 < y2, got ({x1}, {y1}, {x2}, {y2})")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("iou threshold {0} outside (0, 1)")]
    InvalidIouThreshold(f64),
    #[error("no ground-truth annotations for this class")]
    EmptyGroundTruth,
    #[error("no annotations in any image")]
    NoAnnotations,
}

/// An axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, MetricsError> {
        if !(x1 < x2 && y1 < y2) {
            return Err(MetricsError::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }
}

/// A predicted box with class and confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: u32,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, class_id: u32, confidence: f64) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(MetricsError::InvalidConfidence(confidence));
        }
        Ok(Self { bbox, class_id, confidence })
    }
}

/// A ground-truth labeled box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub bbox: BBox,
    pub class_id: u32,
}

/// Evaluation summary for one scene or one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// AP per class, over classes with at least one annotation.
    pub per_class_ap: BTreeMap<u32, f64>,
    /// Mean of `per_class_ap`.
    pub map: f64,
    /// Confidence of each named target object (filled by callers that know
    /// the object naming, e.g. the scene fixture).
    #[serde(default)]
    pub per_object_confidence: BTreeMap<String, f64>,
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Detections flagged true/false positive after greedy matching, in
/// descending confidence order.
fn match_greedy(dets: &[(usize, &Detection)], gts: &[&Annotation], iou_thresh: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // Descending confidence; ties keep insertion order (stable sort).
    order.sort_by(|&a, &b| dets[b].1.confidence.partial_cmp(&dets[a].1.confidence).unwrap());
    let mut matched = vec![false; gts.len()];
    let mut tp = vec![false; dets.len()];
    for &di in &order {
        let det = dets[di].1;
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if matched[gi] {
                continue;
            }
            let ov = iou(&det.bbox, &gt.bbox);
            if ov >= iou_thresh && best.map_or(true, |(_, b)| ov > b) {
                best = Some((gi, ov));
            }
        }
        if let Some((gi, _)) = best {
            matched[gi] = true;
            tp[di] = true;
        }
    }
    tp
}

/// Area under the precision envelope of a TP/FP sequence ordered by
/// descending confidence (all-point interpolation).
fn ap_from_flags(flags_in_conf_order: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut points = Vec::with_capacity(flags_in_conf_order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in flags_in_conf_order {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push((tp as f64 / num_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    // Envelope: precision at recall r is the max precision at recall >= r.
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..points.len() {
        let (r, _) = points[i];
        if r > prev_recall {
            let env = points[i..].iter().map(|p| p.1).fold(0.0_f64, f64::max);
            ap += (r - prev_recall) * env;
            prev_recall = r;
        }
    }
    ap
}

/// Average precision for one class on one image.
///
/// All detections and annotations must share a class. Errors with
/// `EmptyGroundTruth` when there is nothing to recall; callers exclude such
/// classes from mAP averaging.
pub fn average_precision(
    dets: &[Detection],
    gts: &[Annotation],
    iou_thresh: f64,
) -> Result<f64, MetricsError> {
    if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
        return Err(MetricsError::InvalidIouThreshold(iou_thresh));
    }
    if gts.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let indexed: Vec<(usize, &Detection)> = dets.iter().enumerate().collect();
    let gt_refs: Vec<&Annotation> = gts.iter().collect();
    let tp = match_greedy(&indexed, &gt_refs, iou_thresh);
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.partial_cmp(&dets[a].confidence).unwrap());
    let flags: Vec<bool> = order.iter().map(|&i| tp[i]).collect();
    Ok(ap_from_flags(&flags, gts.len()))
}

/// mAP over a set of images: AP pooled per class across images, then
/// averaged over classes present in the ground truth.
pub fn mean_average_precision(
    per_image: &[(Vec<Detection>, Vec<Annotation>)],
    iou_thresh: f64,
) -> Result<EvalResult, MetricsError> {
    if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
        return Err(MetricsError::InvalidIouThreshold(iou_thresh));
    }
    let classes: BTreeSet<u32> = per_image
        .iter()
        .flat_map(|(_, gts)| gts.iter().map(|g| g.class_id))
        .collect();
    if classes.is_empty() {
        return Err(MetricsError::NoAnnotations);
    }
    let mut per_class_ap = BTreeMap::new();
    for &class in &classes {
        // Pool detections of this class across images, keep (image, det).
        let mut pooled: Vec<(usize, &Detection)> = Vec::new();
        let mut num_gt = 0usize;
        for (img_idx, (dets, gts)) in per_image.iter().enumerate() {
            num_gt += gts.iter().filter(|g| g.class_id == class).count();
            for det in dets.iter().filter(|d| d.class_id == class) {
                pooled.push((img_idx, det));
            }
        }
        // Global confidence order; each detection matches only within its
        // own image's unmatched ground truths.
        let mut order: Vec<usize> = (0..pooled.len()).collect();
        order.sort_by(|&a, &b| pooled[b].1.confidence.partial_cmp(&pooled[a].1.confidence).unwrap());
        let mut matched: BTreeMap<(usize, usize), bool> = BTreeMap::new();
        let mut flags = Vec::with_capacity(pooled.len());
        for &pi in &order {
            let (img_idx, det) = pooled[pi];
            let gts = &per_image[img_idx].1;
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if gt.class_id != class || *matched.get(&(img_idx, gi)).unwrap_or(&false) {
                    continue;
                }
                let ov = iou(&det.bbox, &gt.bbox);
                if ov >= iou_thresh && best.map_or(true, |(_, b)| ov > b) {
                    best = Some((gi, ov));
                }
            }
            if let Some((gi, _)) = best {
                matched.insert((img_idx, gi), true);
                flags.push(true);
            } else {
                flags.push(false);
            }
        }
        per_class_ap.insert(class, ap_from_flags(&flags, num_gt));
    }
    let map = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    Ok(EvalResult { per_class_ap, map, per_object_confidence: BTreeMap::new() })
}

/// Maximum confidence among detections of `target_class` overlapping
/// `target_box` at IoU >= `iou_thresh`; 0.0 when none.
pub fn target_confidence(
    dets: &[Detection],
    target_class: u32,
    target_box: &BBox,
    iou_thresh: f64,
) -> f64 {
    dets.iter()
        .filter(|d| d.class_id == target_class && iou(&d.bbox, target_box) >= iou_thresh)
        .map(|d| d.confidence)
        .fold(0.0, f64::max)
}

/// Mean Rec. 709 luminance scaled to the lux-equivalent axis by `scale`.
pub fn image_illuminance_scaled(image: &Image, scale: f64) -> f64 {
    let mut acc = 0.0;
    for y in 0..image.height() {
        for x in 0..image.width() {
            acc += crate::transforms::luminance(image.get(y, x));
        }
    }
    acc / (image.height() * image.width()) as f64 * scale
}

/// [`image_illuminance_scaled`] at the default x255 scale.
pub fn image_illuminance(image: &Image) -> f64 {
    image_illuminance_scaled(image, DEFAULT_ILLUMINANCE_SCALE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn det(bbox: BBox, class_id: u32, confidence: f64) -> Detection {
        Detection { bbox, class_id, confidence }
    }

    fn ann(bbox: BBox, class_id: u32) -> Annotation {
        Annotation { bbox, class_id }
    }

    // ------------------------------------------------------------------
    // Independent brute-force oracle: recomputes greedy matching from
    // scratch per ranked prefix and integrates the precision envelope by
    // direct enumeration over recall levels.
    // ------------------------------------------------------------------

    fn oracle_map(per_image: &[(Vec<Detection>, Vec<Annotation>)], iou_thresh: f64) -> f64 {
        let mut classes: Vec<u32> = per_image
            .iter()
            .flat_map(|(_, g)| g.iter().map(|a| a.class_id))
            .collect();
        classes.sort();
        classes.dedup();
        let mut total = 0.0;
        for &class in &classes {
            total += oracle_class_ap(per_image, class, iou_thresh);
        }
        total / classes.len() as f64
    }

    fn oracle_class_ap(
        per_image: &[(Vec<Detection>, Vec<Annotation>)],
        class: u32,
        iou_thresh: f64,
    ) -> f64 {
        // Pool and rank all detections of the class.
        let mut pool: Vec<(usize, Detection)> = Vec::new();
        let mut num_gt = 0usize;
        for (ii, (dets, gts)) in per_image.iter().enumerate() {
            num_gt += gts.iter().filter(|g| g.class_id == class).count();
            pool.extend(dets.iter().filter(|d| d.class_id == class).map(|d| (ii, *d)));
        }
        if num_gt == 0 {
            return 0.0;
        }
        pool.sort_by(|a, b| b.1.confidence.partial_cmp(&a.1.confidence).unwrap());
        // PR point after each prefix, recomputing matches from scratch.
        let mut points: Vec<(f64, f64)> = Vec::new();
        for k in 1..=pool.len() {
            let prefix = &pool[..k];
            let mut tp = 0usize;
            // Per image, greedily match prefix detections in rank order.
            for (ii, (_, gts)) in per_image.iter().enumerate() {
                let gt_class: Vec<&Annotation> =
                    gts.iter().filter(|g| g.class_id == class).collect();
                let mut used = vec![false; gt_class.len()];
                for (di, d) in prefix.iter().filter(|(i, _)| *i == ii) {
                    let _ = di;
                    let mut best: Option<(usize, f64)> = None;
                    for (gi, g) in gt_class.iter().enumerate() {
                        if used[gi] {
                            continue;
                        }
                        let ov = iou(&d.bbox, &g.bbox);
                        if ov >= iou_thresh && best.map_or(true, |(_, b)| ov > b) {
                            best = Some((gi, ov));
                        }
                    }
                    if let Some((gi, _)) = best {
                        used[gi] = true;
                        tp += 1;
                    }
                }
            }
            points.push((tp as f64 / num_gt as f64, tp as f64 / k as f64));
        }
        // Integrate max-precision-to-the-right over distinct recall levels.
        let mut recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
        recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
        recalls.dedup();
        let mut ap = 0.0;
        let mut prev = 0.0;
        for r in recalls {
            if r <= prev {
                continue;
            }
            let env = points
                .iter()
                .filter(|p| p.0 >= r)
                .map(|p| p.1)
                .fold(0.0_f64, f64::max);
            ap += (r - prev) * env;
            prev = r;
        }
        ap
    }

    #[test]
    fn iou_basics() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        let disjoint = bb(5.0, 5.0, 6.0, 6.0);
        assert_eq!(iou(&a, &disjoint), 0.0);
        // Pixel-counting oracle on an integer grid: boxes (0,0,2,2) and
        // (1,0,3,2) intersect in 2 cells of 8 total -> 1/3.
        let b = bb(1.0, 0.0, 3.0, 2.0);
        let mut inter = 0;
        let mut union = 0;
        for x in 0..3 {
            for y in 0..2 {
                let in_a = x < 2;
                let in_b = x >= 1;
                if in_a && in_b {
                    inter += 1;
                }
                if in_a || in_b {
                    union += 1;
                }
                let _ = y;
            }
        }
        // one row worth double-counted: cells are 1x1 over y in 0..2
        let inter = inter * 2 / 2;
        let union = union * 2 / 2;
        assert_abs_diff_eq!(iou(&a, &b), inter as f64 / union as f64, epsilon = 1e-12);
        assert_abs_diff_eq!(iou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(iou(&a, &b), iou(&b, &a), epsilon = 1e-15);
    }

    #[test]
    fn ap_perfect_single_detection() {
        let gt = vec![ann(bb(0.0, 0.0, 10.0, 10.0), 0)];
        let dets = vec![det(bb(0.0, 0.0, 10.0, 10.0), 0, 0.9)];
        assert_eq!(average_precision(&dets, &gt, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn ap_no_detections_is_zero() {
        let gt = vec![ann(bb(0.0, 0.0, 10.0, 10.0), 0)];
        assert_eq!(average_precision(&[], &gt, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn ap_fp_above_tp_halves() {
        // PR points: (r=0, p=0) then (r=1, p=0.5); area = 0.5.
        let gt = vec![ann(bb(0.0, 0.0, 10.0, 10.0), 0)];
        let dets = vec![
            det(bb(50.0, 50.0, 60.0, 60.0), 0, 0.9),
            det(bb(0.0, 0.0, 10.0, 10.0), 0, 0.8),
        ];
        assert_abs_diff_eq!(average_precision(&dets, &gt, 0.5).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ap_empty_ground_truth_errors() {
        let dets = vec![det(bb(0.0, 0.0, 1.0, 1.0), 0, 0.9)];
        assert!(matches!(average_precision(&dets, &[], 0.5), Err(MetricsError::EmptyGroundTruth)));
    }

    #[test]
    fn map_perfect_and_suppressed() {
        let gts = vec![ann(bb(0.0, 0.0, 10.0, 10.0), 0), ann(bb(20.0, 20.0, 30.0, 30.0), 1)];
        let dets = vec![
            det(bb(0.0, 0.0, 10.0, 10.0), 0, 0.9),
            det(bb(20.0, 20.0, 30.0, 30.0), 1, 0.8),
        ];
        let r = mean_average_precision(&[(dets, gts.clone())], 0.5).unwrap();
        assert_eq!(r.map, 1.0);
        let r = mean_average_precision(&[(vec![], gts)], 0.5).unwrap();
        assert_eq!(r.map, 0.0);
        assert!(matches!(
            mean_average_precision(&[(vec![], vec![])], 0.5),
            Err(MetricsError::NoAnnotations)
        ));
    }

    #[test]
    fn map_matches_oracle_on_randomized_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let instance = random_instance(&mut rng);
            let ours = mean_average_precision(&instance, 0.5);
            let Ok(ours) = ours else { continue };
            let want = oracle_map(&instance, 0.5);
            assert_abs_diff_eq!(ours.map, want, epsilon = 1e-9);
        }
    }

    pub(crate) fn random_instance(
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Vec<(Vec<Detection>, Vec<Annotation>)> {
        use rand::Rng;
        let images = rng.random_range(1..=3usize);
        (0..images)
            .map(|_| {
                let n_gt = rng.random_range(0..=5usize);
                let gts: Vec<Annotation> = (0..n_gt)
                    .map(|_| {
                        let x1: f64 = rng.random_range(0.0..80.0);
                        let y1: f64 = rng.random_range(0.0..80.0);
                        ann(
                            bb(x1, y1, x1 + rng.random_range(5.0..20.0), y1 + rng.random_range(5.0..20.0)),
                            rng.random_range(0..3),
                        )
                    })
                    .collect();
                let n_det = rng.random_range(0..=10usize);
                let dets: Vec<Detection> = (0..n_det)
                    .map(|_| {
                        // Half the detections jitter a ground truth, half are noise.
                        if !gts.is_empty() && rng.random_bool(0.5) {
                            let g = gts[rng.random_range(0..gts.len())];
                            let dx: f64 = rng.random_range(-4.0..4.0);
                            let dy: f64 = rng.random_range(-4.0..4.0);
                            det(
                                bb(g.bbox.x1 + dx, g.bbox.y1 + dy, g.bbox.x2 + dx, g.bbox.y2 + dy),
                                g.class_id,
                                rng.random_range(0.05..1.0),
                            )
                        } else {
                            let x1: f64 = rng.random_range(0.0..80.0);
                            let y1: f64 = rng.random_range(0.0..80.0);
                            det(
                                bb(x1, y1, x1 + rng.random_range(5.0..20.0), y1 + rng.random_range(5.0..20.0)),
                                rng.random_range(0..3),
                                rng.random_range(0.05..1.0),
                            )
                        }
                    })
                    .collect();
                (dets, gts)
            })
            .collect()
    }

    #[test]
    fn target_confidence_rules() {
        let target = bb(10.0, 10.0, 30.0, 30.0);
        let dets = vec![
            det(bb(11.0, 11.0, 31.0, 31.0), 2, 0.7),
            det(bb(80.0, 80.0, 90.0, 90.0), 2, 0.95),
        ];
        assert_eq!(target_confidence(&dets, 2, &target, 0.5), 0.7);
        // Fully suppressed object reports zero.
        assert_eq!(target_confidence(&[], 2, &target, 0.5), 0.0);
        // Max over matches.
        let dets = vec![
            det(bb(10.0, 10.0, 30.0, 30.0), 2, 0.4),
            det(bb(11.0, 11.0, 30.0, 30.0), 2, 0.6),
        ];
        assert_eq!(target_confidence(&dets, 2, &target, 0.5), 0.6);
        // Removing detections never increases the value.
        let fewer = &dets[..1];
        assert!(target_confidence(fewer, 2, &target, 0.5) <= 0.6);
    }

    #[test]
    fn illuminance_black_white_gray() {
        let black = Image::constant(4, 4, [0.0; 3]);
        let white = Image::constant(4, 4, [1.0; 3]);
        let gray = Image::constant(4, 4, [0.5; 3]);
        assert_eq!(image_illuminance(&black), 0.0);
        assert_abs_diff_eq!(image_illuminance(&white), 255.0, epsilon = 1e-9);
        assert_abs_diff_eq!(image_illuminance(&gray), 127.5, epsilon = 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ap_monotonicity(seed in 0u64..5000) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let instance = random_instance(&mut rng);
            let (dets, gts) = &instance[0];
            let class_dets: Vec<Detection> = dets.iter().filter(|d| d.class_id == 0).cloned().collect();
            let class_gts: Vec<Annotation> = gts.iter().filter(|g| g.class_id == 0).cloned().collect();
            prop_assume!(!class_gts.is_empty());
            let base = average_precision(&class_dets, &class_gts, 0.5).unwrap();

            // Lowest-confidence false positive never increases AP.
            let min_conf = class_dets.iter().map(|d| d.confidence).fold(1.0_f64, f64::min);
            let mut with_fp = class_dets.clone();
            with_fp.push(det(bb(900.0, 900.0, 910.0, 910.0), 0, (min_conf - 0.01).max(0.0)));
            let ap_fp = average_precision(&with_fp, &class_gts, 0.5).unwrap();
            prop_assert!(ap_fp <= base + 1e-12);

            // Highest-confidence true positive never decreases AP.
            let mut with_tp = class_dets.clone();
            let mut gts2 = class_gts.clone();
            gts2.push(ann(bb(500.0, 500.0, 520.0, 520.0), 0));
            with_tp.push(det(bb(500.0, 500.0, 520.0, 520.0), 0, 1.0));
            let base2 = average_precision(&class_dets, &gts2, 0.5).unwrap();
            let ap_tp = average_precision(&with_tp, &gts2, 0.5).unwrap();
            prop_assert!(ap_tp >= base2 - 1e-12);
        }

        #[test]
        fn ap_scale_invariance(seed in 0u64..5000, c in 0.05f64..1.0) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let instance = random_instance(&mut rng);
            let r1 = mean_average_precision(&instance, 0.5);
            prop_assume!(r1.is_ok());
            let scaled: Vec<_> = instance
                .iter()
                .map(|(dets, gts)| {
                    (
                        dets.iter()
                            .map(|d| det(d.bbox, d.class_id, d.confidence * c))
                            .collect::<Vec<_>>(),
                        gts.clone(),
                    )
                })
                .collect();
            let r2 = mean_average_precision(&scaled, 0.5).unwrap();
            let r1 = r1.unwrap();
            prop_assert!((r1.map - r2.map).abs() < 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r1.map));
        }
    }
}
