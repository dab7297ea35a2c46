//! Supervised training harness for the bundled grid detector.
//!
//! Trains on procedurally generated desk scenes with photometric,
//! information-reduction and occlusion augmentation so that the detector
//! is robust to the sweep transforms and to random-noise occluders (the
//! control-patch condition), while staying attackable by optimized
//! patches. Fully seeded and single-threaded.

use super::tinydet::{TinyDet, TinyDetArch};
use crate::metrics::Annotation;
use crate::scene;
use crate::transforms::{adjust_brightness, low_pass, shift_hue, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorTrainConfig {
    pub steps: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub seed: u64,
    pub input: (usize, usize),
    pub detector_id: String,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        Self {
            steps: 2400,
            batch_size: 4,
            learning_rate: 1e-3,
            seed: 7,
            input: (256, 256),
            detector_id: "tinydet-desk-v1".into(),
        }
    }
}

/// One augmented training sample.
fn sample_scene(rng: &mut ChaCha8Rng, input: (usize, usize)) -> (Image, Vec<Annotation>) {
    let (h, w) = input;
    let roll: f64 = rng.random();
    let (mut img, anns) = if roll < 0.04 {
        // Blank screens teach "nothing here".
        let v: f64 = rng.random_range(0.0..1.0);
        (Image::constant(h, w, [v, rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]), vec![])
    } else if roll < 0.10 {
        // Background-only scene.
        (scene::render_scene(&[], h, w, rng.random()).0, vec![])
    } else {
        let layout = scene::jittered_layout(rng, 0.08, 0.12);
        let (img, anns) = scene::render_scene(&layout, h, w, rng.random());
        (img, anns)
    };

    // Photometric augmentation.
    if rng.random_bool(0.75) {
        img = shift_hue(&img, rng.random_range(-180.0..180.0));
    }
    let factor: f64 = rng.random_range(0.45..2.3);
    let clip = rng.random_bool(0.5);
    img = adjust_brightness(&img, factor, clip).expect("positive factor");

    // Mild blur.
    if rng.random_bool(0.3) {
        img = low_pass(&img, if rng.random_bool(0.5) { 3 } else { 5 });
    }

    // Random occluders: noise squares (control-patch lookalikes) or flat
    // patches, sometimes deliberately over an object.
    let n_occ = {
        let r: f64 = rng.random();
        if r < 0.40 {
            0
        } else if r < 0.78 {
            1
        } else {
            2
        }
    };
    if n_occ > 0 {
        let mut px = img.pixels().clone();
        for _ in 0..n_occ {
            let side = rng.random_range(20..=((w as f64 * 0.30) as usize).max(24));
            let (cy, cx) = if !anns.is_empty() && rng.random_bool(0.5) {
                let a = &anns[rng.random_range(0..anns.len())];
                let (bx, by) = a.bbox.center();
                (
                    (by + rng.random_range(-0.25..0.25) * a.bbox.height()) as i64,
                    (bx + rng.random_range(-0.25..0.25) * a.bbox.width()) as i64,
                )
            } else {
                (rng.random_range(0..h as i64), rng.random_range(0..w as i64))
            };
            let flat = rng.random_bool(0.3);
            let flat_color = [rng.random(), rng.random(), rng.random()];
            for y in cy - side as i64 / 2..cy + side as i64 / 2 {
                for x in cx - side as i64 / 2..cx + side as i64 / 2 {
                    if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
                        continue;
                    }
                    let rgb: [f64; 3] = if flat { flat_color } else { [rng.random(), rng.random(), rng.random()] };
                    for c in 0..3 {
                        px[[y as usize, x as usize, c]] = rgb[c];
                    }
                }
            }
        }
        img = Image::new(px).expect("occluder values in range");
    }

    // Sensor-ish pixel noise.
    if rng.random_bool(0.5) {
        let amp = 0.02;
        let mut px = img.pixels().clone();
        for v in px.iter_mut() {
            *v = (*v + rng.random_range(-amp..amp)).clamp(0.0, 1.0);
        }
        img = Image::new(px).expect("noise clamped");
    }

    (img, anns)
}

/// Trains a fresh detector; returns the model and the per-step loss trace.
pub fn train_detector(cfg: &DetectorTrainConfig) -> (TinyDet, Vec<f64>) {
    let arch = TinyDetArch { input: cfg.input, ..TinyDetArch::default() };
    let mut model = TinyDet::new(cfg.detector_id.clone(), scene::class_names(), arch, cfg.seed)
        .expect("valid default architecture");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.steps as usize);
    for step in 0..cfg.steps {
        model.zero_grads();
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch_size.max(1) {
            let (img, anns) = sample_scene(&mut rng, cfg.input);
            batch_loss += model.train_step_accumulate(&img, &anns);
        }
        batch_loss /= cfg.batch_size.max(1) as f64;
        // Step decay over the last quarter.
        let lr = if step >= cfg.steps * 3 / 4 { cfg.learning_rate * 0.3 } else { cfg.learning_rate };
        model.adam_step(lr, step as u64 + 1);
        trace.push(batch_loss);
    }
    (model, trace)
}
