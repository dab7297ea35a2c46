//! Synthetic desk-scene rendering.
//!
//! Procedurally draws a small indoor scene with stand-in objects (bottle,
//! cup, potted plant, tennis racket, spoon, framed picture of a person) on
//! a desk-and-wall background. Object cores use darker tones so shapes stay
//! distinguishable under overexposure; the canonical arrangement rings the
//! frame center. Rendering is a pure function of the layout and texture
//! seed, so fixtures are reproducible byte for byte.

use crate::metrics::{Annotation, BBox};
use crate::transforms::Image;
use ndarray::Array3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Class vocabulary of the bundled scene (COCO names).
pub const CLASS_NAMES: [&str; 6] = ["person", "bottle", "cup", "potted plant", "tennis racket", "spoon"];

pub fn class_names() -> Vec<String> {
    CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

/// One object placement: normalized center and height fraction.
#[derive(Debug, Clone, Copy)]
pub struct SceneObject {
    pub class_id: u32,
    pub center: (f64, f64),
    pub size: f64,
}

/// The canonical fixture arrangement: six objects ringing the frame center.
pub fn canonical_layout() -> Vec<SceneObject> {
    vec![
        SceneObject { class_id: 1, center: (0.29, 0.38), size: 0.30 }, // bottle
        SceneObject { class_id: 2, center: (0.69, 0.36), size: 0.17 }, // cup
        SceneObject { class_id: 3, center: (0.30, 0.74), size: 0.26 }, // potted plant
        SceneObject { class_id: 4, center: (0.73, 0.70), size: 0.31 }, // tennis racket
        SceneObject { class_id: 5, center: (0.50, 0.22), size: 0.13 }, // spoon
        SceneObject { class_id: 0, center: (0.50, 0.82), size: 0.22 }, // person (framed photo)
    ]
}

/// Canonical layout with jittered positions and sizes; objects drop out
/// with probability `drop_p`.
pub fn jittered_layout(rng: &mut ChaCha8Rng, jitter: f64, drop_p: f64) -> Vec<SceneObject> {
    canonical_layout()
        .into_iter()
        .filter_map(|o| {
            let keep = !rng.random_bool(drop_p);
            let dx: f64 = rng.random_range(-jitter..=jitter);
            let dy: f64 = rng.random_range(-jitter..=jitter);
            let ds: f64 = rng.random_range(0.85..=1.15);
            let obj = SceneObject {
                class_id: o.class_id,
                center: ((o.center.0 + dx).clamp(0.12, 0.88), (o.center.1 + dy).clamp(0.12, 0.88)),
                size: o.size * ds,
            };
            keep.then_some(obj)
        })
        .collect()
}

struct Canvas {
    px: Array3<f64>,
    h: usize,
    w: usize,
}

impl Canvas {
    fn set(&mut self, y: i64, x: i64, rgb: [f64; 3]) {
        if y < 0 || x < 0 || y >= self.h as i64 || x >= self.w as i64 {
            return;
        }
        for c in 0..3 {
            self.px[[y as usize, x as usize, c]] = rgb[c].clamp(0.0, 1.0);
        }
    }

    fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, rgb: [f64; 3]) {
        for y in y0.floor() as i64..y1.ceil() as i64 {
            for x in x0.floor() as i64..x1.ceil() as i64 {
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                if fx >= x0 && fx < x1 && fy >= y0 && fy < y1 {
                    self.set(y, x, rgb);
                }
            }
        }
    }

    fn fill_ellipse(&mut self, cx: f64, cy: f64, rx: f64, ry: f64, rgb: [f64; 3]) {
        for y in (cy - ry).floor() as i64..(cy + ry).ceil() as i64 {
            for x in (cx - rx).floor() as i64..(cx + rx).ceil() as i64 {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                if dx * dx + dy * dy <= 1.0 {
                    self.set(y, x, rgb);
                }
            }
        }
    }

    fn fill_ring(&mut self, cx: f64, cy: f64, rx: f64, ry: f64, thickness: f64, rgb: [f64; 3]) {
        for y in (cy - ry).floor() as i64..(cy + ry).ceil() as i64 {
            for x in (cx - rx).floor() as i64..(cx + rx).ceil() as i64 {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                let outer = dx * dx + dy * dy <= 1.0;
                let irx = (rx - thickness).max(1.0);
                let iry = (ry - thickness).max(1.0);
                let dxi = (x as f64 + 0.5 - cx) / irx;
                let dyi = (y as f64 + 0.5 - cy) / iry;
                if outer && dxi * dxi + dyi * dyi > 1.0 {
                    self.set(y, x, rgb);
                }
            }
        }
    }
}

/// Deterministic per-pixel hash noise in [-1, 1].
fn hash_noise(x: u64, y: u64, seed: u64) -> f64 {
    let mut h = x.wrapping_mul(0x9E3779B97F4A7C15) ^ y.wrapping_mul(0xC2B2AE3D27D4EB4F) ^ seed;
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58476D1CE4E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D049BB133111EB);
    h ^= h >> 31;
    (h as f64 / u64::MAX as f64) * 2.0 - 1.0
}

fn draw_background(c: &mut Canvas, seed: u64) {
    let desk_y = 0.70 * c.h as f64;
    for y in 0..c.h {
        for x in 0..c.w {
            let n = 0.012 * hash_noise(x as u64, y as u64, seed);
            let rgb = if (y as f64) < desk_y {
                // Wall: warm gray, slightly brighter toward the top.
                let t = 1.0 - y as f64 / desk_y;
                [0.60 + 0.05 * t + n, 0.585 + 0.05 * t + n, 0.555 + 0.045 * t + n]
            } else {
                // Desk: wood tone with faint horizontal grain.
                let grain = 0.018 * ((y as f64 * 0.9).sin() * 0.5 + hash_noise(0, y as u64, seed) * 0.5);
                [0.47 + grain + n, 0.37 + grain + n, 0.255 + grain * 0.6 + n]
            };
            c.set(y as i64, x as i64, rgb);
        }
    }
}

fn draw_bottle(c: &mut Canvas, cx: f64, cy: f64, h: f64) -> BBox {
    let w = 0.34 * h;
    let (x0, y0) = (cx - w / 2.0, cy - h / 2.0);
    let body_top = y0 + 0.32 * h;
    // Body, label band, neck, cap.
    c.fill_rect(x0, body_top, x0 + w, y0 + h, [0.07, 0.27, 0.14]);
    c.fill_rect(x0 + 0.08 * w, body_top + 0.25 * h, x0 + 0.92 * w, body_top + 0.45 * h, [0.44, 0.41, 0.34]);
    let neck_w = 0.38 * w;
    c.fill_rect(cx - neck_w / 2.0, y0 + 0.08 * h, cx + neck_w / 2.0, body_top + 1.0, [0.10, 0.31, 0.17]);
    c.fill_rect(cx - neck_w * 0.7, y0, cx + neck_w * 0.7, y0 + 0.08 * h, [0.12, 0.12, 0.13]);
    // Specular stripe on the body.
    c.fill_rect(x0 + 0.15 * w, body_top + 0.02 * h, x0 + 0.25 * w, y0 + 0.96 * h, [0.15, 0.38, 0.22]);
    BBox::new(x0, y0, x0 + w, y0 + h).unwrap()
}

fn draw_cup(c: &mut Canvas, cx: f64, cy: f64, h: f64) -> BBox {
    let body_w = 0.78 * h;
    let handle_w = 0.30 * h;
    let (x0, y0) = (cx - (body_w + handle_w) / 2.0, cy - h / 2.0);
    let bx1 = x0 + body_w;
    c.fill_rect(x0, y0, bx1, y0 + h, [0.44, 0.10, 0.08]);
    // Rim shadow and inner hint.
    c.fill_rect(x0, y0, bx1, y0 + 0.14 * h, [0.30, 0.06, 0.05]);
    // Handle: half-ring to the right.
    c.fill_ring(bx1, cy, handle_w, 0.32 * h, 0.10 * h, [0.40, 0.09, 0.075]);
    BBox::new(x0, y0, bx1 + handle_w, y0 + h).unwrap()
}

fn draw_plant(c: &mut Canvas, cx: f64, cy: f64, h: f64) -> BBox {
    let w = 0.72 * h;
    let (x0, y0) = (cx - w / 2.0, cy - h / 2.0);
    // Vase: tapering pot in the lower 40%.
    let pot_top = y0 + 0.60 * h;
    for (i, shrink) in [0.0, 0.06, 0.12, 0.18].iter().enumerate() {
        let yy0 = pot_top + (i as f64) * 0.10 * h;
        c.fill_rect(x0 + shrink * w, yy0, x0 + (1.0 - shrink) * w, yy0 + 0.10 * h + 1.0, [0.43, 0.19, 0.09]);
    }
    // Foliage: overlapping dark-green lobes.
    let fol_cy = y0 + 0.30 * h;
    c.fill_ellipse(cx, fol_cy, 0.46 * w, 0.30 * h, [0.07, 0.27, 0.09]);
    c.fill_ellipse(cx - 0.28 * w, fol_cy + 0.08 * h, 0.26 * w, 0.18 * h, [0.09, 0.31, 0.11]);
    c.fill_ellipse(cx + 0.28 * w, fol_cy + 0.06 * h, 0.26 * w, 0.20 * h, [0.06, 0.24, 0.08]);
    c.fill_ellipse(cx, fol_cy - 0.14 * h, 0.24 * w, 0.14 * h, [0.11, 0.34, 0.12]);
    // Stem.
    c.fill_rect(cx - 0.03 * w, fol_cy + 0.1 * h, cx + 0.03 * w, pot_top + 1.0, [0.16, 0.22, 0.08]);
    BBox::new(x0, y0, x0 + w, y0 + h).unwrap()
}

fn draw_racket(c: &mut Canvas, cx: f64, cy: f64, h: f64) -> BBox {
    let head_ry = 0.34 * h;
    let head_rx = 0.27 * h;
    let head_cy = cy - h / 2.0 + head_ry;
    // String bed, grid, frame.
    c.fill_ellipse(cx, head_cy, head_rx - 1.0, head_ry - 1.0, [0.52, 0.52, 0.47]);
    let step = (h / 14.0).max(2.0);
    let mut gx = cx - head_rx;
    while gx <= cx + head_rx {
        for y in (head_cy - head_ry) as i64..(head_cy + head_ry) as i64 {
            let dx = (gx - cx) / (head_rx - 2.0);
            let dy = (y as f64 + 0.5 - head_cy) / (head_ry - 2.0);
            if dx * dx + dy * dy <= 1.0 {
                c.set(y, gx as i64, [0.33, 0.33, 0.30]);
            }
        }
        gx += step;
    }
    let mut gy = head_cy - head_ry;
    while gy <= head_cy + head_ry {
        for x in (cx - head_rx) as i64..(cx + head_rx) as i64 {
            let dx = (x as f64 + 0.5 - cx) / (head_rx - 2.0);
            let dy = (gy - head_cy) / (head_ry - 2.0);
            if dx * dx + dy * dy <= 1.0 {
                c.set(gy as i64, x, [0.33, 0.33, 0.30]);
            }
        }
        gy += step;
    }
    c.fill_ring(cx, head_cy, head_rx, head_ry, (0.045 * h).max(2.0), [0.10, 0.10, 0.12]);
    // Throat and handle.
    let handle_top = head_cy + head_ry - 1.0;
    let handle_w = 0.07 * h;
    c.fill_rect(cx - handle_w, handle_top, cx + handle_w, cy + h / 2.0, [0.23, 0.13, 0.05]);
    BBox::new(cx - head_rx, cy - h / 2.0, cx + head_rx, cy + h / 2.0).unwrap()
}

fn draw_spoon(c: &mut Canvas, cx: f64, cy: f64, h: f64) -> BBox {
    // Lying horizontally: bowl on the left, thin handle to the right.
    let w = 2.2 * h;
    let (x0, y0) = (cx - w / 2.0, cy - h / 2.0);
    let bowl_rx = 0.42 * h;
    let bowl_cx = x0 + bowl_rx;
    c.fill_ellipse(bowl_cx, cy, bowl_rx, 0.5 * h, [0.33, 0.33, 0.36]);
    c.fill_ellipse(bowl_cx - 0.1 * h, cy - 0.1 * h, 0.16 * h, 0.14 * h, [0.47, 0.47, 0.50]);
    c.fill_rect(bowl_cx + bowl_rx - 1.0, cy - 0.1 * h, x0 + w, cy + 0.1 * h, [0.30, 0.30, 0.33]);
    BBox::new(x0, y0, x0 + w, y0 + h).unwrap()
}

fn draw_person_photo(c: &mut Canvas, cx: f64, cy: f64, h: f64) -> BBox {
    let w = 0.78 * h;
    let (x0, y0) = (cx - w / 2.0, cy - h / 2.0);
    let border = (0.06 * h).max(2.0);
    c.fill_rect(x0, y0, x0 + w, y0 + h, [0.14, 0.11, 0.08]);
    c.fill_rect(x0 + border, y0 + border, x0 + w - border, y0 + h - border, [0.52, 0.54, 0.56]);
    // Head and shoulders portrait.
    let head_r = 0.16 * h;
    let head_cy = y0 + 0.34 * h;
    c.fill_ellipse(cx, head_cy, head_r * 0.85, head_r, [0.52, 0.36, 0.24]);
    // Torso: shirt trapezoid drawn as stacked rects.
    let torso_top = head_cy + head_r * 0.9;
    for i in 0..4 {
        let t = i as f64 / 4.0;
        let half = (0.14 + 0.14 * t) * w + 0.08 * w;
        let yy = torso_top + t * (y0 + h - border - torso_top);
        let yy1 = torso_top + (t + 0.25) * (y0 + h - border - torso_top);
        c.fill_rect((cx - half).max(x0 + border), yy, (cx + half).min(x0 + w - border), yy1, [0.12, 0.16, 0.34]);
    }
    BBox::new(x0, y0, x0 + w, y0 + h).unwrap()
}

/// Renders a layout onto the background; returns the image and one
/// annotation per drawn object. Objects are drawn in layout order.
pub fn render_scene(
    objects: &[SceneObject],
    height: usize,
    width: usize,
    texture_seed: u64,
) -> (Image, Vec<Annotation>) {
    let mut canvas = Canvas { px: Array3::zeros((height, width, 3)), h: height, w: width };
    draw_background(&mut canvas, texture_seed);
    let mut annotations = Vec::with_capacity(objects.len());
    for obj in objects {
        let cx = obj.center.0 * width as f64;
        let cy = obj.center.1 * height as f64;
        let size = obj.size * height as f64;
        let bbox = match obj.class_id {
            0 => draw_person_photo(&mut canvas, cx, cy, size),
            1 => draw_bottle(&mut canvas, cx, cy, size),
            2 => draw_cup(&mut canvas, cx, cy, size),
            3 => draw_plant(&mut canvas, cx, cy, size),
            4 => draw_racket(&mut canvas, cx, cy, size),
            5 => draw_spoon(&mut canvas, cx, cy, size),
            other => panic!("unknown scene class id {other}"),
        };
        // Clamp the annotation to the frame.
        let clamped = BBox::new(
            bbox.x1.max(0.0),
            bbox.y1.max(0.0),
            bbox.x2.min(width as f64),
            bbox.y2.min(height as f64),
        );
        if let Ok(b) = clamped {
            annotations.push(Annotation { bbox: b, class_id: obj.class_id });
        }
    }
    (Image::new(canvas.px).expect("canvas values clamped"), annotations)
}

/// The canonical 256x256 fixture scene with its annotations.
pub fn canonical_scene() -> (Image, Vec<Annotation>) {
    render_scene(&canonical_layout(), 256, 256, 0xDE5C)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_scene_has_six_annotations() {
        let (img, anns) = canonical_scene();
        assert_eq!(img.height(), 256);
        assert_eq!(img.width(), 256);
        assert_eq!(anns.len(), 6);
        let classes: std::collections::BTreeSet<u32> = anns.iter().map(|a| a.class_id).collect();
        assert_eq!(classes.len(), 6, "one object per class");
        for a in &anns {
            assert!(a.bbox.x1 >= 0.0 && a.bbox.x2 <= 256.0);
            assert!(a.bbox.y1 >= 0.0 && a.bbox.y2 <= 256.0);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let (a, _) = canonical_scene();
        let (b, _) = canonical_scene();
        assert_eq!(a, b);
    }

    #[test]
    fn jitter_respects_drop_probability() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let all: usize = (0..200).map(|_| jittered_layout(&mut rng, 0.08, 0.15).len()).sum();
        // Expected about 0.85 * 6 * 200 = 1020 objects.
        assert!((900..1140).contains(&all), "kept {all}");
    }
}
