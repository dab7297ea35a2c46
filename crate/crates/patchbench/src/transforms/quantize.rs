//! Color quantization by deterministic median cut.
//!
//! Ties break by channel order R, G, B and by bucket index, so the palette
//! is a pure function of the input image. When the image already has at
//! most `k` distinct colors the output is bit-identical to the input.

use super::{image_from_unchecked, Image};
use ndarray::Array3;
use std::collections::BTreeMap;

type ColorKey = [u64; 3];

fn key_of(rgb: [f64; 3]) -> ColorKey {
    [rgb[0].to_bits(), rgb[1].to_bits(), rgb[2].to_bits()]
}

#[derive(Clone)]
struct Bucket {
    /// (color, pixel count) entries, kept sorted lexicographically.
    entries: Vec<([f64; 3], usize)>,
}

impl Bucket {
    fn ranges(&self) -> [f64; 3] {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (c, _) in &self.entries {
            for i in 0..3 {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]]
    }

    /// Widest channel and its range; ties prefer R over G over B.
    fn widest(&self) -> (usize, f64) {
        let r = self.ranges();
        let mut best = 0;
        for i in 1..3 {
            if r[i] > r[best] {
                best = i;
            }
        }
        (best, r[best])
    }

    fn mean(&self) -> [f64; 3] {
        let mut acc = [0.0; 3];
        let mut n = 0usize;
        for (c, count) in &self.entries {
            for i in 0..3 {
                acc[i] += c[i] * *count as f64;
            }
            n += count;
        }
        [acc[0] / n as f64, acc[1] / n as f64, acc[2] / n as f64]
    }
}

/// Reduces an image to at most `k` distinct colors (`k >= 1`): median-cut
/// palette over the color distribution, each pixel mapped to its nearest
/// palette entry in RGB Euclidean distance.
pub fn quantize_colors(image: &Image, k: u32) -> Image {
    let k = k.max(1) as usize;
    // Distinct colors with counts, in deterministic lexicographic order.
    let mut counts: BTreeMap<ColorKey, usize> = BTreeMap::new();
    for y in 0..image.height() {
        for x in 0..image.width() {
            *counts.entry(key_of(image.get(y, x))).or_insert(0) += 1;
        }
    }
    if counts.len() <= k {
        return image.clone();
    }
    let entries: Vec<([f64; 3], usize)> = counts
        .into_iter()
        .map(|(key, n)| ([f64::from_bits(key[0]), f64::from_bits(key[1]), f64::from_bits(key[2])], n))
        .collect();

    let mut buckets = vec![Bucket { entries }];
    while buckets.len() < k {
        // Split the bucket with the widest channel range; ties take the
        // earliest bucket. Stop when nothing is splittable.
        let mut pick: Option<(usize, usize, f64)> = None;
        for (bi, b) in buckets.iter().enumerate() {
            if b.entries.len() < 2 {
                continue;
            }
            let (ch, range) = b.widest();
            let better = match pick {
                None => true,
                Some((_, _, best)) => range > best,
            };
            if better {
                pick = Some((bi, ch, range));
            }
        }
        let Some((bi, ch, _)) = pick else { break };
        let mut entries = std::mem::take(&mut buckets[bi].entries);
        entries.sort_by(|a, b| {
            a.0[ch]
                .partial_cmp(&b.0[ch])
                .unwrap()
                .then_with(|| a.0.partial_cmp(&b.0).unwrap())
        });
        // Split at half the pixel mass, keeping both sides non-empty.
        let total: usize = entries.iter().map(|e| e.1).sum();
        let mut acc = 0usize;
        let mut split = 1;
        for (i, e) in entries.iter().enumerate() {
            acc += e.1;
            if acc * 2 >= total {
                split = (i + 1).min(entries.len() - 1).max(1);
                break;
            }
        }
        let right = entries.split_off(split);
        buckets[bi] = Bucket { entries };
        buckets.insert(bi + 1, Bucket { entries: right });
    }

    let palette: Vec<[f64; 3]> = buckets.iter().map(Bucket::mean).collect();

    // Map each distinct color to its nearest palette entry (ties take the
    // first entry), then rewrite pixels.
    let mut nearest: BTreeMap<ColorKey, [f64; 3]> = BTreeMap::new();
    for b in &buckets {
        for (c, _) in &b.entries {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (pi, p) in palette.iter().enumerate() {
                let d = (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2) + (c[2] - p[2]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = pi;
                }
            }
            nearest.insert(key_of(*c), palette[best]);
        }
    }
    let mut out = Array3::zeros((image.height(), image.width(), 3));
    for y in 0..image.height() {
        for x in 0..image.width() {
            let p = nearest[&key_of(image.get(y, x))];
            for c in 0..3 {
                out[[y, x, c]] = p[c].clamp(0.0, 1.0);
            }
        }
    }
    image_from_unchecked(out)
}
