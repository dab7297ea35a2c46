//! Spatial box blur with reflected borders.

use super::{image_from_unchecked, Image};
use ndarray::Array3;

/// Reflects an out-of-range index into `[0, n)` (symmetric, edge repeated:
/// -1 -> 0, -2 -> 1, n -> n-1). Handles kernels larger than the image by
/// folding repeatedly.
fn reflect(mut i: i64, n: i64) -> usize {
    let period = 2 * n;
    i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Box blur with a square kernel of side `size` (even sizes round up to the
/// next odd). `size` 0 or 1 is the identity. Borders reflect.
pub fn low_pass(image: &Image, size: u32) -> Image {
    if size <= 1 {
        return image.clone();
    }
    let k = if size % 2 == 0 { size + 1 } else { size } as i64;
    let r = k / 2;
    let (h, w) = (image.height() as i64, image.width() as i64);
    let src = image.pixels();

    // Separable pass: rows, then columns.
    let mut tmp = Array3::<f64>::zeros((h as usize, w as usize, 3));
    for y in 0..h as usize {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for dx in -r..=r {
                let sx = reflect(x + dx, w);
                for c in 0..3 {
                    acc[c] += src[[y, sx, c]];
                }
            }
            for c in 0..3 {
                tmp[[y, x as usize, c]] = acc[c] / k as f64;
            }
        }
    }
    let mut out = Array3::<f64>::zeros((h as usize, w as usize, 3));
    for y in 0..h {
        for x in 0..w as usize {
            let mut acc = [0.0; 3];
            for dy in -r..=r {
                let sy = reflect(y + dy, h);
                for c in 0..3 {
                    acc[c] += tmp[[sy, x, c]];
                }
            }
            for c in 0..3 {
                out[[y as usize, x, c]] = (acc[c] / k as f64).clamp(0.0, 1.0);
            }
        }
    }
    image_from_unchecked(out)
}
