//! Photometric transforms: brightness, contrast, saturation, hue, and the
//! calibrator parameter quadruple.

use super::{image_from_unchecked, Image, TransformError};
use crate::calibration::ColorParams;

/// Rec. 709 relative luminance of an RGB triple.
pub fn luminance(rgb: [f64; 3]) -> f64 {
    0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]
}

/// RGB in `[0,1]` to HSV with hue in degrees `[0, 360)`.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [h.rem_euclid(360.0), s, max]
}

/// HSV (hue in degrees) back to RGB in `[0,1]`.
pub fn hsv_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let h = h.rem_euclid(360.0);
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r1 + m, g1 + m, b1 + m]
}

/// Multiplies every channel by `factor` in display-encoded space.
///
/// With `clip` set the result is clamped to `[0, 1]`, emulating
/// fixed-exposure overexposure: values saturate and structure above the
/// clipping point is destroyed. Without `clip` the multiplied image is kept
/// as-is when it already fits `[0, 1]`; when it would overflow, the whole
/// image is renormalized by its maximum (auto-exposure behavior), which
/// preserves relative structure at any factor.
pub fn adjust_brightness(image: &Image, factor: f64, clip: bool) -> Result<Image, TransformError> {
    if !(factor > 0.0) {
        return Err(TransformError::NonPositiveFactor(factor));
    }
    let scaled = image.pixels().mapv(|v| v * factor);
    let max = scaled.iter().fold(0.0_f64, |m, &v| m.max(v));
    let out = if clip || max <= 1.0 {
        scaled.mapv(|v| v.clamp(0.0, 1.0))
    } else {
        scaled.mapv(|v| (v / max).clamp(0.0, 1.0))
    };
    Ok(image_from_unchecked(out))
}

/// Scales contrast around mid-gray 0.5, clamped to `[0, 1]`.
pub fn adjust_contrast(image: &Image, factor: f64) -> Result<Image, TransformError> {
    if !(factor > 0.0) {
        return Err(TransformError::NonPositiveFactor(factor));
    }
    let out = image.pixels().mapv(|v| ((v - 0.5) * factor + 0.5).clamp(0.0, 1.0));
    Ok(image_from_unchecked(out))
}

/// Mixes each pixel toward its Rec. 709 luminance: 0 produces grayscale,
/// 1 is identity, larger values oversaturate. Clamped to `[0, 1]`.
pub fn adjust_saturation(image: &Image, factor: f64) -> Result<Image, TransformError> {
    if !(factor >= 0.0) {
        return Err(TransformError::NonPositiveFactor(factor));
    }
    let out = Image::from_fn(image.height(), image.width(), |y, x| {
        let rgb = image.get(y, x);
        let luma = luminance(rgb);
        [
            luma + factor * (rgb[0] - luma),
            luma + factor * (rgb[1] - luma),
            luma + factor * (rgb[2] - luma),
        ]
    });
    Ok(out)
}

/// Rotates hue by `degrees` in the HSV cylinder; saturation and value are
/// untouched up to round-trip error.
pub fn shift_hue(image: &Image, degrees: f64) -> Image {
    if degrees.rem_euclid(360.0) == 0.0 {
        return image.clone();
    }
    Image::from_fn(image.height(), image.width(), |y, x| {
        let mut hsv = rgb_to_hsv(image.get(y, x));
        hsv[0] = (hsv[0] + degrees).rem_euclid(360.0);
        hsv_to_rgb(hsv)
    })
}

/// Applies a calibrator parameter quadruple in the fixed order
/// brightness -> contrast -> saturation -> hue, clamping after each stage.
pub fn apply_color_params(image: &Image, cp: &ColorParams) -> Image {
    let mut out = adjust_brightness(image, cp.brightness_factor, true).expect("validated params");
    out = adjust_contrast(&out, cp.contrast_factor).expect("validated params");
    out = adjust_saturation(&out, cp.saturation_factor).expect("validated params");
    shift_hue(&out, cp.hue_shift)
}
