//! 8-bit PNG image and patch round-trips.
//!
//! Channel values map to bytes by `round(v * 255)`; patches are stored as
//! PNG plus a JSON metadata sidecar (same stem, `.json` extension) so the
//! metadata survives image-tool round-trips. Saving snaps patch pixels to
//! the 8-bit grid first, making save-then-load reproduce the in-memory
//! value exactly.

use super::IoError;
use crate::transforms::{Image, Patch, PatchKind, TrainingMeta};
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Patch metadata sidecar schema.
pub const SIDECAR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchSidecar {
    pub schema_version: u32,
    pub kind: PatchKind,
    pub detector_id: String,
    pub training_meta: TrainingMeta,
}

pub fn load_image(path: &Path) -> Result<Image, IoError> {
    let dynamic = image::open(path).map_err(|e| IoError::ImageError {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let rgb = dynamic.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut pixels = Array3::zeros((h, w, 3));
    for (x, y, px) in rgb.enumerate_pixels() {
        for c in 0..3 {
            pixels[[y as usize, x as usize, c]] = px.0[c] as f64 / 255.0;
        }
    }
    Image::new(pixels).map_err(|e| IoError::parse(path, e))
}

pub fn save_image(image: &Image, path: &Path) -> Result<(), IoError> {
    let (h, w) = (image.height(), image.width());
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let p = image.get(y, x);
            buf.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([
                    (p[0] * 255.0).round() as u8,
                    (p[1] * 255.0).round() as u8,
                    (p[2] * 255.0).round() as u8,
                ]),
            );
        }
    }
    buf.save(path).map_err(|e| IoError::ImageError {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn sidecar_path(png_path: &Path) -> std::path::PathBuf {
    png_path.with_extension("json")
}

/// Saves a patch as PNG plus sidecar. The stored pixels are the patch
/// pixels snapped to the 8-bit grid.
pub fn save_patch(patch: &Patch, png_path: &Path) -> Result<(), IoError> {
    let mut snapped = patch.clone();
    snapped.snap_to_8bit();
    let img = Image::new(snapped.pixels().clone()).map_err(|e| IoError::parse(png_path, e))?;
    save_image(&img, png_path)?;
    let sidecar = PatchSidecar {
        schema_version: SIDECAR_SCHEMA_VERSION,
        kind: snapped.kind,
        detector_id: snapped.detector_id.clone(),
        training_meta: snapped.training_meta.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| IoError::parse(png_path, e))?;
    let sp = sidecar_path(png_path);
    std::fs::write(&sp, json).map_err(|e| IoError::file(&sp, e))?;
    Ok(())
}

pub fn load_patch(png_path: &Path) -> Result<Patch, IoError> {
    let img = load_image(png_path)?;
    let sp = sidecar_path(png_path);
    let raw = std::fs::read_to_string(&sp).map_err(|e| IoError::file(&sp, e))?;
    let sidecar: PatchSidecar =
        serde_json::from_str(&raw).map_err(|e| IoError::parse(&sp, e))?;
    if sidecar.schema_version != SIDECAR_SCHEMA_VERSION {
        return Err(IoError::parse(
            &sp,
            format!("sidecar schema {} unsupported", sidecar.schema_version),
        ));
    }
    Patch::new(img.pixels().clone(), sidecar.kind, sidecar.detector_id, sidecar.training_meta)
        .map_err(|e| IoError::parse(png_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchgen::make_control_patch;

    #[test]
    fn image_round_trip_is_exact_on_8bit_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img = Image::from_fn(9, 7, |y, x| {
            [((y * 7 + x) % 256) as f64 / 255.0, ((x * 13) % 256) as f64 / 255.0, 0.5]
        });
        // 0.5 is not representable; the stored value is round(0.5*255)/255.
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        for y in 0..9 {
            for x in 0..7 {
                for c in 0..3 {
                    let want = (img.pixels()[[y, x, c]] * 255.0).round() / 255.0;
                    assert!((back.pixels()[[y, x, c]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn patch_round_trip_reproduces_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patch.png");
        let patch = make_control_patch(16, 3).unwrap();
        save_patch(&patch, &path).unwrap();
        let back = load_patch(&path).unwrap();
        assert_eq!(back.pixels(), patch.pixels());
        assert_eq!(back.kind, patch.kind);
        assert_eq!(back.detector_id, patch.detector_id);
        assert_eq!(back.training_meta, patch.training_meta);
    }

    #[test]
    fn missing_sidecar_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patch.png");
        let patch = make_control_patch(16, 3).unwrap();
        let img = Image::new(patch.pixels().clone()).unwrap();
        save_image(&img, &path).unwrap();
        assert!(load_patch(&path).is_err());
    }
}
