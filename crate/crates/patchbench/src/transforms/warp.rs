//! Patch plane warping under a pinhole camera.
//!
//! The patch is modeled as a textured square plane centered on the optical
//! axis at depth `focal`, rotated by `Rz * Ry * Rx` about its center and
//! projected through a pinhole with the principal point at the frame
//! center. The plane side is chosen so that at zero rotation the projected
//! footprint is an axis-aligned square of side `scale * frame_width`
//! centered at `position`. Resampling is bilinear with no antialiasing;
//! alpha is binary (1 inside the footprint, 0 outside).

use super::{Image, Patch, TransformError, TransformParams, WarpedPatch};
use ndarray::Array3;

/// A 3x3 projective map in row-major order.
#[derive(Debug, Clone, Copy)]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl Homography {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        (
            (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
            (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
        )
    }

    /// Inverse via the adjugate; `None` when singular.
    pub fn inverse(&self) -> Option<Homography> {
        let m = &self.m;
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if det.abs() < 1e-12 {
            return None;
        }
        let inv = [
            [
                (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
            ],
            [
                (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
            ],
            [
                (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
            ],
        ];
        Some(Homography { m: inv })
    }
}

fn rotation_matrix(rx_deg: f64, ry_deg: f64, rz_deg: f64) -> [[f64; 3]; 3] {
    let (sx, cx) = rx_deg.to_radians().sin_cos();
    let (sy, cy) = ry_deg.to_radians().sin_cos();
    let (sz, cz) = rz_deg.to_radians().sin_cos();
    // R = Rz * Ry * Rx with x right, y down, z toward the scene.
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// Builds the homography taking patch texture coordinates `(u, v)` in
/// `[0, P]^2` to frame pixel coordinates `(x, y)`.
pub fn patch_homography(
    patch_side: usize,
    params: &TransformParams,
    frame: (usize, usize),
) -> Result<Homography, TransformError> {
    params.validate()?;
    let (frame_h, frame_w) = frame;
    let (rx, ry, rz) = params.rotation;
    if rx.abs() >= 90.0 || ry.abs() >= 90.0 {
        return Err(TransformError::DegenerateWarp { rx, ry });
    }
    let focal = params.focal.unwrap_or(frame_w as f64);
    let side = params.scale * frame_w as f64;
    let p = patch_side as f64;
    let r = rotation_matrix(rx, ry, rz);
    // Plane basis columns scaled from texture to metric units, plane center
    // translated so its projection lands at `position`.
    let s = side / p;
    let tx = (params.position.0 - 0.5) * frame_w as f64;
    let ty = (params.position.1 - 0.5) * frame_h as f64;
    // 3D point: R * ((u - P/2) * s, (v - P/2) * s, 0) + (tx, ty, focal)
    let col0 = [r[0][0] * s, r[1][0] * s, r[2][0] * s];
    let col1 = [r[0][1] * s, r[1][1] * s, r[2][1] * s];
    let half = p / 2.0;
    let col2 = [
        tx - (col0[0] + col1[0]) * half,
        ty - (col0[1] + col1[1]) * half,
        focal - (col0[2] + col1[2]) * half,
    ];
    // Pinhole projection with the principal point at the frame center.
    let (pcx, pcy) = (frame_w as f64 / 2.0, frame_h as f64 / 2.0);
    let mut m = [[0.0; 3]; 3];
    for (j, col) in [col0, col1, col2].iter().enumerate() {
        m[0][j] = focal * col[0] + pcx * col[2];
        m[1][j] = focal * col[1] + pcy * col[2];
        m[2][j] = col[2];
    }
    Ok(Homography { m })
}

/// One bilinear sample: output pixel `(y, x)` reads four patch texels with
/// the given weights. Used to push gradients back through the warp.
#[derive(Debug, Clone, Copy)]
pub struct SampleTap {
    pub out_y: u32,
    pub out_x: u32,
    /// Texel row/col of the top-left tap.
    pub ty: u32,
    pub tx: u32,
    /// Fractional offsets toward the bottom/right taps.
    pub fy: f64,
    pub fx: f64,
}

fn project_corners(h: &Homography, patch_side: usize) -> Result<[(f64, f64); 4], TransformError> {
    let p = patch_side as f64;
    let corners = [(0.0, 0.0), (p, 0.0), (p, p), (0.0, p)];
    let mut out = [(0.0, 0.0); 4];
    for (i, &(u, v)) in corners.iter().enumerate() {
        let wz = h.m[2][0] * u + h.m[2][1] * v + h.m[2][2];
        if wz <= 1e-9 {
            // Corner at or behind the camera plane.
            return Err(TransformError::DegenerateWarp { rx: f64::NAN, ry: f64::NAN });
        }
        out[i] = h.apply(u, v);
    }
    Ok(out)
}

/// Warps a patch into a target frame. See the module docs for the camera
/// model. Fails with `DegenerateWarp` for edge-on planes and `OutOfFrame`
/// when the projected footprint misses the frame entirely.
pub fn warp_patch(
    patch: &Patch,
    params: &TransformParams,
    frame: (usize, usize),
) -> Result<WarpedPatch, TransformError> {
    Ok(warp_patch_traced(patch, params, frame, false)?.0)
}

/// Like [`warp_patch`] but optionally records every bilinear sample so the
/// warp can be transposed during gradient computation.
pub fn warp_patch_traced(
    patch: &Patch,
    params: &TransformParams,
    frame: (usize, usize),
    record_taps: bool,
) -> Result<(WarpedPatch, Vec<SampleTap>), TransformError> {
    let (frame_h, frame_w) = frame;
    let hg = patch_homography(patch.side(), params, frame)?;
    let footprint = project_corners(&hg, patch.side())?;
    let inv = hg
        .inverse()
        .ok_or(TransformError::DegenerateWarp { rx: params.rotation.0, ry: params.rotation.1 })?;

    let xs = footprint.iter().map(|p| p.0);
    let ys = footprint.iter().map(|p| p.1);
    let x0 = xs.clone().fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let y0 = ys.clone().fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let x1 = xs.fold(f64::NEG_INFINITY, f64::max).ceil().min(frame_w as f64) as usize;
    let y1 = ys.fold(f64::NEG_INFINITY, f64::max).ceil().min(frame_h as f64) as usize;
    if x0 >= x1 || y0 >= y1 {
        return Err(TransformError::OutOfFrame { height: frame_h, width: frame_w });
    }

    let p = patch.side() as f64;
    let side_px = patch.side();
    let mut rgba = Array3::zeros((frame_h, frame_w, 4));
    let mut taps = Vec::new();
    let mut covered = false;
    for y in y0..y1 {
        for x in x0..x1 {
            // Sample at the pixel center.
            let (u, v) = inv.apply(x as f64 + 0.5, y as f64 + 0.5);
            if !(0.0..=p).contains(&u) || !(0.0..=p).contains(&v) {
                continue;
            }
            covered = true;
            // Texel centers sit at integer + 0.5.
            let su = (u - 0.5).clamp(0.0, p - 1.0);
            let sv = (v - 0.5).clamp(0.0, p - 1.0);
            let tx = (su.floor() as usize).min(side_px - 1);
            let ty = (sv.floor() as usize).min(side_px - 1);
            let fx = su - tx as f64;
            let fy = sv - ty as f64;
            let tx1 = (tx + 1).min(side_px - 1);
            let ty1 = (ty + 1).min(side_px - 1);
            for c in 0..3 {
                let top = patch.pixels()[[ty, tx, c]] * (1.0 - fx) + patch.pixels()[[ty, tx1, c]] * fx;
                let bot = patch.pixels()[[ty1, tx, c]] * (1.0 - fx) + patch.pixels()[[ty1, tx1, c]] * fx;
                rgba[[y, x, c]] = (top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0);
            }
            rgba[[y, x, 3]] = 1.0;
            if record_taps {
                taps.push(SampleTap {
                    out_y: y as u32,
                    out_x: x as u32,
                    ty: ty as u32,
                    tx: tx as u32,
                    fy,
                    fx,
                });
            }
        }
    }
    if !covered {
        return Err(TransformError::OutOfFrame { height: frame_h, width: frame_w });
    }
    Ok((WarpedPatch { rgba, footprint }, taps))
}

/// Accumulates a frame-space gradient back onto patch texels through the
/// recorded bilinear taps (the transpose of the warp's sampling).
pub fn accumulate_patch_grad(
    taps: &[SampleTap],
    frame_grad: &Array3<f64>,
    patch_side: usize,
    patch_grad: &mut Array3<f64>,
) {
    let last = patch_side - 1;
    for t in taps {
        let (y, x) = (t.out_y as usize, t.out_x as usize);
        let (ty, tx) = (t.ty as usize, t.tx as usize);
        let (ty1, tx1) = ((ty + 1).min(last), (tx + 1).min(last));
        for c in 0..3 {
            let g = frame_grad[[y, x, c]];
            if g == 0.0 {
                continue;
            }
            patch_grad[[ty, tx, c]] += g * (1.0 - t.fy) * (1.0 - t.fx);
            patch_grad[[ty, tx1, c]] += g * (1.0 - t.fy) * t.fx;
            patch_grad[[ty1, tx, c]] += g * t.fy * (1.0 - t.fx);
            patch_grad[[ty1, tx1, c]] += g * t.fy * t.fx;
        }
    }
}

/// Convenience: the image positions covered by a warped patch (alpha > 0),
/// as a binary mask image.
pub fn footprint_mask(warped: &WarpedPatch) -> Image {
    Image::from_fn(warped.height(), warped.width(), |y, x| {
        let a = if warped.rgba[[y, x, 3]] > 0.0 { 1.0 } else { 0.0 };
        [a, a, a]
    })
}
