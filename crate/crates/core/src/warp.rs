//! View synthesis by inverse warping, with analytic derivatives and
//! principled validity masks.
//!
//! Pixel `(i, j)` of the target frame is lifted with its depth, moved by the
//! ego-motion, projected into the source frame at continuous coordinates
//! `(u, v)`, and filled by bilinear sampling of the source image.

use nalgebra::{Matrix3x6, RowVector3, Vector2, Vector3};
use rayon::prelude::*;

use crate::camera::{DepthMap, Intrinsics, Z_MIN};
use crate::error::{Error, Result};
pub use crate::image::{Image, Mask};
use crate::se3::{Motion, Pose, PoseVector};

/// Slack, in pixels, on the in-bounds test. Coordinates that land on the
/// last row or column up to rounding count as inside.
pub const BOUNDS_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct WarpResult {
    /// Reconstructed target frame; zero where the mask is off.
    pub image: Image,
    pub mask: Mask,
    /// Source coordinates per pixel; NaN where the depth is invalid or the
    /// moved point is behind the camera.
    pub coords: Vec<Vector2<f64>>,
    /// `d image[(j*w+i)*c + ch] / d depth(i, j)`.
    pub d_depth: Vec<f64>,
    /// `d image[(j*w+i)*c + ch] / d pose_vector`.
    pub d_pose: Vec<[f64; 6]>,
}

/// Reconstructs the target frame from `source` using `T(pose)`.
pub fn warp(
    source: &Image,
    depth: &DepthMap,
    pose: &PoseVector,
    k: &Intrinsics,
) -> Result<WarpResult> {
    warp_with(source, depth, &Motion::forward(pose)?, k)
}

/// Same as [`warp`] with `T(pose)^-1`; derivatives are still with respect to
/// `pose`. This is the reverse direction of a frame pair.
pub fn warp_inverse(
    source: &Image,
    depth: &DepthMap,
    pose: &PoseVector,
    k: &Intrinsics,
) -> Result<WarpResult> {
    warp_with(source, depth, &Motion::inverse(pose)?, k)
}

/// 1 where the warped coordinate falls inside the source image, the moved
/// point is in front of the camera, and the depth is valid.
pub fn principled_mask(depth: &DepthMap, pose: &Pose, k: &Intrinsics) -> Result<Mask> {
    k.check_dims("depth map", depth.dims())?;
    let (w, h) = k.dims();
    let data = (0..h * w)
        .map(|idx| {
            let (i, j) = (idx % w, idx / w);
            depth
                .get(i, j)
                .and_then(|d| source_coords(pose.apply(&(d * k.ray(i as f64, j as f64))), k))
                .is_some_and(|uv| in_bounds(&uv, w, h))
        })
        .collect();
    Mask::new(w, h, data)
}

#[inline]
fn source_coords(q: Vector3<f64>, k: &Intrinsics) -> Option<Vector2<f64>> {
    if q.z > Z_MIN {
        k.project_point(&q)
    } else {
        None
    }
}

#[inline]
pub(crate) fn in_bounds(uv: &Vector2<f64>, w: usize, h: usize) -> bool {
    uv.x >= -BOUNDS_EPS
        && uv.x <= (w - 1) as f64 + BOUNDS_EPS
        && uv.y >= -BOUNDS_EPS
        && uv.y <= (h - 1) as f64 + BOUNDS_EPS
}

/// Lower corner of the bilinear cell containing `u` and the fractional offset.
/// Integer coordinates use the cell on their left (or above), except 0.
/// Coordinates within `BOUNDS_EPS` of an integer are snapped to it, so a
/// pixel-aligned warp samples source values exactly.
#[inline]
pub(crate) fn cell(u: f64, n: usize) -> (usize, f64) {
    let u = u.clamp(0.0, (n - 1) as f64);
    let r = u.round();
    let u = if (u - r).abs() <= BOUNDS_EPS { r } else { u };
    let x0 = (u.ceil() as isize - 1).clamp(0, n as isize - 2) as usize;
    (x0, u - x0 as f64)
}

struct PixelOut {
    valid: bool,
    coords: Vector2<f64>,
    values: [f64; 3],
    d_depth: [f64; 3],
    d_pose: [[f64; 6]; 3],
}

pub fn warp_with(
    source: &Image,
    depth: &DepthMap,
    motion: &Motion,
    k: &Intrinsics,
) -> Result<WarpResult> {
    k.check_dims("source image", source.dims())?;
    k.check_dims("depth map", depth.dims())?;
    let (w, h) = k.dims();
    let ch = source.channels();
    let rot = motion.pose().rotation;

    let pixel = |i: usize, j: usize| -> PixelOut {
        let mut out = PixelOut {
            valid: false,
            coords: Vector2::new(f64::NAN, f64::NAN),
            values: [0.0; 3],
            d_depth: [0.0; 3],
            d_pose: [[0.0; 6]; 3],
        };
        let Some(d) = depth.get(i, j) else {
            return out;
        };
        let ray = k.ray(i as f64, j as f64);
        let (q, dq_dpose): (Vector3<f64>, Matrix3x6<f64>) = motion.apply_with_jacobian(&(d * ray));
        let Some(uv) = source_coords(q, k) else {
            return out;
        };
        out.coords = uv;
        if !in_bounds(&uv, w, h) {
            return out;
        }
        out.valid = true;

        let (x0, a) = cell(uv.x, w);
        let (y0, b) = cell(uv.y, h);
        let iz = 1.0 / q.z;
        let du_dq = RowVector3::new(k.fx * iz, 0.0, -k.fx * q.x * iz * iz);
        let dv_dq = RowVector3::new(0.0, k.fy * iz, -k.fy * q.y * iz * iz);
        let dq_dd = rot * ray;
        let du_dd = du_dq.dot(&dq_dd.transpose());
        let dv_dd = dv_dq.dot(&dq_dd.transpose());
        let du_dp = du_dq * dq_dpose;
        let dv_dp = dv_dq * dq_dpose;

        for c in 0..ch {
            let s00 = source.get(x0, y0, c);
            let s10 = source.get(x0 + 1, y0, c);
            let s01 = source.get(x0, y0 + 1, c);
            let s11 = source.get(x0 + 1, y0 + 1, c);
            let top = (1.0 - a) * s00 + a * s10;
            let bottom = (1.0 - a) * s01 + a * s11;
            out.values[c] = (1.0 - b) * top + b * bottom;
            let dx_du = (1.0 - b) * (s10 - s00) + b * (s11 - s01);
            let dx_dv = (1.0 - a) * (s01 - s00) + a * (s11 - s10);
            out.d_depth[c] = dx_du * du_dd + dx_dv * dv_dd;
            for p in 0..6 {
                out.d_pose[c][p] = dx_du * du_dp[p] + dx_dv * dv_dp[p];
            }
        }
        out
    };

    let rows: Vec<Vec<PixelOut>> = (0..h)
        .into_par_iter()
        .map(|j| (0..w).map(|i| pixel(i, j)).collect())
        .collect();

    let mut data = Vec::with_capacity(w * h * ch);
    let mut mask = Vec::with_capacity(w * h);
    let mut coords = Vec::with_capacity(w * h);
    let mut d_depth = Vec::with_capacity(w * h * ch);
    let mut d_pose = Vec::with_capacity(w * h * ch);
    for px in rows.into_iter().flatten() {
        mask.push(px.valid);
        coords.push(px.coords);
        data.extend_from_slice(&px.values[..ch]);
        d_depth.extend_from_slice(&px.d_depth[..ch]);
        d_pose.extend_from_slice(&px.d_pose[..ch]);
    }

    Ok(WarpResult {
        image: Image::from_raw(w, h, ch, data),
        mask: Mask::new(w, h, mask)?,
        coords,
        d_depth,
        d_pose,
    })
}

/// Checks that two images share a grid, for the loss functions.
pub(crate) fn check_same_shape(what: &'static str, a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dims(what, b.dims(), a.dims()));
    }
    if a.channels() != b.channels() {
        return Err(Error::InvalidParameter(format!(
            "{what}: {} channels vs {}",
            b.channels(),
            a.channels()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_image(w: usize, h: usize, ch: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<[f64; 4]> = (0..4)
            .map(|_| {
                [
                    rng.random_range(0.1..0.6),
                    rng.random_range(0.1..0.6),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.02..0.1),
                ]
            })
            .collect();
        Image::from_fn(w, h, ch, |i, j, c| {
            0.5 + params
                .iter()
                .map(|[fu, fv, ph, a]| a * (fu * i as f64 + fv * j as f64 + ph + c as f64).sin())
                .sum::<f64>()
        })
        .unwrap()
    }

    #[test]
    fn identity_pose_reproduces_source() {
        let k = Intrinsics::new(20.0, 22.0, 7.3, 8.1, 16, 16).unwrap();
        let src = smooth_image(16, 16, 3, 1);
        let depth =
            DepthMap::from_fn(16, 16, |i, j| 2.0 + 0.1 * i as f64 + 0.05 * j as f64).unwrap();
        let res = warp(&src, &depth, &PoseVector::zero(), &k).unwrap();
        assert_eq!(res.mask.count(), 256);
        assert_eq!(res.image.data(), src.data());
    }

    #[test]
    fn lateral_translation_shifts_columns() {
        let (w, h) = (24, 12);
        let k = Intrinsics::new(30.0, 30.0, 11.5, 5.5, w, h).unwrap();
        let d = 3.0;
        let tx = 0.137;
        let shift = k.fx * tx / d;
        let src = smooth_image(w, h, 1, 2);
        let depth = DepthMap::constant(w, h, d).unwrap();
        let res = warp(&src, &depth, &PoseVector([0.0, 0.0, 0.0, tx, 0.0, 0.0]), &k).unwrap();
        for j in 0..h {
            for i in 0..w {
                let uv = res.coords[j * w + i];
                assert!((uv.x - (i as f64 + shift)).abs() < 1e-9);
                assert!((uv.y - j as f64).abs() < 1e-9);
                let inside = (i as f64 + shift) <= (w - 1) as f64;
                assert_eq!(res.mask.get(i, j), inside);
                if inside {
                    // independent 1-D linear interpolation along the row
                    let u = i as f64 + shift;
                    let x0 = u.floor() as usize;
                    let f = u - x0 as f64;
                    let x1 = (x0 + 1).min(w - 1);
                    let want = (1.0 - f) * src.get(x0, j, 0) + f * src.get(x1, j, 0);
                    assert!((res.image.get(i, j, 0) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn masked_pixels_have_zero_derivatives() {
        let k = Intrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let src = smooth_image(16, 16, 1, 3);
        let depth = DepthMap::constant(16, 16, 2.0).unwrap();
        let v = PoseVector([0.02, -0.01, 0.03, 0.3, 0.1, 0.2]);
        let res = warp(&src, &depth, &v, &k).unwrap();
        assert!(res.mask.count() < 256);
        for idx in 0..256 {
            if !res.mask.data()[idx] {
                assert_eq!(res.image.data()[idx], 0.0);
                assert_eq!(res.d_depth[idx], 0.0);
                assert_eq!(res.d_pose[idx], [0.0; 6]);
            }
        }
    }

    #[test]
    fn far_translation_empties_the_mask() {
        let k = Intrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let depth = DepthMap::constant(16, 16, 2.0).unwrap();
        let pose = Pose::from_translation(Vector3::new(50.0, 0.0, 0.0));
        assert_eq!(principled_mask(&depth, &pose, &k).unwrap().count(), 0);
        let behind = Pose::from_translation(Vector3::new(0.0, 0.0, -5.0));
        assert_eq!(principled_mask(&depth, &behind, &k).unwrap().count(), 0);
        assert_eq!(
            principled_mask(&depth, &Pose::identity(), &k)
                .unwrap()
                .count(),
            256
        );
    }

    #[test]
    fn invalid_depth_is_masked() {
        let k = Intrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let mut values = vec![2.0; 256];
        values[17] = 0.0;
        let depth = DepthMap::from_values(16, 16, values).unwrap();
        let m = principled_mask(&depth, &Pose::identity(), &k).unwrap();
        assert!(!m.data()[17]);
        assert_eq!(m.count(), 255);
    }

    #[test]
    fn cell_convention() {
        assert_eq!(cell(0.0, 5), (0, 0.0));
        assert_eq!(cell(2.0, 5), (1, 1.0));
        assert_eq!(cell(4.0, 5), (3, 1.0));
        let (x0, f) = cell(2.25, 5);
        assert_eq!(x0, 2);
        assert!((f - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let k = Intrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let src = smooth_image(16, 8, 1, 3);
        let depth = DepthMap::constant(16, 16, 2.0).unwrap();
        assert!(matches!(
            warp(&src, &depth, &PoseVector::zero(), &k),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
