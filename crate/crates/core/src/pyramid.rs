//! Four-level image/depth pyramids for the multi-scale loss.
//!
//! Each level halves the previous one with 2x2 average pooling. Depth cells
//! average their valid children only; a cell with no valid child is invalid.

use crate::camera::{DepthMap, Intrinsics};
use crate::error::{Error, Result};
use crate::image::Image;

/// Number of levels: full resolution down to 1/8.
pub const LEVELS: usize = 4;

#[derive(Debug, Clone)]
pub struct Level {
    pub image: Image,
    pub depth: DepthMap,
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<Level>,
}

impl Pyramid {
    /// Linear size of level `s` relative to full resolution.
    pub fn scale_factor(s: usize) -> f64 {
        0.5f64.powi(s as i32)
    }
}

pub fn build_pyramid(image: &Image, depth: &DepthMap, k: &Intrinsics) -> Result<Pyramid> {
    build_levels(image, depth, k, LEVELS)
}

/// Like [`build_pyramid`] but with `levels` in `1..=4`.
pub fn build_levels(
    image: &Image,
    depth: &DepthMap,
    k: &Intrinsics,
    levels: usize,
) -> Result<Pyramid> {
    if !(1..=LEVELS).contains(&levels) {
        return Err(Error::InvalidParameter(format!(
            "pyramid levels must be in 1..={LEVELS}, got {levels}"
        )));
    }
    k.check_dims("image", image.dims())?;
    k.check_dims("depth map", depth.dims())?;
    check_divisible(k.width, k.height)?;
    let coarse = (k.width >> (levels - 1), k.height >> (levels - 1));
    if coarse.0 < 2 || coarse.1 < 2 {
        return Err(Error::InvalidParameter(format!(
            "image size {}x{} leaves a {}x{} coarsest level; {levels} levels need at least {}x{}",
            k.width,
            k.height,
            coarse.0,
            coarse.1,
            1 << levels,
            1 << levels
        )));
    }
    let mut out = vec![Level {
        image: image.clone(),
        depth: depth.clone(),
        intrinsics: *k,
    }];
    for s in 1..levels {
        let prev = &out[s - 1];
        out.push(Level {
            image: downsample_image(&prev.image),
            depth: downsample_depth(&prev.depth),
            intrinsics: k.scaled(Pyramid::scale_factor(s))?,
        });
    }
    Ok(Pyramid { levels: out })
}

pub(crate) fn check_divisible(w: usize, h: usize) -> Result<()> {
    if !w.is_multiple_of(8) || !h.is_multiple_of(8) || w == 0 || h == 0 {
        return Err(Error::InvalidParameter(format!(
            "image size {w}x{h} is not divisible by 8"
        )));
    }
    Ok(())
}

pub fn downsample_image(img: &Image) -> Image {
    let (w, h, c) = (img.width() / 2, img.height() / 2, img.channels());
    let mut data = Vec::with_capacity(w * h * c);
    for j in 0..h {
        for i in 0..w {
            for ch in 0..c {
                let s = img.get(2 * i, 2 * j, ch)
                    + img.get(2 * i + 1, 2 * j, ch)
                    + img.get(2 * i, 2 * j + 1, ch)
                    + img.get(2 * i + 1, 2 * j + 1, ch);
                data.push(0.25 * s);
            }
        }
    }
    Image::from_raw(w, h, c, data)
}

fn children(i: usize, j: usize, fine_w: usize) -> [usize; 4] {
    let (x, y) = (2 * i, 2 * j);
    [
        y * fine_w + x,
        y * fine_w + x + 1,
        (y + 1) * fine_w + x,
        (y + 1) * fine_w + x + 1,
    ]
}

pub fn downsample_depth(depth: &DepthMap) -> DepthMap {
    let fw = depth.width();
    let (w, h) = (fw / 2, depth.height() / 2);
    let (vals, ok) = (depth.values(), depth.validity());
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let (sum, n) = children(i, j, fw)
                .iter()
                .filter(|c| ok[**c])
                .fold((0.0, 0usize), |(s, n), c| (s + vals[*c], n + 1));
            values.push(if n > 0 { sum / n as f64 } else { 0.0 });
            valid.push(n > 0);
        }
    }
    DepthMap::with_validity(w, h, values, valid).expect("averages of valid depths are valid")
}

/// Pulls a gradient on a pooled depth map back onto the finer map it was
/// pooled from, adding into `fine_grad`.
pub fn accumulate_depth_gradient(fine: &DepthMap, coarse_grad: &[f64], fine_grad: &mut [f64]) {
    let fw = fine.width();
    let (w, h) = (fw / 2, fine.height() / 2);
    debug_assert_eq!(coarse_grad.len(), w * h);
    let ok = fine.validity();
    for j in 0..h {
        for i in 0..w {
            let g = coarse_grad[j * w + i];
            if g == 0.0 {
                continue;
            }
            let kids = children(i, j, fw);
            let n = kids.iter().filter(|c| ok[**c]).count();
            for c in kids.iter().filter(|c| ok[**c]) {
                fine_grad[*c] += g / n as f64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::backproject;
    use nalgebra::Vector3;

    fn k() -> Intrinsics {
        Intrinsics::new(300.0, 280.0, 207.5, 63.5, 416, 128).unwrap()
    }

    #[test]
    fn level_sizes() {
        let img = Image::constant(416, 128, 3, 0.3).unwrap();
        let d = DepthMap::constant(416, 128, 7.0).unwrap();
        let p = build_pyramid(&img, &d, &k()).unwrap();
        let dims: Vec<_> = p.levels.iter().map(|l| l.image.dims()).collect();
        assert_eq!(dims, vec![(416, 128), (208, 64), (104, 32), (52, 16)]);
        for l in &p.levels {
            assert_eq!(l.depth.dims(), l.image.dims());
            assert_eq!(l.intrinsics.dims(), l.image.dims());
            assert!(l.image.data().iter().all(|v| *v == 0.3));
            assert!(l.depth.values().iter().all(|v| *v == 7.0));
        }
    }

    #[test]
    fn rejects_sizes_not_divisible_by_8() {
        let k = Intrinsics::new(10.0, 10.0, 5.0, 5.0, 12, 16).unwrap();
        let img = Image::constant(12, 16, 1, 0.0).unwrap();
        let d = DepthMap::constant(12, 16, 1.0).unwrap();
        assert!(build_pyramid(&img, &d, &k).is_err());
    }

    #[test]
    fn coarse_plane_points_are_a_subsample() {
        let k = k();
        let img = Image::constant(416, 128, 1, 0.0).unwrap();
        let d = DepthMap::constant(416, 128, 5.0).unwrap();
        let p = build_pyramid(&img, &d, &k).unwrap();
        let full = backproject(&d, &k).unwrap();
        for (s, level) in p.levels.iter().enumerate() {
            let step = 1usize << s;
            let q = backproject(&level.depth, &level.intrinsics).unwrap();
            let lw = level.intrinsics.width;
            for (idx, pt) in q.points().iter().enumerate() {
                let (i, j) = (idx % lw, idx / lw);
                let f = full.points()[j * step * 416 + i * step];
                assert!((pt - f).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn projection_scales_with_level() {
        let k = k();
        let x = Vector3::new(0.7, -0.3, 4.0);
        let full = k.project_point(&x).unwrap();
        for s in 1..LEVELS {
            let f = Pyramid::scale_factor(s);
            let ks = k.scaled(f).unwrap();
            assert_eq!(ks.project_point(&x).unwrap(), full * f);
        }
    }

    #[test]
    fn partial_validity_and_gradient_split() {
        let mut vals = vec![2.0; 16];
        let mut ok = vec![true; 16];
        ok[0] = false;
        ok[1] = false;
        ok[4] = false;
        vals[5] = 4.0;
        for c in [2, 3, 6, 7] {
            ok[c] = false;
        }
        let d = DepthMap::with_validity(4, 4, vals, ok).unwrap();
        let c = downsample_depth(&d);
        assert_eq!(c.get(0, 0), Some(4.0));
        assert_eq!(c.get(1, 0), None);
        assert_eq!(c.get(0, 1), Some(2.0));
        let mut g = vec![0.0; 16];
        accumulate_depth_gradient(&d, &[1.0, 5.0, 2.0, 0.0], &mut g);
        assert_eq!(g[5], 1.0);
        assert_eq!(g[2] + g[3] + g[6] + g[7], 0.0);
        assert_eq!(g[8], 0.5);
        assert_eq!(g[13], 0.5);
    }
}
