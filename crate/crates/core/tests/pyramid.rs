//! Pyramid levels preserve the mean and rescale the camera consistently.

use egodepth::camera::{DepthMap, Intrinsics};
use egodepth::image::Image;
use egodepth::pyramid::{build_pyramid, Pyramid, LEVELS};
use nalgebra::Vector3;
use proptest::prelude::*;

fn sized() -> impl Strategy<Value = (usize, usize)> {
    (2usize..7, 2usize..7).prop_map(|(a, b)| (8 * a, 8 * b))
}

proptest! {
    #[test]
    fn levels_preserve_mean_intensity_and_depth(
        ((w, h), seed) in (sized(), any::<u64>()),
        c in prop::sample::select(vec![1usize, 3]),
    ) {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let img = Image::from_fn(w, h, c, |_, _, _| next()).unwrap();
        let depth = DepthMap::from_fn(w, h, |_, _| 1.0 + 50.0 * next()).unwrap();
        let k = Intrinsics::new(w as f64, w as f64, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap();
        let p = build_pyramid(&img, &depth, &k).unwrap();
        prop_assert_eq!(p.levels.len(), LEVELS);
        let mean_d = |d: &DepthMap| d.values().iter().sum::<f64>() / d.values().len() as f64;
        for level in &p.levels[1..] {
            prop_assert!((level.image.mean() - img.mean()).abs() <= 1e-12);
            prop_assert!((mean_d(&level.depth) - mean_d(&depth)).abs() <= 1e-12 * mean_d(&depth));
        }
    }

    #[test]
    fn scaled_intrinsics_project_to_scaled_pixels(
        f in 10.0f64..500.0,
        c in prop::array::uniform2(0.0f64..64.0),
        p in prop::array::uniform3(-5.0f64..5.0),
        z in 0.5f64..50.0,
    ) {
        let k = Intrinsics::new(f, 1.1 * f, c[0], c[1], 64, 64).unwrap();
        let x = Vector3::new(p[0], p[1], z);
        let full = k.project_point(&x).unwrap();
        for s in 1..LEVELS {
            let factor = Pyramid::scale_factor(s);
            let ks = k.scaled(factor).unwrap();
            prop_assert_eq!(ks.project_point(&x).unwrap(), full * factor);
        }
    }
}

#[test]
fn too_small_for_four_levels() {
    let k = Intrinsics::new(8.0, 8.0, 4.0, 8.0, 8, 16).unwrap();
    let img = Image::constant(8, 16, 1, 0.5).unwrap();
    let depth = DepthMap::constant(8, 16, 2.0).unwrap();
    let err = build_pyramid(&img, &depth, &k).unwrap_err().to_string();
    assert!(err.contains("coarsest level"), "{err}");
    assert!(egodepth::pyramid::build_levels(&img, &depth, &k, 3).is_ok());
}
