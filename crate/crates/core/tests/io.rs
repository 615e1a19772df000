use egodepth::camera::DepthMap;
use egodepth::image::{Image, Mask};
use egodepth::io::*;
use egodepth::se3::{Pose, PoseVector};
use egodepth::Error;
use nalgebra::Vector3;

fn sample_depth() -> DepthMap {
    let (w, h) = (7, 5);
    let values: Vec<f64> = (0..w * h).map(|n| 1.0 + 0.37 * n as f64).collect();
    let valid: Vec<bool> = (0..w * h).map(|n| n % 6 != 0).collect();
    DepthMap::with_validity(w, h, values, valid).unwrap()
}

#[test]
fn pfm_round_trip_keeps_orientation_scale_and_holes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.pfm");
    let d = sample_depth();
    write_pfm_depth(&p, &d, 2.5).unwrap();
    let raw = std::fs::read(&p).unwrap();
    assert!(raw.starts_with(b"Pf\n7 5\n-2.5\n"));
    // Bottom row stored first.
    let sample = |k: usize| f32::from_le_bytes(raw[12 + 4 * k..16 + 4 * k].try_into().unwrap());
    assert_eq!(sample(0), (1.0 + 0.37 * 28.0) as f32);
    assert_eq!(sample(2), 0.0, "index 30 is a hole");

    assert_eq!(read_pfm(&p).unwrap().scale, 2.5);
    let back = read_pfm_depth(&p).unwrap();
    assert_eq!(back.validity(), d.validity());
    for (a, b) in back
        .values()
        .iter()
        .zip(d.values())
        .zip(d.validity())
        .filter(|x| *x.1)
        .map(|x| x.0)
    {
        assert_eq!(*a, *b as f32 as f64);
    }
}

#[test]
fn big_endian_pfm_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("be.pfm");
    let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
    bytes.extend_from_slice(&3.5f32.to_be_bytes());
    bytes.extend_from_slice(&(-1.0f32).to_be_bytes());
    std::fs::write(&p, bytes).unwrap();
    let d = read_depth(&p).unwrap();
    assert_eq!(d.get(0, 0), Some(3.5));
    assert_eq!(d.get(1, 0), None);
}

#[test]
fn png16_round_trip_quantizes_to_1_over_256() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.png");
    let d = sample_depth();
    write_depth(&p, &d).unwrap();
    let back = read_depth(&p).unwrap();
    assert_eq!(back.validity(), d.validity());
    for n in 0..d.values().len() {
        if d.validity()[n] {
            assert!((back.values()[n] - d.values()[n]).abs() <= 0.5 / PNG16_SCALE);
        }
    }
    let far = DepthMap::constant(2, 2, 300.0).unwrap();
    assert!(write_depth_png16(&p, &far).is_err());
}

#[test]
fn images_round_trip_at_8_bits() {
    let dir = tempfile::tempdir().unwrap();
    let img = Image::from_fn(9, 4, 3, |i, j, c| {
        ((i * 31 + j * 17 + c * 5) % 256) as f64 / 255.0
    })
    .unwrap();
    for name in ["a.png", "a.ppm"] {
        let p = dir.path().join(name);
        write_image(&p, &img).unwrap();
        let back = read_image(&p).unwrap();
        assert_eq!(back.dims(), img.dims());
        assert_eq!(back.channels(), 3);
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12, "{name}");
        }
    }
    let gray = Image::from_fn(5, 3, 1, |i, j, _| (i + j) as f64 / 10.0).unwrap();
    let p = dir.path().join("g.pgm");
    write_image(&p, &gray).unwrap();
    let back = read_image(&p).unwrap();
    assert_eq!(back.channels(), 1);
    assert!((back.get(4, 2, 0) - 0.6).abs() < 0.5 / 255.0 + 1e-12);
}

#[test]
fn masks_round_trip_as_1_bit() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.png");
    let data: Vec<bool> = (0..11 * 3).map(|n| n % 3 == 1 || n == 10).collect();
    let m = Mask::new(11, 3, data).unwrap();
    write_mask_png(&p, &m).unwrap();
    assert_eq!(read_mask_png(&p).unwrap(), m);
}

#[test]
fn ply_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.ply");
    let cloud = PlyCloud {
        points: vec![
            Vector3::new(0.1, -2.0 / 3.0, 1e-17),
            Vector3::new(5.0, 6.0, 7.0),
        ],
        normals: Some(vec![
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.6, 0.8, 0.0),
        ]),
    };
    write_ply(&p, &cloud).unwrap();
    assert_eq!(read_ply(&p).unwrap(), cloud);
}

#[test]
fn ply_reader_skips_other_elements() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("mesh.ply");
    std::fs::write(
        &p,
        "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float z\nproperty float y\n\
         property float x\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n\
         end_header\n3 2 1 255\n6 5 4 0\n3 0 1 1\n",
    )
    .unwrap();
    let c = read_ply(&p).unwrap();
    assert_eq!(
        c.points,
        vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.0, 5.0, 6.0)]
    );
    assert!(c.normals.is_none());
}

#[test]
fn kitti_poses_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("poses.txt");
    let poses: Vec<Pose> = (0..4)
        .map(|k| {
            let k = k as f64;
            PoseVector([0.1 * k, -0.05, 0.02 * k, k, 0.5, -k])
                .to_pose()
                .unwrap()
        })
        .collect();
    write_kitti_poses(&p, &poses).unwrap();
    let back = read_kitti_poses(&p).unwrap();
    assert_eq!(back.len(), 4);
    for (a, b) in back.iter().zip(&poses) {
        assert!((a.rotation - b.rotation).amax() < 1e-14);
        assert_eq!(a.translation, b.translation);
    }
    std::fs::write(&p, "1 0 0 0 0 1 0 0 0 0 1\n").unwrap();
    assert!(matches!(read_kitti_poses(&p), Err(Error::Format { .. })));
}

#[test]
fn json_floats_use_17_significant_digits() {
    let s = to_json_pretty(&serde_json::json!({"a": 0.1, "b": [1.0, -2.5e-300]}));
    assert!(s.contains("1.0000000000000001e-1"));
    assert!(s.contains("1.0000000000000000e0"));
    assert!(s.contains("-2.5000000000000000e-300"));
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["a"].as_f64(), Some(0.1));
}

#[test]
fn missing_file_error_names_the_path() {
    let e = read_depth(std::path::Path::new("/nonexistent/dir/depth.pfm")).unwrap_err();
    assert!(matches!(e, Error::Io { .. }));
    assert!(e.to_string().contains("/nonexistent/dir/depth.pfm"));
}
