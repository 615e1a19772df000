//! ICP and the 3-d alignment loss on synthetic clouds.

use egodepth::camera::PointCloud;
use egodepth::icp::{icp, loss_3d, DistanceMode, IcpParams};
use egodepth::se3::{transform_cloud, Pose, PoseVector};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn volume(seed: u64, n: usize) -> PointCloud {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::unstructured(
        (0..n)
            .map(|_| {
                Vector3::new(
                    r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                    r.random_range(2.0..4.0),
                )
            })
            .collect(),
    )
}

fn surface(n: usize) -> PointCloud {
    let mut pts = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64 * 2.0 - 1.0;
            let y = j as f64 / (n - 1) as f64 * 2.0 - 1.0;
            let z = 3.0 + 0.3 * (2.5 * x).sin() * (2.0 * y).cos() + 0.2 * x * x - 0.1 * y;
            pts.push(Vector3::new(x, y, z));
        }
    }
    PointCloud::new(n, n, pts, vec![true; n * n]).unwrap()
}

fn small_motion() -> impl Strategy<Value = Pose> {
    (
        prop::array::uniform3(-0.04f64..0.04),
        prop::array::uniform3(-0.05f64..0.05),
    )
        .prop_map(|(w, t)| {
            PoseVector::new(Vector3::from(w), Vector3::from(t))
                .to_pose()
                .unwrap()
        })
}

fn gap(a: &Pose, b: &Pose) -> f64 {
    (a.rotation - b.rotation)
        .amax()
        .max((a.translation - b.translation).amax())
}

fn params(mode: DistanceMode) -> IcpParams {
    IcpParams {
        distance_mode: mode,
        ..IcpParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_and_backward_registrations_are_inverse(g in small_motion(), seed in 0u64..1000) {
        for (a, mode) in [(volume(seed, 300), DistanceMode::PointToPoint), (surface(25), DistanceMode::PointToPlane)] {
            let b = transform_cloud(&g, &a);
            let ab = icp(&a, &b, &Pose::identity(), &params(mode)).unwrap().transform;
            let ba = icp(&b, &a, &Pose::identity(), &params(mode)).unwrap().transform;
            prop_assert!(gap(&ab.compose(&ba), &Pose::identity()) < 1e-3, "{:?}", mode);
        }
    }

    #[test]
    fn point_to_point_objective_never_increases(g in small_motion(), seed in 0u64..1000) {
        let a = volume(seed, 300);
        let b = transform_cloud(&g, &a);
        let res = icp(&a, &b, &Pose::identity(), &params(DistanceMode::PointToPoint)).unwrap();
        for w in res.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{:?}", res.objective_history);
        }
    }

    #[test]
    fn loss_is_positive_exactly_when_misaligned(g in small_motion(), seed in 0u64..1000) {
        let a = volume(seed, 200);
        for mode in [DistanceMode::PointToPoint, DistanceMode::PointToPlane] {
            let p = params(mode);
            let aligned = loss_3d(&a, &a, &p).unwrap();
            prop_assert!(aligned.value < 1e-12);
            prop_assert!(aligned.pose_gradient.iter().all(|x| x.abs() < 1e-12));
            let moved = g.to_vector().unwrap();
            if moved.norm() > 1e-3 {
                let l = loss_3d(&a, &transform_cloud(&g, &a), &p).unwrap();
                prop_assert!(l.value > 0.0 && l.transform_term > 0.0);
            }
        }
    }
}

/// The pose gradient points against the correction ICP found, so a small
/// step along its negative moves the predicted cloud onto the observation.
#[test]
fn pose_gradient_step_reduces_misalignment() {
    let obs = surface(25);
    for seed in 0..20u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let v = PoseVector([
            r.random_range(-0.03..0.03),
            r.random_range(-0.03..0.03),
            r.random_range(-0.03..0.03),
            r.random_range(-0.05..0.05),
            r.random_range(-0.05..0.05),
            r.random_range(-0.05..0.05),
        ]);
        let pred = transform_cloud(&v.to_pose().unwrap(), &obs);
        let l = loss_3d(&pred, &obs, &IcpParams::default()).unwrap();
        let g = l.pose_vector_gradient(&v);
        let mut stepped = v;
        for p in 0..6 {
            stepped.0[p] -= 0.5 * g[p];
        }
        assert!(
            stepped.norm() < v.norm(),
            "seed {seed}: {} -> {}",
            v.norm(),
            stepped.norm()
        );
    }
}
