use nalgebra::{Matrix3, Vector3};

use super::{icp, IcpParams, IcpResult};
use crate::camera::{Intrinsics, PointCloud};
use crate::error::Result;
use crate::se3::{Pose, PoseVector};

/// The 3-d alignment loss `|T' - I|_1 + |r|_1` and its approximate gradients.
#[derive(Debug, Clone)]
pub struct Loss3d {
    pub value: f64,
    /// `|T' - I|_1` over the 12 entries of `[R' | t'] - [I | 0]`.
    pub transform_term: f64,
    /// Sum of `|r|_1` over matched points.
    pub residual_term: f64,
    /// Negative of the correction `T'` as a left increment
    /// `(rotation vector, translation)`.
    pub pose_gradient: [f64; 6],
    /// Per predicted cell, the approximate gradient with respect to the point:
    /// the residual itself (zero where unmatched).
    pub point_gradients: Vec<Vector3<f64>>,
    pub icp: IcpResult,
}

/// Aligns `pred` (the ego-motion-transformed cloud) to `obs` with ICP.
pub fn loss_3d(pred: &PointCloud, obs: &PointCloud, params: &IcpParams) -> Result<Loss3d> {
    let res = icp(pred, obs, &Pose::identity(), params)?;
    let rows = res.transform.to_rows();
    let identity = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let transform_term: f64 = rows.iter().zip(identity).map(|(a, b)| (a - b).abs()).sum();
    let residual_term: f64 = res
        .residuals
        .iter()
        .zip(&res.correspondences)
        .filter(|(_, c)| c.is_some())
        .map(|(r, _)| r.abs().sum())
        .sum();
    let correction = res.transform.to_vector()?;
    Ok(Loss3d {
        value: transform_term + residual_term,
        transform_term,
        residual_term,
        pose_gradient: correction.0.map(|x| -x),
        point_gradients: res.residuals.clone(),
        icp: res,
    })
}

impl Loss3d {
    /// Per-pixel depth gradient for a predicted cloud built as
    /// `pred = M (D K^-1 [i, j, 1]^T)`, where `rotation` is the rotation of
    /// the rigid map `M`: the residual rotated back into the depth map's
    /// camera frame, projected on the pixel's ray.
    pub fn depth_gradient(&self, rotation: &Matrix3<f64>, k: &Intrinsics) -> Vec<f64> {
        let w = k.width;
        self.point_gradients
            .iter()
            .enumerate()
            .map(|(idx, r)| {
                if r.amax() == 0.0 {
                    return 0.0;
                }
                let ray = k.ray((idx % w) as f64, (idx / w) as f64);
                (rotation.transpose() * r).dot(&ray)
            })
            .collect()
    }

    /// The pose gradient expressed in the coordinates of `pose`, for a
    /// predicted cloud built as `T(pose) Q`.
    pub fn pose_vector_gradient(&self, pose: &PoseVector) -> [f64; 6] {
        pose.left_increment_to_delta(&self.pose_gradient)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{backproject, DepthMap};
    use crate::icp::DistanceMode;
    use crate::se3::transform_cloud;
    use nalgebra::Vector3;

    fn grid_cloud() -> PointCloud {
        let k = Intrinsics::new(20.0, 20.0, 9.5, 9.5, 20, 20).unwrap();
        let depth = DepthMap::from_fn(20, 20, |i, j| {
            3.0 + 0.3 * ((i as f64) * 0.4).sin() + 0.2 * ((j as f64) * 0.3).cos()
        })
        .unwrap();
        backproject(&depth, &k).unwrap()
    }

    #[test]
    fn aligned_clouds_have_zero_loss() {
        let q = grid_cloud();
        for mode in [DistanceMode::PointToPoint, DistanceMode::PointToPlane] {
            let params = IcpParams {
                distance_mode: mode,
                ..Default::default()
            };
            let l = loss_3d(&q, &q, &params).unwrap();
            assert!(l.value < 1e-12, "{mode:?} {}", l.value);
            assert!(l.pose_gradient.iter().all(|g| g.abs() < 1e-12));
            assert!(l.point_gradients.iter().all(|g| g.amax() < 1e-12));
        }
    }

    #[test]
    fn small_translation_enters_once() {
        let q = grid_cloud();
        let eps = 1e-3;
        let moved = transform_cloud(&Pose::from_translation(Vector3::new(eps, 0.0, 0.0)), &q);
        let params = IcpParams {
            distance_mode: DistanceMode::PointToPoint,
            ..Default::default()
        };
        let l = loss_3d(&q, &moved, &params).unwrap();
        assert!(
            (l.transform_term - eps).abs() < 1e-9,
            "{}",
            l.transform_term
        );
        assert!(l.residual_term < 1e-9);
        assert!((l.value - eps).abs() < 1e-9);
        // the gradient points against the correction
        assert!((l.pose_gradient[3] + eps).abs() < 1e-9);
    }
}
