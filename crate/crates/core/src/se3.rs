//! Rigid-body transforms for ego-motion.
//!
//! A [`Pose`] `T = (R, t)` maps a point `p` to `R p + t`. As ego-motion it is
//! always the frame-t to frame-(t-1) point transform: points seen by the
//! camera at time `t` land in the camera frame of time `t-1`. Callers never
//! invert it to "undo" camera motion.
//!
//! [`PoseVector`] is the 6-number chart used by the optimizer: an axis-angle
//! rotation vector (radians) followed by the translation.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3x6, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::PointCloud;
use crate::error::{Error, Result};

/// Rotation angles at or past `PI - LOG_CHART_MARGIN` leave the canonical chart.
const LOG_CHART_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoseVector(pub [f64; 6]);

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Applies `self` after `other`: `compose(a, b) p = a (b p)`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_vector(&self) -> Result<PoseVector> {
        let w = log_so3(&self.rotation)?;
        let t = self.translation;
        Ok(PoseVector([w.x, w.y, w.z, t.x, t.y, t.z]))
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let s = 0.5 * vee(&(self.rotation - self.rotation.transpose())).norm();
        s.atan2(c)
    }

    /// Row-major `[R | t]`, the KITTI odometry layout.
    pub fn to_rows(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    /// Parses a row-major `[R | t]`, re-orthonormalizing `R` (text files carry
    /// only a few digits).
    pub fn from_rows(rows: &[f64; 12]) -> Result<Pose> {
        let m = Matrix3::new(
            rows[0], rows[1], rows[2], rows[4], rows[5], rows[6], rows[8], rows[9], rows[10],
        );
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let r = u * v_t;
        if r.determinant() <= 0.0 || (m - r).amax() > 1e-3 {
            return Err(Error::Domain("3x3 block is not a rotation".into()));
        }
        Ok(Pose {
            rotation: r,
            translation: Vector3::new(rows[3], rows[7], rows[11]),
        })
    }

    /// Largest deviation of `R^T R` from identity, and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let r = &self.rotation;
        (
            (r.transpose() * r - Matrix3::identity()).amax(),
            (r.determinant() - 1.0).abs(),
        )
    }
}

impl PoseVector {
    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self([
            rotation.x,
            rotation.y,
            rotation.z,
            translation.x,
            translation.y,
            translation.z,
        ])
    }

    pub fn zero() -> Self {
        Self([0.0; 6])
    }

    pub fn rotation(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn to_pose(&self) -> Result<Pose> {
        let w = self.rotation();
        let theta = w.norm();
        if theta.is_nan() || theta >= PI {
            return Err(Error::Domain(format!(
                "rotation angle {theta} is outside [0, pi)"
            )));
        }
        Ok(Pose {
            rotation: exp_so3(&w),
            translation: self.translation(),
        })
    }

    /// Converts a small left increment `(dw, dt)`, meaning
    /// `T' = (exp(dw), dt) * T`, into the matching first-order change of this
    /// vector's coordinates.
    pub fn left_increment_to_delta(&self, increment: &[f64; 6]) -> [f64; 6] {
        let dw = Vector3::new(increment[0], increment[1], increment[2]);
        let dt = Vector3::new(increment[3], increment[4], increment[5]);
        let dr = left_jacobian_inverse(&self.rotation()) * dw;
        let dtr = dt - skew(&self.translation()) * dw;
        [dr.x, dr.y, dr.z, dtr.x, dtr.y, dtr.z]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `exp([w]x)` via Rodrigues.
pub fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = skew(w);
    Matrix3::identity() + a * k + b * k * k
}

/// Inverse of [`exp_so3`] on the chart `|w| < pi`.
pub fn log_so3(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // v = sin(theta) * axis
    let v = 0.5 * vee(&(r - r.transpose()));
    let s = v.norm();
    let theta = s.atan2(c);
    if theta >= PI - LOG_CHART_MARGIN {
        return Err(Error::Domain(format!(
            "rotation angle {theta} is at the chart boundary pi"
        )));
    }
    if theta < 1e-4 {
        let t2 = theta * theta;
        return Ok(v * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if theta < PI - 1e-3 {
        return Ok(v * (theta / s));
    }
    // Near pi the antisymmetric part vanishes; read the axis from the
    // symmetric part (1 - cos) a a^T and take the sign from v.
    let sym = 0.5 * (r + r.transpose()) - Matrix3::identity() * c;
    let k = (0..3)
        .max_by(|a, b| sym[(*a, *a)].total_cmp(&sym[(*b, *b)]))
        .unwrap();
    let mut axis = sym.column(k).into_owned() / (sym[(k, k)] * (1.0 - c)).sqrt();
    axis /= axis.norm();
    if axis.dot(&v) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

#[inline]
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

#[inline]
fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Left Jacobian of SO(3): `exp(w + d) ~ exp(J_l(w) d) exp(w)`.
pub fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (b, c) = if theta < 1e-4 {
        (
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0,
        )
    } else {
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    let k = skew(w);
    Matrix3::identity() + b * k + c * k * k
}

pub fn left_jacobian_inverse(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let e = if theta < 1e-4 {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    let k = skew(w);
    Matrix3::identity() - 0.5 * k + e * k * k
}

/// A pose together with its parameter vector, able to report the Jacobian of
/// a transformed point with respect to that vector.
#[derive(Debug, Clone, Copy)]
pub struct Motion {
    pose: Pose,
    jac_rot: Matrix3<f64>,
    inverse: bool,
}

impl Motion {
    /// `p -> T(v) p`.
    pub fn forward(v: &PoseVector) -> Result<Self> {
        Ok(Self {
            pose: v.to_pose()?,
            jac_rot: left_jacobian(&v.rotation()),
            inverse: false,
        })
    }

    /// `p -> T(v)^-1 p`, differentiated with respect to `v`.
    pub fn inverse(v: &PoseVector) -> Result<Self> {
        Ok(Self {
            pose: v.to_pose()?.inverse(),
            jac_rot: left_jacobian(&(-v.rotation())),
            inverse: true,
        })
    }

    /// The transform actually applied to points.
    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose.apply(p)
    }

    /// Transformed point and `d(point)/d(v)`.
    pub fn apply_with_jacobian(&self, p: &Vector3<f64>) -> (Vector3<f64>, Matrix3x6<f64>) {
        let q = self.pose.apply(p);
        let mut jac = Matrix3x6::zeros();
        if self.inverse {
            // q = R^T (p - t): dq/dw = [q]x J_l(-w), dq/dt = -R^T
            jac.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&(skew(&q) * self.jac_rot));
            jac.fixed_view_mut::<3, 3>(0, 3)
                .copy_from(&(-self.pose.rotation));
        } else {
            // q = R p + t: dq/dw = -[R p]x J_l(w), dq/dt = I
            let rp = q - self.pose.translation;
            jac.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&(-skew(&rp) * self.jac_rot));
            jac.fixed_view_mut::<3, 3>(0, 3)
                .copy_from(&Matrix3::identity());
        }
        (q, jac)
    }
}

pub fn transform_cloud(pose: &Pose, cloud: &PointCloud) -> PointCloud {
    cloud.map_points(|p| pose.apply(p))
}
