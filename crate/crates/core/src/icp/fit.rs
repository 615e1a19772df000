//! Closed-form and linearized best-fit rigid transforms for fixed correspondences.

use nalgebra::{Matrix4, Matrix6, Quaternion, SymmetricEigen, UnitQuaternion, Vector3, Vector6};

use crate::se3::{exp_so3, Pose};

/// Rigid `T` minimizing `sum |T a_k - b_k|^2`, via Horn's unit-quaternion
/// method (dominant eigenvector of the 4x4 symmetric profile matrix).
pub fn best_fit_point_to_point(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Pose {
    let n = pairs.len() as f64;
    let ca = pairs.iter().map(|(a, _)| a).sum::<Vector3<f64>>() / n;
    let cb = pairs.iter().map(|(_, b)| b).sum::<Vector3<f64>>() / n;
    let mut s = nalgebra::Matrix3::zeros();
    for (a, b) in pairs {
        s += (a - ca) * (b - cb).transpose();
    }
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    #[rustfmt::skip]
    let profile = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(profile);
    let best = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(best);
    let rotation = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner();
    Pose {
        rotation,
        translation: cb - rotation * ca,
    }
}

/// Weight of the point-to-point term mixed into the point-to-plane solve.
/// On near-planar geometry the in-plane directions are otherwise
/// constrained only by noise; this ties them to the nearest-neighbour pull.
pub const POINT_WEIGHT: f64 = 0.05;

/// One Gauss-Newton step of point-to-plane alignment under the small-angle
/// linearization. Each entry is `(moved source point, target point, target
/// normal)`; the returned increment is applied on the left of the current
/// transform. A [`POINT_WEIGHT`]-scaled point-to-point term keeps directions
/// the planes leave free (e.g. sliding along a plane) from drifting.
pub fn point_to_plane_step(pairs: &[(Vector3<f64>, Vector3<f64>, Vector3<f64>)]) -> Pose {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for (m, b, n) in pairs {
        let c = m.cross(n);
        let row = Vector6::new(c.x, c.y, c.z, n.x, n.y, n.z);
        let e = (m - b).dot(n);
        h += row * row.transpose();
        g -= row * e;
        // d(m + dw x m + dt)/d(dw, dt) = [-[m]x | I]
        let e3 = m - b;
        for a in 0..3 {
            let mut r = Vector6::zeros();
            let unit = Vector3::ith(a, 1.0);
            let dw = m.cross(&unit);
            r[0] = dw.x;
            r[1] = dw.y;
            r[2] = dw.z;
            r[3 + a] = 1.0;
            h += POINT_WEIGHT * r * r.transpose();
            g -= POINT_WEIGHT * r * e3[a];
        }
    }
    let eig = SymmetricEigen::new(h);
    let lmax = eig.eigenvalues.amax();
    let mut delta = Vector6::zeros();
    if lmax > 0.0 {
        for k in 0..6 {
            let l = eig.eigenvalues[k];
            if l > lmax * 1e-10 {
                let v = eig.eigenvectors.column(k);
                delta += v * (v.dot(&g) / l);
            }
        }
    }
    Pose {
        rotation: exp_so3(&Vector3::new(delta[0], delta[1], delta[2])),
        translation: Vector3::new(delta[3], delta[4], delta[5]),
    }
}
