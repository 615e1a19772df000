use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::kdtree::KdTree;
use crate::camera::PointCloud;
use crate::error::{Error, Result};

/// Second-largest covariance eigenvalue below this fraction of the largest
/// means the neighbourhood is a line or a point.
const RANK_TOL: f64 = 1e-10;

/// Per-point unit normals from the covariance of each point's `k` nearest
/// neighbours (itself included), oriented toward the camera origin.
///
/// Returns one entry per grid cell; invalid cells and degenerate
/// neighbourhoods yield `None`.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<Vec<Option<Vector3<f64>>>> {
    let tree = KdTree::build(cloud.valid_points());
    normals_with_tree(cloud, &tree, k)
}

pub(crate) fn normals_with_tree(
    cloud: &PointCloud,
    tree: &KdTree,
    k: usize,
) -> Result<Vec<Option<Vector3<f64>>>> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "normal neighbourhood needs at least 3 points, got {k}"
        )));
    }
    if k > tree.len() {
        return Err(Error::InvalidParameter(format!(
            "normal neighbourhood of {k} exceeds {} valid points",
            tree.len()
        )));
    }
    let points = cloud.points();
    Ok(points
        .par_iter()
        .zip(cloud.validity())
        .map(|(p, valid)| {
            if !valid {
                return None;
            }
            let nbrs = tree.knn(p, k);
            let n = nbrs.len() as f64;
            let mean = nbrs.iter().map(|nb| points[nb.id]).sum::<Vector3<f64>>() / n;
            let mut cov = Matrix3::zeros();
            for nb in &nbrs {
                let d = points[nb.id] - mean;
                cov += d * d.transpose();
            }
            plane_normal(&cov).map(|normal| if normal.dot(p) > 0.0 { -normal } else { normal })
        })
        .collect())
}

fn plane_normal(cov: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let eig = SymmetricEigen::new(*cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let (small, mid, large) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    debug_assert!(small <= mid && mid <= large);
    if large.is_nan() || large <= 0.0 || mid <= RANK_TOL * large {
        return None;
    }
    let n = eig.eigenvectors.column(order[0]).into_owned();
    Some(n / n.norm())
}
