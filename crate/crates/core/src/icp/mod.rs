//! Rigid registration of a predicted point cloud against an observed one.
//!
//! [`icp`] aligns source `A` to target `B`: it finds `T'` minimizing
//! `1/2 sum |T' a - b_c(a)|^2` (or the point-to-plane analogue), alternating
//! exact nearest-neighbour correspondence with a best-fit solve. The residual
//! of a matched source point is `r = a - T'^-1 b_c(a)`, expressed in the
//! source frame. [`loss_3d`] turns `T'` and `r` into the alignment loss and
//! its approximate gradients.

mod fit;
mod kdtree;
mod loss;
mod normals;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fit::{best_fit_point_to_point, point_to_plane_step};
pub use kdtree::{KdTree, Neighbor};
pub use loss::{loss_3d, Loss3d};
pub use normals::estimate_normals;

use crate::camera::PointCloud;
use crate::error::{Error, Result};
use crate::se3::Pose;

/// Fewest valid points either cloud may have.
pub const MIN_POINTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    PointToPoint,
    PointToPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once the mean residual changes by less than this (scene units).
    pub convergence_tol: f64,
    /// Pairs farther apart than this are dropped (scene units).
    pub max_correspondence_dist: f64,
    pub distance_mode: DistanceMode,
    pub normal_neighborhood_size: usize,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_tol: 1e-6,
            max_correspondence_dist: 1.0,
            distance_mode: DistanceMode::PointToPlane,
            normal_neighborhood_size: 16,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.convergence_tol > 0.0 && self.max_correspondence_dist > 0.0) {
            return Err(Error::InvalidParameter(
                "ICP tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    /// `T'`, mapping source points onto the target.
    pub transform: Pose,
    /// Per source cell; zero for unmatched cells. In point-to-plane mode the
    /// residual is the signed plane distance times the target normal, rotated
    /// into the source frame.
    pub residuals: Vec<Vector3<f64>>,
    /// Per source cell, the matched target cell.
    pub correspondences: Vec<Option<usize>>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration's solve, over that iteration's pairs.
    pub objective_history: Vec<f64>,
}

impl IcpResult {
    pub fn matched(&self) -> usize {
        self.correspondences.iter().filter(|c| c.is_some()).count()
    }
}

struct Pair {
    src: usize,
    tgt: usize,
}

pub fn icp(
    source: &PointCloud,
    target: &PointCloud,
    init: &Pose,
    params: &IcpParams,
) -> Result<IcpResult> {
    params.validate()?;
    let src: Vec<(usize, Vector3<f64>)> = source.valid_points().map(|(i, p)| (i, *p)).collect();
    if src.len() < MIN_POINTS || target.valid_count() < MIN_POINTS {
        return Err(Error::DegenerateInput(format!(
            "ICP needs at least {MIN_POINTS} valid points per cloud, got {} and {}",
            src.len(),
            target.valid_count()
        )));
    }
    let tree = KdTree::build(target.valid_points());
    let normals = match params.distance_mode {
        DistanceMode::PointToPoint => None,
        DistanceMode::PointToPlane => Some(normals::normals_with_tree(
            target,
            &tree,
            params.normal_neighborhood_size,
        )?),
    };
    let tgt = target.points();
    let max_d2 = params.max_correspondence_dist * params.max_correspondence_dist;

    let mut transform = *init;
    let mut pairs = Vec::new();
    let mut history = Vec::new();
    let mut prev_mean: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iterations {
        iterations += 1;
        pairs = src
            .par_iter()
            .filter_map(|(idx, a)| {
                let nb = tree.nearest(&transform.apply(a))?;
                let normal_ok = normals.as_ref().is_none_or(|ns| ns[nb.id].is_some());
                (nb.dist2 <= max_d2 && normal_ok).then_some(Pair {
                    src: *idx,
                    tgt: nb.id,
                })
            })
            .collect::<Vec<_>>();
        if pairs.is_empty() {
            return Err(Error::NoOverlap);
        }
        let a_of = |p: &Pair| source.points()[p.src];

        transform = match &normals {
            None => {
                let fit: Vec<_> = pairs.iter().map(|p| (a_of(p), tgt[p.tgt])).collect();
                best_fit_point_to_point(&fit)
            }
            Some(ns) => {
                let lin: Vec<_> = pairs
                    .iter()
                    .map(|p| (transform.apply(&a_of(p)), tgt[p.tgt], ns[p.tgt].unwrap()))
                    .collect();
                point_to_plane_step(&lin).compose(&transform)
            }
        };

        let (objective, mean) = {
            let (mut obj, mut sum) = (0.0, 0.0);
            for p in &pairs {
                let e = transform.apply(&a_of(p)) - tgt[p.tgt];
                let d = match &normals {
                    None => e.norm(),
                    Some(ns) => e.dot(&ns[p.tgt].unwrap()).abs(),
                };
                obj += 0.5 * d * d;
                sum += d;
            }
            (obj, sum / pairs.len() as f64)
        };
        history.push(objective);
        if prev_mean.is_some_and(|pm| (pm - mean).abs() < params.convergence_tol) {
            converged = true;
            break;
        }
        prev_mean = Some(mean);
    }

    let inv = transform.inverse();
    let mut residuals = vec![Vector3::zeros(); source.len()];
    let mut correspondences = vec![None; source.len()];
    for p in &pairs {
        let a = source.points()[p.src];
        let b = tgt[p.tgt];
        residuals[p.src] = match &normals {
            None => a - inv.apply(&b),
            Some(ns) => {
                let n = ns[p.tgt].unwrap();
                (transform.apply(&a) - b).dot(&n) * (inv.rotation * n)
            }
        };
        correspondences[p.src] = Some(p.tgt);
    }

    Ok(IcpResult {
        transform,
        residuals,
        correspondences,
        iterations,
        converged,
        objective_history: history,
    })
}
