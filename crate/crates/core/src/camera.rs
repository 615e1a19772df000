//! Pinhole camera model: intrinsics, depth maps, structured point clouds.
//!
//! Pixel `(i, j)` is column `i`, row `j`, sitting at integer coordinates with
//! no half-pixel offset. Grids are stored row-major, so cell `(i, j)` lives at
//! index `j * width + i`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points with `z` at or below this are behind the camera.
pub const Z_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

impl TryFrom<RawIntrinsics> for Intrinsics {
    type Error = Error;

    fn try_from(r: RawIntrinsics) -> Result<Self> {
        Intrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fx.is_finite() && fy > 0.0 && fy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive and finite, got fx={fx}, fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidParameter(
                "principal point must be finite".into(),
            ));
        }
        if width < 2 || height < 2 {
            return Err(Error::InvalidParameter(format!(
                "image must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `K^-1 [i, j, 1]^T`: the viewing ray through a pixel, scaled to `z = 1`.
    #[inline]
    pub fn ray(&self, i: f64, j: f64) -> Vector3<f64> {
        Vector3::new((i - self.cx) / self.fx, (j - self.cy) / self.fy, 1.0)
    }

    /// Perspective projection, `None` when the point is behind the camera.
    #[inline]
    pub fn project_point(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p.z > Z_MIN {
            Some(Vector2::new(
                self.fx * p.x / p.z + self.cx,
                self.fy * p.y / p.z + self.cy,
            ))
        } else {
            None
        }
    }

    /// Intrinsics for an image resampled by `factor` (e.g. 0.5 for half size).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let w = (self.width as f64 * factor).round() as usize;
        let h = (self.height as f64 * factor).round() as usize;
        Self::new(
            self.fx * factor,
            self.fy * factor,
            self.cx * factor,
            self.cy * factor,
            w,
            h,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub(crate) fn check_dims(&self, what: &'static str, dims: (usize, usize)) -> Result<()> {
        if dims != self.dims() {
            return Err(Error::dims(what, dims, self.dims()));
        }
        Ok(())
    }
}

/// Per-pixel depth with explicit validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a map where every strictly positive finite value is valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "depth buffer holds {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        let valid = values.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// Builds a map with explicit flags; every flagged value must be positive and finite.
    pub fn with_validity(
        width: usize,
        height: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(Error::InvalidParameter("depth buffer size mismatch".into()));
        }
        if let Some(idx) = values
            .iter()
            .zip(&valid)
            .position(|(d, v)| *v && !(d.is_finite() && *d > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "valid depth at index {idx} is {}",
                values[idx]
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::from_values(width, height, vec![depth; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                values.push(f(i, j));
            }
        }
        Self::from_values(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let idx = j * self.width + i;
        self.valid[idx].then(|| self.values[idx])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Elementwise multiply, keeping validity.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_validity(
            self.width,
            self.height,
            self.values.iter().map(|d| d * factor).collect(),
            self.valid.clone(),
        )
    }
}

/// A point cloud that keeps the pixel grid of the depth map it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    width: usize,
    height: usize,
    points: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl PointCloud {
    pub fn new(
        width: usize,
        height: usize,
        points: Vec<Vector3<f64>>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if points.len() != width * height || valid.len() != width * height {
            return Err(Error::InvalidParameter(
                "point cloud buffer size mismatch".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            points,
            valid,
        })
    }

    /// A `len x 1` cloud with every point valid.
    pub fn unstructured(points: Vec<Vector3<f64>>) -> Self {
        let n = points.len();
        Self {
            width: n,
            height: 1,
            points,
            valid: vec![true; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Iterates `(cell index, point)` over valid cells.
    pub fn valid_points(&self) -> impl Iterator<Item = (usize, &Vector3<f64>)> {
        self.points
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.valid[*idx])
    }

    /// Clears validity wherever `keep` is false.
    pub fn restrict(&mut self, keep: &[bool]) {
        for (v, k) in self.valid.iter_mut().zip(keep) {
            *v &= *k;
        }
    }

    pub(crate) fn map_points(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Self {
        Self {
            width: self.width,
            height: self.height,
            points: self.points.iter().map(f).collect(),
            valid: self.valid.clone(),
        }
    }
}

/// Continuous pixel coordinates per grid cell, as returned by [`project`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<Vector2<f64>>,
    /// False for invalid cells and for points behind the camera.
    pub valid: Vec<bool>,
}

/// Lifts every valid depth pixel to `D * K^-1 [i, j, 1]^T`.
pub fn backproject(depth: &DepthMap, k: &Intrinsics) -> Result<PointCloud> {
    k.check_dims("depth map", depth.dims())?;
    let mut points = Vec::with_capacity(depth.values.len());
    for j in 0..depth.height {
        for i in 0..depth.width {
            let idx = j * depth.width + i;
            points.push(if depth.valid[idx] {
                depth.values[idx] * k.ray(i as f64, j as f64)
            } else {
                Vector3::zeros()
            });
        }
    }
    PointCloud::new(depth.width, depth.height, points, depth.valid.clone())
}

pub fn project(cloud: &PointCloud, k: &Intrinsics) -> Projection {
    let mut coords = Vec::with_capacity(cloud.len());
    let mut valid = Vec::with_capacity(cloud.len());
    for (p, v) in cloud.points.iter().zip(&cloud.valid) {
        match k.project_point(p).filter(|_| *v) {
            Some(uv) => {
                coords.push(uv);
                valid.push(true);
            }
            None => {
                coords.push(Vector2::new(f64::NAN, f64::NAN));
                valid.push(false);
            }
        }
    }
    Projection {
        width: cloud.width,
        height: cloud.height,
        coords,
        valid,
    }
}
