//! Depth and trajectory evaluation metrics.
//!
//! Depth predictions are median-scaled to the ground truth before scoring
//! (monocular depth is only defined up to scale). Trajectories are scored by
//! absolute trajectory error over short overlapping snippets, each aligned
//! to the ground truth by a similarity transform.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::DepthMap;
use crate::error::{Error, Result};
use crate::image::Mask;
use crate::se3::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Ground truth beyond this depth is ignored.
    pub cap: f64,
    /// Factor applied to the prediction (1 without median scaling).
    pub scale: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthEvalOptions {
    pub cap: f64,
    pub median_scaling: bool,
    /// Only pixels set here are evaluated.
    pub crop: Option<Mask>,
}

impl DepthEvalOptions {
    pub fn with_cap(cap: f64) -> Self {
        Self {
            cap,
            median_scaling: true,
            crop: None,
        }
    }
}

/// Median of a non-empty slice (mean of the two middle values for even length).
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Standard metrics with median scaling and a depth cap.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, cap: f64) -> Result<DepthMetrics> {
    depth_metrics_with(pred, gt, &DepthEvalOptions::with_cap(cap))
}

pub fn depth_metrics_with(
    pred: &DepthMap,
    gt: &DepthMap,
    opts: &DepthEvalOptions,
) -> Result<DepthMetrics> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims("prediction", pred.dims(), gt.dims()));
    }
    if let Some(c) = &opts.crop {
        if c.dims() != gt.dims() {
            return Err(Error::dims("crop mask", c.dims(), gt.dims()));
        }
    }
    if opts.cap.is_nan() || opts.cap <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "depth cap must be positive, got {}",
            opts.cap
        )));
    }
    let pairs: Vec<(f64, f64)> = (0..gt.values().len())
        .filter(|&n| {
            gt.validity()[n]
                && pred.validity()[n]
                && gt.values()[n] <= opts.cap
                && opts.crop.as_ref().is_none_or(|c| c.data()[n])
        })
        .map(|n| (pred.values()[n], gt.values()[n]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let scale = if opts.median_scaling {
        let mut p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let mut g: Vec<f64> = pairs.iter().map(|x| x.1).collect();
        median(&mut g) / median(&mut p)
    } else {
        1.0
    };

    let n = pairs.len() as f64;
    let (mut abs_rel, mut sq_rel, mut se, mut sle) = (0.0, 0.0, 0.0, 0.0);
    let mut within = [0usize; 3];
    for (p, g) in &pairs {
        let p = p * scale;
        let e = p - g;
        abs_rel += e.abs() / g;
        sq_rel += e * e / g;
        se += e * e;
        let le = p.ln() - g.ln();
        sle += le * le;
        let ratio = (p / g).max(g / p);
        for (k, w) in within.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *w += 1;
            }
        }
    }
    Ok(DepthMetrics {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (se / n).sqrt(),
        rmse_log: (sle / n).sqrt(),
        delta1: within[0] as f64 / n,
        delta2: within[1] as f64 / n,
        delta3: within[2] as f64 / n,
        cap: opts.cap,
        scale,
        count: pairs.len(),
    })
}

impl DepthMetrics {
    pub const COLUMNS: [&'static str; 7] = [
        "Abs Rel", "Sq Rel", "RMSE", "RMSE log", "d<1.25", "d<1.25^2", "d<1.25^3",
    ];

    pub fn row(&self) -> [f64; 7] {
        [
            self.abs_rel,
            self.sq_rel,
            self.rmse,
            self.rmse_log,
            self.delta1,
            self.delta2,
            self.delta3,
        ]
    }

    /// Two-line aligned text table in the usual column order.
    pub fn table(&self) -> String {
        let head: Vec<String> = Self::COLUMNS.iter().map(|c| format!("{c:>10}")).collect();
        let vals: Vec<String> = self.row().iter().map(|v| format!("{v:>10.4}")).collect();
        format!("{}\n{}\n", head.join(" "), vals.join(" "))
    }
}

/// Similarity transform `x -> s R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * x) + self.translation
    }
}

/// Least-squares similarity mapping `src` onto `dst` (Umeyama).
pub fn align_similarity(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Similarity {
    let n = src.len() as f64;
    let ms = src.iter().sum::<Vector3<f64>>() / n;
    let md = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (s, d) in src.iter().zip(dst) {
        cov += (d - md) * (s - ms).transpose();
        var += (s - ms).norm_squared();
    }
    cov /= n;
    var /= n;
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * vt.determinant() < 0.0 {
        signs.z = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * vt;
    let scale = if var > 0.0 {
        svd.singular_values.component_mul(&signs).sum() / var
    } else {
        0.0
    };
    Similarity {
        scale,
        rotation,
        translation: md - scale * (rotation * ms),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub mean: f64,
    pub std: f64,
    pub snippet_len: usize,
    /// RMSE of each snippet, in order of its first frame.
    pub per_snippet: Vec<f64>,
}

/// Absolute trajectory error over every run of `snippet_len` consecutive
/// poses (camera-to-world). Each snippet's predicted positions are aligned
/// to the ground truth by a least-squares similarity before taking the RMSE.
pub fn ate(pred: &[Pose], gt: &[Pose], snippet_len: usize) -> Result<AteResult> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidParameter(format!(
            "trajectory lengths differ: {} predicted vs {} ground truth",
            pred.len(),
            gt.len()
        )));
    }
    if snippet_len < 2 || gt.len() < snippet_len {
        return Err(Error::InvalidParameter(format!(
            "need snippets of at least 2 poses and a trajectory at least that long \
             (snippet {snippet_len}, trajectory {})",
            gt.len()
        )));
    }
    let per_snippet: Vec<f64> = (0..=gt.len() - snippet_len)
        .map(|start| {
            let p: Vec<_> = pred[start..start + snippet_len]
                .iter()
                .map(|x| x.translation)
                .collect();
            let g: Vec<_> = gt[start..start + snippet_len]
                .iter()
                .map(|x| x.translation)
                .collect();
            let sim = align_similarity(&p, &g);
            let se: f64 = p
                .iter()
                .zip(&g)
                .map(|(a, b)| (sim.apply(a) - b).norm_squared())
                .sum();
            (se / snippet_len as f64).sqrt()
        })
        .collect();
    let n = per_snippet.len() as f64;
    let mean = per_snippet.iter().sum::<f64>() / n;
    let std = (per_snippet.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(AteResult {
        mean,
        std,
        snippet_len,
        per_snippet,
    })
}
