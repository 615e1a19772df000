//! Photometric, structural-similarity, smoothness and combined losses.
//!
//! Every term is a sum over pixels and returns its gradient alongside the
//! value. [`total_loss`] evaluates all four terms at every pyramid level in
//! both directions of a frame pair and pulls the gradients back onto the two
//! full-resolution depth maps and the pose vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{backproject, DepthMap, Intrinsics, PointCloud};
use crate::error::{Error, Result};
use crate::icp::{loss_3d, IcpParams};
use crate::image::{Image, Mask, LUMA_WEIGHTS};
use crate::pyramid::{self, Pyramid};
use crate::se3::{transform_cloud, Pose, PoseVector};
use crate::warp::{check_same_shape, warp, warp_inverse, WarpResult};

/// A loss value with its gradient with respect to one input.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGrad {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Norm applied to the per-pixel intensity difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhotometricNorm {
    /// Sum of absolute channel differences.
    #[default]
    L1,
    /// Sum of squared channel differences.
    SquaredL2,
}

fn check_mask(what: &'static str, img: &Image, m: &Mask) -> Result<()> {
    if img.dims() != m.dims() {
        return Err(Error::dims(what, m.dims(), img.dims()));
    }
    Ok(())
}

/// `sum_ij |x - x_hat|_1 m_ij`; gradient with respect to `x_hat`.
pub fn reconstruction_loss(x: &Image, x_hat: &Image, m: &Mask) -> Result<TermGrad> {
    reconstruction_loss_with(x, x_hat, m, PhotometricNorm::L1)
}

pub fn reconstruction_loss_with(
    x: &Image,
    x_hat: &Image,
    m: &Mask,
    norm: PhotometricNorm,
) -> Result<TermGrad> {
    check_same_shape("reconstruction", x, x_hat)?;
    check_mask("mask", x, m)?;
    if x.channels() != x_hat.channels() {
        return Err(Error::InvalidParameter("channel counts differ".into()));
    }
    let c = x.channels();
    let mut value = 0.0;
    let mut gradient = vec![0.0; x.data().len()];
    for (idx, on) in m.data().iter().enumerate() {
        if !on {
            continue;
        }
        for ch in idx * c..(idx + 1) * c {
            let e = x.data()[ch] - x_hat.data()[ch];
            match norm {
                PhotometricNorm::L1 => {
                    value += e.abs();
                    gradient[ch] = if e > 0.0 {
                        -1.0
                    } else if e < 0.0 {
                        1.0
                    } else {
                        0.0
                    };
                }
                PhotometricNorm::SquaredL2 => {
                    value += e * e;
                    gradient[ch] = -2.0 * e;
                }
            }
        }
    }
    Ok(TermGrad { value, gradient })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    /// Side of the square pooling window (odd).
    pub window: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 3,
            c1: 0.01 * 0.01,
            c2: 0.03 * 0.03,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::InvalidParameter(
                "SSIM constants must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.window / 2
    }
}

/// Window statistics and SSIM partials at one centre.
struct Window {
    ssim: f64,
    /// dS/d mu_y, dS/d E[y^2], dS/d E[xy].
    d_mu_y: f64,
    d_eyy: f64,
    d_exy: f64,
}

fn window_at(x: &[f64], y: &[f64], w: usize, i: usize, j: usize, p: &SsimParams) -> Window {
    let r = p.radius();
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for yy in j - r..=j + r {
        for xx in i - r..=i + r {
            let (a, b) = (x[yy * w + xx], y[yy * w + xx]);
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
    }
    let n = (p.window * p.window) as f64;
    let (mx, my) = (sx / n, sy / n);
    let (exx, eyy, exy) = (sxx / n, syy / n, sxy / n);
    let a1 = 2.0 * mx * my + p.c1;
    let a2 = 2.0 * (exy - mx * my) + p.c2;
    let b1 = mx * mx + my * my + p.c1;
    let b2 = (exx - mx * mx) + (eyy - my * my) + p.c2;
    let den = b1 * b2;
    let ssim = a1 * a2 / den;
    Window {
        ssim,
        d_mu_y: 2.0 * mx * (a2 - a1) / den - ssim * (2.0 * my / b1 - 2.0 * my / b2),
        d_eyy: -ssim / b2,
        d_exy: 2.0 * a1 / den,
    }
}

fn luminance_of(img: &Image) -> Vec<f64> {
    img.luminance().data().to_vec()
}

/// Per-pixel SSIM of the luminances of `x` and `y`; `None` where the window
/// does not fit inside the image.
pub fn ssim_map(x: &Image, y: &Image, p: &SsimParams) -> Result<Vec<Option<f64>>> {
    p.validate()?;
    check_same_shape("SSIM", x, y)?;
    check_window_fits(x, p)?;
    let (w, h) = x.dims();
    let (lx, ly) = (luminance_of(x), luminance_of(y));
    let r = p.radius();
    Ok((0..w * h)
        .map(|idx| {
            let (i, j) = (idx % w, idx / w);
            (i >= r && j >= r && i + r < w && j + r < h)
                .then(|| window_at(&lx, &ly, w, i, j, p).ssim)
        })
        .collect())
}

fn check_window_fits(x: &Image, p: &SsimParams) -> Result<()> {
    if x.width() < p.window || x.height() < p.window {
        return Err(Error::InvalidParameter(format!(
            "image {}x{} is smaller than the {}x{} SSIM window",
            x.width(),
            x.height(),
            p.window,
            p.window
        )));
    }
    Ok(())
}

/// `sum_ij (1 - SSIM_ij) m'_ij` where `m'` is `m` eroded by the window
/// radius; gradient with respect to `x_hat` (all channels for RGB input).
pub fn ssim_loss(x: &Image, x_hat: &Image, m: &Mask, p: &SsimParams) -> Result<TermGrad> {
    p.validate()?;
    check_same_shape("SSIM", x, x_hat)?;
    check_mask("mask", x, m)?;
    check_window_fits(x, p)?;
    let (w, h) = x.dims();
    let r = p.radius();
    let (lx, ly) = (luminance_of(x), luminance_of(x_hat));
    let centres = m.erode(r);
    let n = (p.window * p.window) as f64;

    let mut value = 0.0;
    let mut grad_lum = vec![0.0; w * h];
    for j in r..h - r {
        for i in r..w - r {
            if !centres.get(i, j) {
                continue;
            }
            let win = window_at(&lx, &ly, w, i, j, p);
            // rounding can push SSIM a hair above 1
            value += (1.0 - win.ssim).max(0.0);
            for yy in j - r..=j + r {
                for xx in i - r..=i + r {
                    let q = yy * w + xx;
                    let ds = win.d_mu_y + 2.0 * win.d_eyy * ly[q] + win.d_exy * lx[q];
                    grad_lum[q] -= ds / n;
                }
            }
        }
    }

    let c = x_hat.channels();
    let gradient = if c == 1 {
        grad_lum
    } else {
        grad_lum
            .iter()
            .flat_map(|g| LUMA_WEIGHTS.map(|lw| g * lw))
            .collect()
    };
    Ok(TermGrad { value, gradient })
}

/// Edge-aware smoothness `sum |d D| exp(-|d X|)` over horizontal and
/// vertical forward differences; gradient with respect to the depth values.
/// Differences touching an invalid depth are skipped.
pub fn smoothness_loss(depth: &DepthMap, image: &Image) -> Result<TermGrad> {
    if depth.dims() != image.dims() {
        return Err(Error::dims("depth map", depth.dims(), image.dims()));
    }
    let (w, h) = depth.dims();
    let (d, ok) = (depth.values(), depth.validity());
    let c = image.channels();
    let img = image.data();
    let mut value = 0.0;
    let mut gradient = vec![0.0; w * h];
    let mut pair = |a: usize, b: usize| {
        if !(ok[a] && ok[b]) {
            return;
        }
        let edge: f64 = (0..c)
            .map(|ch| (img[b * c + ch] - img[a * c + ch]).abs())
            .sum();
        let weight = (-edge).exp();
        let diff = d[b] - d[a];
        value += diff.abs() * weight;
        let s = if diff > 0.0 {
            weight
        } else if diff < 0.0 {
            -weight
        } else {
            0.0
        };
        gradient[b] += s;
        gradient[a] -= s;
    };
    for j in 0..h {
        for i in 0..w {
            let idx = j * w + i;
            if i + 1 < w {
                pair(idx, idx + 1);
            }
            if j + 1 < h {
                pair(idx, idx + w);
            }
        }
    }
    Ok(TermGrad { value, gradient })
}

/// Weights of the combined loss: reconstruction, 3-d, smoothness, SSIM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            beta: 0.1,
            gamma: 0.05,
            omega: 0.15,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma, self.omega];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "loss weights must be finite and >= 0, got {all:?}"
            )));
        }
        Ok(())
    }

    pub fn combine(&self, t: &TermValues) -> f64 {
        self.alpha * t.reconstruction
            + self.beta * t.alignment_3d
            + self.gamma * t.smoothness
            + self.omega * t.ssim
    }
}

/// Values of the four terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermValues {
    pub reconstruction: f64,
    pub alignment_3d: f64,
    pub ssim: f64,
    pub smoothness: f64,
}

impl TermValues {
    fn add(&mut self, o: &TermValues) {
        self.reconstruction += o.reconstruction;
        self.alignment_3d += o.alignment_3d;
        self.ssim += o.ssim;
        self.smoothness += o.smoothness;
    }
}

/// Both directions at one pyramid level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleBreakdown {
    pub scale: usize,
    pub width: usize,
    pub height: usize,
    /// Reconstructing frame `t` from frame `t-1`.
    pub forward: TermValues,
    /// Reconstructing frame `t-1` from frame `t`.
    pub backward: TermValues,
    /// Weighted sum for this level.
    pub combined: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub scales: Vec<ScaleBreakdown>,
    /// Per-term sums over scales and directions.
    pub totals: TermValues,
    pub combined: f64,
    pub weights: LossWeights,
    /// `dL / dD_{t-1}` at full resolution.
    #[serde(skip)]
    pub grad_depth_prev: Vec<f64>,
    /// `dL / dD_t` at full resolution.
    #[serde(skip)]
    pub grad_depth_cur: Vec<f64>,
    /// `dL / d pose_vector`.
    pub grad_pose: [f64; 6],
}

impl LossBreakdown {
    /// Recomputes the combined value from the per-scale parts.
    pub fn recombine(&self, w: &LossWeights) -> f64 {
        self.scales
            .iter()
            .map(|s| w.combine(&s.forward) + w.combine(&s.backward))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub weights: LossWeights,
    /// Pyramid levels used, `1..=4`.
    pub scales: usize,
    pub ssim: SsimParams,
    pub icp: IcpParams,
    pub norm: PhotometricNorm,
    /// Divide every term at a level by that level's pixel count.
    pub normalize: bool,
    /// Skip evaluating terms whose weight is zero; they then report 0.
    pub skip_zero_weight: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            scales: pyramid::LEVELS,
            ssim: SsimParams::default(),
            icp: IcpParams::default(),
            norm: PhotometricNorm::L1,
            normalize: false,
            skip_zero_weight: false,
        }
    }
}

/// Two consecutive frames.
#[derive(Debug, Clone)]
pub struct FramePair {
    /// `X_{t-1}`.
    pub prev: Image,
    /// `X_t`.
    pub cur: Image,
}

/// Depth estimates for both frames of a pair.
#[derive(Debug, Clone)]
pub struct DepthPair {
    pub prev: DepthMap,
    pub cur: DepthMap,
}

struct DirectionOut {
    terms: TermValues,
    /// Gradient on this direction's depth map at the level's resolution.
    grad_depth: Vec<f64>,
    grad_pose: [f64; 6],
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

fn first_non_finite(values: &[f64], w: usize, per_pixel: usize) -> Option<(usize, usize)> {
    values
        .iter()
        .position(|v| !v.is_finite())
        .map(|p| ((p / per_pixel) % w, (p / per_pixel) / w))
}

fn check_finite(
    term: &'static str,
    scale: usize,
    dir: Direction,
    value: f64,
    grad: &[f64],
    w: usize,
    per_pixel: usize,
) -> Result<()> {
    let pixel = first_non_finite(grad, w, per_pixel);
    if !value.is_finite() || pixel.is_some() {
        return Err(Error::NonFinite {
            term,
            scale,
            direction: dir.name(),
            pixel,
        });
    }
    Ok(())
}

/// Chains an image-space gradient through a warp onto depth and pose.
fn chain_warp(
    g: &[f64],
    wr: &WarpResult,
    scale: f64,
    grad_depth: &mut [f64],
    grad_pose: &mut [f64; 6],
) {
    let c = wr.image.channels();
    for (px, gd) in grad_depth.iter_mut().enumerate() {
        for ch in px * c..(px + 1) * c {
            let gi = g[ch];
            if gi == 0.0 {
                continue;
            }
            *gd += scale * gi * wr.d_depth[ch];
            for (gp, dp) in grad_pose.iter_mut().zip(&wr.d_pose[ch]) {
                *gp += scale * gi * dp;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn direction(
    dir: Direction,
    scale: usize,
    target: &Image,
    source: &Image,
    depth: &DepthMap,
    other_depth: &DepthMap,
    pose: &PoseVector,
    t: &Pose,
    k: &Intrinsics,
    cfg: &LossConfig,
) -> Result<DirectionOut> {
    let w8 = &cfg.weights;
    let (w, h) = k.dims();
    let norm = if cfg.normalize {
        1.0 / (w * h) as f64
    } else {
        1.0
    };
    let c = target.channels();
    let wants = |weight: f64| !(cfg.skip_zero_weight && weight == 0.0);

    let wr = match dir {
        Direction::Forward => warp(source, depth, pose, k)?,
        Direction::Backward => warp_inverse(source, depth, pose, k)?,
    };
    let mut terms = TermValues::default();
    let mut grad_depth = vec![0.0; w * h];
    let mut grad_pose = [0.0; 6];

    if wants(w8.alpha) {
        let rec = reconstruction_loss_with(target, &wr.image, &wr.mask, cfg.norm)?;
        check_finite("reconstruction", scale, dir, rec.value, &rec.gradient, w, c)?;
        terms.reconstruction = rec.value * norm;
        chain_warp(
            &rec.gradient,
            &wr,
            w8.alpha * norm,
            &mut grad_depth,
            &mut grad_pose,
        );
    }
    if wants(w8.omega) {
        let ss = ssim_loss(target, &wr.image, &wr.mask, &cfg.ssim)?;
        check_finite("ssim", scale, dir, ss.value, &ss.gradient, w, c)?;
        terms.ssim = ss.value * norm;
        chain_warp(
            &ss.gradient,
            &wr,
            w8.omega * norm,
            &mut grad_depth,
            &mut grad_pose,
        );
    }
    if wants(w8.gamma) {
        let sm = smoothness_loss(depth, target)?;
        check_finite("smoothness", scale, dir, sm.value, &sm.gradient, w, 1)?;
        terms.smoothness = sm.value * norm;
        for (g, s) in grad_depth.iter_mut().zip(&sm.gradient) {
            *g += w8.gamma * norm * s;
        }
    }
    if wants(w8.beta) {
        let applied = match dir {
            Direction::Forward => *t,
            Direction::Backward => t.inverse(),
        };
        let mut pred = transform_cloud(&applied, &backproject(depth, k)?);
        pred.restrict(wr.mask.data());
        let obs: PointCloud = backproject(other_depth, k)?;
        let l = loss_3d(&pred, &obs, &cfg.icp)?;
        let dg = l.depth_gradient(&applied.rotation, k);
        check_finite("alignment_3d", scale, dir, l.value, &dg, w, 1)?;
        terms.alignment_3d = l.value * norm;
        let increment = match dir {
            Direction::Forward => l.pose_gradient,
            Direction::Backward => {
                // correction C applied to T^-1 on the left is T C^-1 T^-1 on T
                let c = l.icp.transform;
                let left = t.compose(&c.inverse()).compose(&t.inverse());
                left.to_vector()?.0.map(|x| -x)
            }
        };
        let gp = pose.left_increment_to_delta(&increment);
        for (a, b) in grad_pose.iter_mut().zip(gp) {
            *a += w8.beta * norm * b;
        }
        for (g, d) in grad_depth.iter_mut().zip(&dg) {
            *g += w8.beta * norm * d;
        }
    }
    if grad_pose.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            term: "pose gradient",
            scale,
            direction: dir.name(),
            pixel: None,
        });
    }
    Ok(DirectionOut {
        terms,
        grad_depth,
        grad_pose,
    })
}

/// The combined multi-scale loss of a frame pair under depth estimates for
/// both frames and the ego-motion `pose` (frame `t` to frame `t-1`), with
/// gradients with respect to both full-resolution depth maps and `pose`.
pub fn total_loss(
    frames: &FramePair,
    depths: &DepthPair,
    pose: &PoseVector,
    k: &Intrinsics,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.weights.validate()?;
    cfg.ssim.validate()?;
    cfg.icp.validate()?;
    check_same_shape("frame t", &frames.prev, &frames.cur)?;
    if frames.prev.channels() != frames.cur.channels() {
        return Err(Error::InvalidParameter(
            "frames have different channel counts".into(),
        ));
    }
    let t = pose.to_pose()?;
    let prev = pyramid::build_levels(&frames.prev, &depths.prev, k, cfg.scales)?;
    let cur = pyramid::build_levels(&frames.cur, &depths.cur, k, cfg.scales)?;

    let per_scale: Vec<Result<(DirectionOut, DirectionOut)>> = (0..cfg.scales)
        .into_par_iter()
        .map(|s| {
            let (lp, lc) = (&prev.levels[s], &cur.levels[s]);
            let ks = &lc.intrinsics;
            let fwd = direction(
                Direction::Forward,
                s,
                &lc.image,
                &lp.image,
                &lc.depth,
                &lp.depth,
                pose,
                &t,
                ks,
                cfg,
            )?;
            let bwd = direction(
                Direction::Backward,
                s,
                &lp.image,
                &lc.image,
                &lp.depth,
                &lc.depth,
                pose,
                &t,
                ks,
                cfg,
            )?;
            Ok((fwd, bwd))
        })
        .collect();

    let mut scales = Vec::with_capacity(cfg.scales);
    let mut totals = TermValues::default();
    let mut grad_pose = [0.0; 6];
    let mut level_grads_prev = Vec::with_capacity(cfg.scales);
    let mut level_grads_cur = Vec::with_capacity(cfg.scales);
    for (s, res) in per_scale.into_iter().enumerate() {
        let (fwd, bwd) = res?;
        let (w, h) = cur.levels[s].intrinsics.dims();
        totals.add(&fwd.terms);
        totals.add(&bwd.terms);
        for (p, (f, b)) in grad_pose
            .iter_mut()
            .zip(fwd.grad_pose.iter().zip(&bwd.grad_pose))
        {
            *p += f + b;
        }
        scales.push(ScaleBreakdown {
            scale: s,
            width: w,
            height: h,
            forward: fwd.terms,
            backward: bwd.terms,
            combined: cfg.weights.combine(&fwd.terms) + cfg.weights.combine(&bwd.terms),
        });
        level_grads_cur.push(fwd.grad_depth);
        level_grads_prev.push(bwd.grad_depth);
    }

    let pull_back = |pyr: &Pyramid, mut grads: Vec<Vec<f64>>| -> Vec<f64> {
        for s in (1..grads.len()).rev() {
            let coarse = std::mem::take(&mut grads[s]);
            pyramid::accumulate_depth_gradient(
                &pyr.levels[s - 1].depth,
                &coarse,
                &mut grads[s - 1],
            );
        }
        grads.swap_remove(0)
    };
    let grad_depth_prev = pull_back(&prev, level_grads_prev);
    let grad_depth_cur = pull_back(&cur, level_grads_cur);

    let combined = scales.iter().map(|s| s.combined).sum();
    Ok(LossBreakdown {
        scales,
        totals,
        combined,
        weights: cfg.weights,
        grad_depth_prev,
        grad_depth_cur,
        grad_pose,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        Image::from_fn(w, h, 1, |i, j, _| f(i, j)).unwrap()
    }

    #[test]
    fn reconstruction_examples() {
        let x = img(4, 3, |i, j| 0.1 * (i + j) as f64);
        let full = Mask::full(4, 3);
        assert_eq!(reconstruction_loss(&x, &x, &full).unwrap().value, 0.0);

        let y = img(4, 3, |_, _| 0.9);
        let none = Mask::new(4, 3, vec![false; 12]).unwrap();
        let r = reconstruction_loss(&x, &y, &none).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.gradient.iter().all(|g| *g == 0.0));

        let y = img(4, 3, |i, j| {
            if (i, j) == (2, 1) {
                0.8
            } else {
                0.1 * (i + j) as f64
            }
        });
        // x(2,1) = 0.3, x_hat = 0.8
        let r = reconstruction_loss(&x, &y, &full).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert_eq!(r.gradient[6], 1.0);
        assert_eq!(r.gradient.iter().filter(|g| **g != 0.0).count(), 1);
    }

    #[test]
    fn squared_l2_variant() {
        let x = img(2, 2, |_, _| 0.5);
        let y = img(2, 2, |i, _| if i == 0 { 0.25 } else { 0.5 });
        let r = reconstruction_loss_with(&x, &y, &Mask::full(2, 2), PhotometricNorm::SquaredL2)
            .unwrap();
        assert!((r.value - 2.0 * 0.0625).abs() < 1e-15);
        assert_eq!(r.gradient[0], -0.5);
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let x = img(8, 8, |i, j| ((i * 7 + j * 3) % 11) as f64 / 10.0);
        let map = ssim_map(&x, &x, &SsimParams::default()).unwrap();
        for v in map.iter().flatten() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(map.iter().flatten().count(), 36);
        let l = ssim_loss(&x, &x, &Mask::full(8, 8), &SsimParams::default()).unwrap();
        assert!(l.value.abs() < 1e-12);
        assert!(l.gradient.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn ssim_constant_patches_closed_form() {
        let p = SsimParams::default();
        for (a, b) in [(0.2, 0.5), (0.9, 0.1), (0.4, 0.4), (0.0, 1.0)] {
            let x = img(5, 5, |_, _| a);
            let y = img(5, 5, |_, _| b);
            let want = (2.0 * a * b + p.c1) / (a * a + b * b + p.c1);
            for v in ssim_map(&x, &y, &p).unwrap().iter().flatten() {
                assert!((v - want).abs() < 1e-12, "{v} vs {want}");
            }
        }
    }

    #[test]
    fn ssim_window_too_large() {
        let x = img(2, 2, |_, _| 0.5);
        assert!(ssim_map(&x, &x, &SsimParams::default()).is_err());
        let bad = SsimParams {
            window: 4,
            ..Default::default()
        };
        let x = img(8, 8, |_, _| 0.5);
        assert!(ssim_map(&x, &x, &bad).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let stripes = img(6, 4, |i, _| if i % 2 == 0 { 0.0 } else { 1.0 });
        let flat = DepthMap::constant(6, 4, 3.0).unwrap();
        assert_eq!(smoothness_loss(&flat, &stripes).unwrap().value, 0.0);

        let h = 0.7;
        let step = DepthMap::from_fn(6, 4, |i, _| if i < 3 { 2.0 } else { 2.0 + h }).unwrap();
        let uniform = img(6, 4, |_, _| 0.5);
        let v = smoothness_loss(&step, &uniform).unwrap().value;
        // one horizontal step per row
        assert!((v - 4.0 * h).abs() < 1e-12);

        let g = 0.6;
        let edge = img(6, 4, |i, _| if i < 3 { 0.2 } else { 0.2 + g });
        let v = smoothness_loss(&step, &edge).unwrap().value;
        assert!((v - 4.0 * h * (-g).exp()).abs() < 1e-12);
        assert!(v < 4.0 * h);
    }

    #[test]
    fn default_weights() {
        let w = LossWeights::default();
        assert_eq!((w.alpha, w.beta, w.gamma, w.omega), (0.85, 0.1, 0.05, 0.15));
        assert!(LossWeights { beta: -1.0, ..w }.validate().is_err());
    }
}
