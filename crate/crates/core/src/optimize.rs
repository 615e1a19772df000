//! Direct gradient descent on the combined loss of one frame pair.
//!
//! The free variables are the log-depths of both frames and the pose
//! vector. Depth is parameterized by its logarithm so it stays positive.

use serde::{Deserialize, Serialize};

use crate::camera::{DepthMap, Intrinsics};
use crate::error::{Error, Result};
use crate::losses::{total_loss, DepthPair, FramePair, LossConfig, LossWeights, TermValues};
use crate::pyramid;
use crate::se3::{Pose, PoseVector};
use crate::synth::SyntheticPair;

/// A depth map stored as `ln(depth)`; invalid pixels stay invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDepth {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl LogDepth {
    pub fn from_depth(d: &DepthMap) -> Self {
        Self {
            width: d.width(),
            height: d.height(),
            values: d
                .values()
                .iter()
                .zip(d.validity())
                .map(|(v, ok)| if *ok { v.ln() } else { 0.0 })
                .collect(),
            valid: d.validity().to_vec(),
        }
    }

    pub fn to_depth(&self) -> Result<DepthMap> {
        DepthMap::with_validity(
            self.width,
            self.height,
            self.values
                .iter()
                .zip(&self.valid)
                .map(|(v, ok)| if *ok { v.exp() } else { 0.0 })
                .collect(),
            self.valid.clone(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub log_depth_prev: LogDepth,
    pub log_depth_cur: LogDepth,
    pub pose: PoseVector,
    pub iteration: usize,
    /// Combined loss at every evaluated iterate, starting with the initial one.
    pub history: Vec<f64>,
}

impl OptimState {
    pub fn new(depths: &DepthPair, pose: PoseVector) -> Self {
        Self {
            log_depth_prev: LogDepth::from_depth(&depths.prev),
            log_depth_cur: LogDepth::from_depth(&depths.cur),
            pose,
            iteration: 0,
            history: Vec::new(),
        }
    }

    pub fn depths(&self) -> Result<DepthPair> {
        Ok(DepthPair {
            prev: self.log_depth_prev.to_depth()?,
            cur: self.log_depth_cur.to_depth()?,
        })
    }
}

/// Adam moment decay rates and stabilizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    /// Step on log-depth per unit of per-pixel gradient.
    pub depth_step: f64,
    /// Step on the pose vector. For summed losses the pose gradient is
    /// divided by the full-resolution pixel count before stepping.
    pub pose_step: f64,
    pub max_iterations: usize,
    pub loss: LossConfig,
    /// Stop when the mean loss over the last `window` iterates differs from
    /// the mean over the `window` before by less than this fraction.
    pub rel_tol: f64,
    pub window: usize,
    /// Stop as soon as the combined loss is at or below this.
    pub abs_tol: f64,
    pub optimize_depth_prev: bool,
    pub optimize_depth_cur: bool,
    pub optimize_pose: bool,
    /// Adam-style scaling of the steps instead of plain gradient descent.
    pub adam: Option<AdamParams>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            depth_step: 1e-2,
            pose_step: 1e-4,
            max_iterations: 2000,
            loss: LossConfig::default(),
            rel_tol: 1e-6,
            window: 10,
            abs_tol: 1e-9,
            optimize_depth_prev: true,
            optimize_depth_cur: true,
            optimize_pose: true,
            adam: None,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.depth_step > 0.0 && self.pose_step > 0.0) {
            return Err(Error::InvalidParameter(
                "step sizes must be positive".into(),
            ));
        }
        if !(1..=pyramid::LEVELS).contains(&self.loss.scales) {
            return Err(Error::InvalidParameter(format!(
                "scales must be in 1..={}, got {}",
                pyramid::LEVELS,
                self.loss.scales
            )));
        }
        if self.window == 0 || !(self.rel_tol >= 0.0 && self.abs_tol >= 0.0) {
            return Err(Error::InvalidParameter(
                "invalid convergence settings".into(),
            ));
        }
        self.loss.weights.validate()
    }
}

/// One evaluated iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub combined: f64,
    pub totals: TermValues,
    pub pose: PoseVector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    pub converged: bool,
}

struct Adam {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn direction(&mut self, g: &[f64]) -> Vec<f64> {
        if self.m.is_empty() {
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
        }
        self.t += 1;
        let AdamParams {
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let (c1, c2) = (1.0 - beta1.powi(self.t), 1.0 - beta2.powi(self.t));
        g.iter()
            .enumerate()
            .map(|(n, gi)| {
                self.m[n] = beta1 * self.m[n] + (1.0 - beta1) * gi;
                self.v[n] = beta2 * self.v[n] + (1.0 - beta2) * gi * gi;
                (self.m[n] / c1) / ((self.v[n] / c2).sqrt() + epsilon)
            })
            .collect()
    }
}

fn converged_by_window(history: &[f64], window: usize, rel_tol: f64) -> bool {
    let n = history.len();
    if n < 2 * window {
        return false;
    }
    let recent: f64 = history[n - window..].iter().sum::<f64>() / window as f64;
    let before: f64 = history[n - 2 * window..n - window].iter().sum::<f64>() / window as f64;
    (before - recent).abs() <= rel_tol * before.abs().max(f64::MIN_POSITIVE)
}

/// Descends the combined loss from `init`. Returns the final state and the
/// per-iteration trace.
pub fn optimize_pair(
    frames: &FramePair,
    k: &Intrinsics,
    init: &OptimState,
    cfg: &OptimConfig,
) -> Result<(OptimState, Trace)> {
    cfg.validate()?;
    pyramid::check_divisible(k.width, k.height)?;
    let mut state = init.clone();
    let mut entries = Vec::new();
    let mut adam = cfg.adam.map(|params| Adam {
        params,
        m: Vec::new(),
        v: Vec::new(),
        t: 0,
    });
    let pose_scale = if cfg.loss.normalize {
        1.0
    } else {
        1.0 / (k.width * k.height) as f64
    };
    let mut converged = false;

    loop {
        let depths = state.depths()?;
        let b = total_loss(frames, &depths, &state.pose, k, &cfg.loss)?;
        if !b.combined.is_finite() {
            return Err(Error::NonFinite {
                term: "combined",
                scale: 0,
                direction: "both",
                pixel: None,
            });
        }
        state.history.push(b.combined);
        entries.push(TraceEntry {
            iteration: state.iteration,
            combined: b.combined,
            totals: b.totals,
            pose: state.pose,
        });
        if b.combined <= cfg.abs_tol || converged_by_window(&state.history, cfg.window, cfg.rel_tol)
        {
            converged = true;
            break;
        }
        if state.iteration >= cfg.max_iterations {
            break;
        }

        // gradient with respect to log-depth is d * dL/dD
        let chain = |g: &[f64], d: &DepthMap| -> Vec<f64> {
            g.iter().zip(d.values()).map(|(g, d)| g * d).collect()
        };
        let mut grads: Vec<f64> = Vec::new();
        let n_px = k.width * k.height;
        if cfg.optimize_depth_prev {
            grads.extend(chain(&b.grad_depth_prev, &depths.prev));
        }
        if cfg.optimize_depth_cur {
            grads.extend(chain(&b.grad_depth_cur, &depths.cur));
        }
        if cfg.optimize_pose {
            grads.extend(b.grad_pose.iter().map(|g| g * pose_scale));
        }
        let dir = match adam.as_mut() {
            Some(a) => a.direction(&grads),
            None => grads,
        };
        let mut off = 0;
        for (flag, ld) in [
            (cfg.optimize_depth_prev, &mut state.log_depth_prev),
            (cfg.optimize_depth_cur, &mut state.log_depth_cur),
        ] {
            if !flag {
                continue;
            }
            for (n, v) in ld.values.iter_mut().enumerate() {
                if ld.valid[n] {
                    *v -= cfg.depth_step * dir[off + n];
                }
            }
            if let Some(n) = ld.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    term: "log depth",
                    scale: 0,
                    direction: "update",
                    pixel: Some((n % k.width, n / k.width)),
                });
            }
            off += n_px;
        }
        if cfg.optimize_pose {
            for p in 0..6 {
                state.pose.0[p] -= cfg.pose_step * dir[off + p];
            }
            if state.pose.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    term: "pose",
                    scale: 0,
                    direction: "update",
                    pixel: None,
                });
            }
        }
        state.iteration += 1;
    }
    Ok((state, Trace { entries, converged }))
}

/// A loss term that an ablation can switch off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Term {
    Reconstruction,
    Alignment3d,
    Smoothness,
    Ssim,
}

impl Term {
    pub const ALL: [Term; 4] = [
        Term::Reconstruction,
        Term::Alignment3d,
        Term::Smoothness,
        Term::Ssim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Reconstruction => "reconstruction",
            Term::Alignment3d => "alignment-3d",
            Term::Smoothness => "smoothness",
            Term::Ssim => "ssim",
        }
    }

    fn zero(self, w: &mut LossWeights) {
        match self {
            Term::Reconstruction => w.alpha = 0.0,
            Term::Alignment3d => w.beta = 0.0,
            Term::Smoothness => w.gamma = 0.0,
            Term::Ssim => w.omega = 0.0,
        }
    }
}

impl std::str::FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reconstruction" | "rec" | "alpha" => Ok(Term::Reconstruction),
            "alignment-3d" | "3d" | "icp" | "beta" => Ok(Term::Alignment3d),
            "smoothness" | "sm" | "gamma" => Ok(Term::Smoothness),
            "ssim" | "omega" => Ok(Term::Ssim),
            other => Err(Error::InvalidParameter(format!(
                "unknown loss term {other:?}"
            ))),
        }
    }
}

/// Errors of an estimate against the ground truth of a synthetic pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateErrors {
    /// Mean `|D - D*| / D*` over valid pixels of frame `t-1`.
    pub depth_prev: f64,
    /// Same for frame `t`.
    pub depth_cur: f64,
    pub rotation_deg: f64,
    /// `|t - t*|`, scene units.
    pub translation: f64,
}

impl EstimateErrors {
    pub fn depth(&self) -> f64 {
        0.5 * (self.depth_prev + self.depth_cur)
    }
}

pub fn mean_relative_depth_error(est: &DepthMap, truth: &DepthMap) -> f64 {
    let (sum, n) = est
        .values()
        .iter()
        .zip(truth.values())
        .zip(est.validity().iter().zip(truth.validity()))
        .filter(|(_, (a, b))| **a && **b)
        .fold((0.0, 0usize), |(s, n), ((e, t), _)| {
            (s + (e - t).abs() / t, n + 1)
        });
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn estimate_errors(
    state: &OptimState,
    truth_depths: &DepthPair,
    truth_pose: &Pose,
) -> Result<EstimateErrors> {
    let d = state.depths()?;
    let est = state.pose.to_pose()?;
    let diff = est.compose(&truth_pose.inverse());
    Ok(EstimateErrors {
        depth_prev: mean_relative_depth_error(&d.prev, &truth_depths.prev),
        depth_cur: mean_relative_depth_error(&d.cur, &truth_depths.cur),
        rotation_deg: diff.angle().to_degrees(),
        translation: (est.translation - truth_pose.translation).norm(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRun {
    pub disabled: Vec<Term>,
    pub weights: LossWeights,
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub errors: EstimateErrors,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub initial: EstimateErrors,
    pub runs: Vec<AblationRun>,
}

fn run_with(
    pair: &SyntheticPair,
    init: &OptimState,
    cfg: &OptimConfig,
    disabled: &[Term],
) -> Result<AblationRun> {
    let mut cfg = *cfg;
    for t in disabled {
        t.zero(&mut cfg.loss.weights);
    }
    let (state, trace) = optimize_pair(&pair.frames, &pair.intrinsics, init, &cfg)?;
    Ok(AblationRun {
        disabled: disabled.to_vec(),
        weights: cfg.loss.weights,
        iterations: state.iteration,
        converged: trace.converged,
        final_loss: *state.history.last().unwrap_or(&f64::NAN),
        errors: estimate_errors(&state, &pair.depths, &pair.pose)?,
    })
}

/// Runs the full loss and the loss with every term in `disable` switched
/// off, from the same start, and reports both side by side.
pub fn ablate(
    pair: &SyntheticPair,
    init: &OptimState,
    cfg: &OptimConfig,
    disable: &[Term],
) -> Result<AblationReport> {
    ablate_configs(pair, init, cfg, &[vec![], disable.to_vec()])
}

/// One run per entry of `configs`, each listing the terms it disables.
pub fn ablate_configs(
    pair: &SyntheticPair,
    init: &OptimState,
    cfg: &OptimConfig,
    configs: &[Vec<Term>],
) -> Result<AblationReport> {
    let runs = configs
        .iter()
        .map(|d| run_with(pair, init, cfg, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        initial: estimate_errors(init, &pair.depths, &pair.pose)?,
        runs,
    })
}
