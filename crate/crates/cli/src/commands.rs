use std::path::Path;

use egodepth::camera::DepthMap;
use egodepth::icp::{icp, DistanceMode, IcpParams};
use egodepth::image::{Image, Mask};
use egodepth::io::{self, PlyCloud};
use egodepth::losses::{total_loss, LossConfig, PhotometricNorm};
use egodepth::metrics::{ate, depth_metrics_with, DepthEvalOptions};
use egodepth::optimize::{
    ablate_configs, estimate_errors, optimize_pair, AdamParams, OptimConfig, OptimState, Term,
};
use egodepth::se3::Pose;
use egodepth::synth::make_pair_from_spec;
use egodepth::warp::{warp, warp_inverse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::*;
use crate::inputs::{self, LoadedPair, PoseOut};
use crate::{plot, CliError, Ctx};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Run(egodepth::Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

/// JSON to a file, or to stdout when no path is given.
fn emit_json<T: Serialize>(ctx: &mut Ctx, out: Option<&Path>, value: &T) -> Result<(), CliError> {
    match out {
        Some(p) => Ok(io::write_json(p, value)?),
        None => {
            ctx.out(&io::to_json_pretty(value));
            Ok(())
        }
    }
}

fn add_noise(img: &Image, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Image, CliError> {
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut gauss = || {
        // Box-Muller
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let data = img
        .data()
        .iter()
        .map(|v| (v + sigma * gauss()).clamp(0.0, 1.0))
        .collect();
    Ok(Image::new(img.width(), img.height(), img.channels(), data)?)
}

pub fn synth(ctx: &mut Ctx, a: &SynthArgs) -> Result<(), CliError> {
    let spec = inputs::scene_spec(&a.source)?
        .ok_or_else(|| CliError::Usage("synth needs --scene or --preset".into()))?;
    if a.noise.is_nan() || a.noise < 0.0 {
        return Err(CliError::Usage("--noise must be >= 0".into()));
    }
    let pair = make_pair_from_spec(&spec)?;
    create_dir(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    io::write_image(
        &a.out.join(inputs::PREV_IMAGE),
        &add_noise(&pair.frames.prev, a.noise, &mut rng)?,
    )?;
    io::write_image(
        &a.out.join(inputs::CUR_IMAGE),
        &add_noise(&pair.frames.cur, a.noise, &mut rng)?,
    )?;
    io::write_depth(&a.out.join(inputs::DEPTH_PREV), &pair.depths.prev)?;
    io::write_depth(&a.out.join(inputs::DEPTH_CUR), &pair.depths.cur)?;
    io::write_mask_png(
        &a.out.join("valid_prev.png"),
        &validity_mask(&pair.depths.prev)?,
    )?;
    io::write_mask_png(
        &a.out.join("valid_cur.png"),
        &validity_mask(&pair.depths.cur)?,
    )?;
    io::write_json(&a.out.join(inputs::INTRINSICS), &pair.intrinsics)?;
    io::write_json(&a.out.join(inputs::POSE), &PoseOut::new(spec.ego)?)?;
    io::write_json(&a.out.join(inputs::SCENE), &spec)?;
    ctx.info(&format!("wrote pair to {}", a.out.display()));
    Ok(())
}

fn validity_mask(d: &DepthMap) -> Result<Mask, CliError> {
    Ok(Mask::new(d.width(), d.height(), d.validity().to_vec())?)
}

#[derive(Serialize)]
struct WarpSummary {
    width: usize,
    height: usize,
    masked_pixels: usize,
    inverse: bool,
    pose: PoseOut,
}

pub fn warp_cmd(ctx: &mut Ctx, a: &WarpArgs) -> Result<(), CliError> {
    let image = io::read_image(&a.image)?;
    let depth = io::read_depth(&a.depth)?;
    let k = io::from_json_file(&a.intrinsics)?;
    let pose = inputs::parse_pose(&a.pose)?;
    let r = if a.inverse {
        warp_inverse(&image, &depth, &pose, &k)?
    } else {
        warp(&image, &depth, &pose, &k)?
    };
    create_dir(&a.out)?;
    io::write_image(&a.out.join("warped.png"), &r.image)?;
    io::write_mask_png(&a.out.join("mask.png"), &r.mask)?;
    let summary = WarpSummary {
        width: k.width,
        height: k.height,
        masked_pixels: r.mask.count(),
        inverse: a.inverse,
        pose: PoseOut::new(pose)?,
    };
    io::write_json(&a.out.join("warp.json"), &summary)?;
    ctx.info(&format!(
        "{} of {} pixels inside the mask",
        summary.masked_pixels,
        k.width * k.height
    ));
    Ok(())
}

#[derive(Serialize)]
struct IcpOut {
    transform: PoseOut,
    iterations: usize,
    converged: bool,
    matched: usize,
    source_points: usize,
    objective_history: Vec<f64>,
    params: IcpParams,
}

fn ply_cloud(path: &Path) -> Result<egodepth::camera::PointCloud, CliError> {
    let c = io::read_ply(path)?;
    Ok(egodepth::camera::PointCloud::unstructured(c.points))
}

pub fn icp_cmd(ctx: &mut Ctx, a: &IcpArgs) -> Result<(), CliError> {
    let source = ply_cloud(&a.source)?;
    let target = match &a.target {
        Some(t) => ply_cloud(t)?,
        None => source.clone(),
    };
    let init = match &a.init {
        Some(s) => inputs::parse_pose(s)?.to_pose()?,
        None => Pose::identity(),
    };
    let params = IcpParams {
        max_iterations: a.max_iterations,
        max_correspondence_dist: a.max_distance,
        distance_mode: match a.mode {
            IcpMode::PointToPoint => DistanceMode::PointToPoint,
            IcpMode::PointToPlane => DistanceMode::PointToPlane,
        },
        ..IcpParams::default()
    };
    let r = icp(&source, &target, &init, &params)?;
    if let Some(p) = &a.aligned {
        let moved = source
            .points()
            .iter()
            .map(|x| r.transform.apply(x))
            .collect();
        io::write_ply(
            p,
            &PlyCloud {
                points: moved,
                normals: None,
            },
        )?;
    }
    ctx.info(&format!(
        "{} iterations, {} pairs",
        r.iterations,
        r.matched()
    ));
    let out = IcpOut {
        transform: PoseOut::from_pose(&r.transform)?,
        iterations: r.iterations,
        converged: r.converged,
        matched: r.matched(),
        source_points: source.valid_count(),
        objective_history: r.objective_history.clone(),
        params,
    };
    emit_json(ctx, a.out.as_deref(), &out)
}

fn loss_config(f: &LossFlags, base: LossConfig) -> Result<LossConfig, CliError> {
    let mut cfg = base;
    let w = &mut cfg.weights;
    for (flag, slot) in [
        (f.alpha, &mut w.alpha),
        (f.beta, &mut w.beta),
        (f.gamma, &mut w.gamma),
        (f.omega, &mut w.omega),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if let Some(s) = f.scales {
        cfg.scales = s;
    }
    if let Some(n) = f.norm {
        cfg.norm = match n {
            Norm::L1 => PhotometricNorm::L1,
            Norm::SquaredL2 => PhotometricNorm::SquaredL2,
        };
    }
    if let Some(m) = f.icp_mode {
        cfg.icp.distance_mode = match m {
            IcpMode::PointToPoint => DistanceMode::PointToPoint,
            IcpMode::PointToPlane => DistanceMode::PointToPlane,
        };
    }
    if let Some(n) = f.icp_iterations {
        cfg.icp.max_iterations = n;
    }
    cfg.normalize |= f.normalize;
    cfg.skip_zero_weight |= f.skip_zero_weight;
    Ok(cfg)
}

pub fn loss(ctx: &mut Ctx, a: &LossArgs) -> Result<(), CliError> {
    let pair = inputs::load_pair(&a.pair)?;
    let (depths, pose) = inputs::estimate(&a.estimate, &pair, "loss")?;
    let cfg = loss_config(&a.loss, LossConfig::default())?;
    let b = total_loss(&pair.frames, &depths, &pose, &pair.intrinsics, &cfg)?;
    ctx.info(&format!("combined loss {:.6e}", b.combined));
    emit_json(ctx, a.out.as_deref(), &b)
}

fn optim_config(f: &OptimFlags) -> Result<OptimConfig, CliError> {
    let mut cfg = OptimConfig {
        loss: loss_config(&f.loss, LossConfig::default())?,
        ..OptimConfig::default()
    };
    if let Some(n) = f.iterations {
        cfg.max_iterations = n;
    }
    if let Some(s) = f.depth_step {
        cfg.depth_step = s;
    }
    if let Some(s) = f.pose_step {
        cfg.pose_step = s;
    }
    if f.adam {
        cfg.adam = Some(AdamParams::default());
    }
    if f.fix_pose && f.fix_depth {
        return Err(CliError::Usage(
            "--fix-pose and --fix-depth leave nothing to optimize".into(),
        ));
    }
    cfg.optimize_pose = !f.fix_pose;
    cfg.optimize_depth_prev = !f.fix_depth;
    cfg.optimize_depth_cur = !f.fix_depth;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct OptimizeSummary {
    iterations: usize,
    converged: bool,
    initial_loss: f64,
    final_loss: f64,
    pose: PoseOut,
    errors: Option<egodepth::optimize::EstimateErrors>,
    initial_errors: Option<egodepth::optimize::EstimateErrors>,
    config: OptimConfig,
    seed: u64,
}

fn truth_errors(
    pair: &LoadedPair,
    state: &OptimState,
) -> Result<Option<egodepth::optimize::EstimateErrors>, CliError> {
    match (&pair.truth_depths, pair.truth_pose) {
        (Some(d), Some(p)) => Ok(Some(estimate_errors(state, d, &p.to_pose()?)?)),
        _ => Ok(None),
    }
}

pub fn optimize(ctx: &mut Ctx, a: &OptimizeArgs) -> Result<(), CliError> {
    let cfg = optim_config(&a.optim)?;
    let pair = inputs::load_pair(&a.pair)?;
    let (depths, pose) = inputs::initial(&a.init, &pair, ctx.seed)?;
    create_dir(&a.out)?;
    let init = OptimState::new(&depths, pose);
    let (state, trace) = optimize_pair(&pair.frames, &pair.intrinsics, &init, &cfg)?;

    let fin = state.depths()?;
    io::write_depth(&a.out.join(inputs::DEPTH_PREV), &fin.prev)?;
    io::write_depth(&a.out.join(inputs::DEPTH_CUR), &fin.cur)?;
    io::write_json(&a.out.join(inputs::POSE), &PoseOut::new(state.pose)?)?;
    io::write_json(&a.out.join("trace.json"), &trace)?;
    plot::emit_trace(&a.out, &trace)?;
    let summary = OptimizeSummary {
        iterations: state.iteration,
        converged: trace.converged,
        initial_loss: state.history.first().copied().unwrap_or(f64::NAN),
        final_loss: state.history.last().copied().unwrap_or(f64::NAN),
        pose: PoseOut::new(state.pose)?,
        errors: truth_errors(&pair, &state)?,
        initial_errors: truth_errors(&pair, &init)?,
        config: cfg,
        seed: ctx.seed,
    };
    io::write_json(&a.out.join("summary.json"), &summary)?;
    ctx.info(&format!(
        "{} iterations, loss {:.6e} -> {:.6e}",
        summary.iterations, summary.initial_loss, summary.final_loss
    ));
    Ok(())
}

pub fn ablate(ctx: &mut Ctx, a: &AblateArgs) -> Result<(), CliError> {
    let mut configs = vec![Vec::new()];
    for spec in &a.disable {
        let terms = spec
            .split(',')
            .map(|t| t.trim().parse::<Term>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        configs.push(terms);
    }
    let cfg = optim_config(&a.optim)?;
    let pair = inputs::load_pair(&a.pair)?;
    let (Some(truth_depths), Some(truth_pose)) = (&pair.truth_depths, pair.truth_pose) else {
        return Err(CliError::Usage(
            "ablate scores runs against ground truth; use --scene, --preset or a synth pair directory".into(),
        ));
    };
    let (depths, pose) = inputs::initial(&a.init, &pair, ctx.seed)?;
    create_dir(&a.out)?;
    let synthetic = egodepth::synth::SyntheticPair {
        frames: pair.frames.clone(),
        depths: truth_depths.clone(),
        pose: truth_pose.to_pose()?,
        intrinsics: pair.intrinsics,
    };
    let init = OptimState::new(&depths, pose);
    let report = ablate_configs(&synthetic, &init, &cfg, &configs)?;
    io::write_json(&a.out.join("ablation.json"), &report)?;
    plot::emit_ablation(&a.out, &report)?;
    for r in &report.runs {
        let names: Vec<&str> = r.disabled.iter().map(|t| t.name()).collect();
        ctx.info(&format!(
            "disabled [{}]: depth error {:.4e}/{:.4e}",
            names.join(", "),
            r.errors.depth_prev,
            r.errors.depth_cur
        ));
    }
    Ok(())
}

pub fn eval_depth(ctx: &mut Ctx, a: &EvalDepthArgs) -> Result<(), CliError> {
    let pred = io::read_depth(&a.pred)?;
    let gt = io::read_depth(&a.gt)?;
    let crop = a.crop.as_deref().map(io::read_mask_png).transpose()?;
    let opts = DepthEvalOptions {
        cap: a.cap,
        median_scaling: !a.no_median_scaling,
        crop,
    };
    let m = depth_metrics_with(&pred, &gt, &opts)?;
    match &a.out {
        Some(p) => {
            io::write_json(p, &m)?;
            ctx.out(&m.table());
        }
        None => ctx.out(&io::to_json_pretty(&m)),
    }
    Ok(())
}

pub fn eval_odom(ctx: &mut Ctx, a: &EvalOdomArgs) -> Result<(), CliError> {
    let pred = io::read_kitti_poses(&a.pred)?;
    let gt = io::read_kitti_poses(&a.gt)?;
    let r = ate(&pred, &gt, a.snippet)?;
    match &a.out {
        Some(p) => {
            io::write_json(p, &r)?;
            ctx.out(&format!(
                "ATE {:.4} +/- {:.4} over {} snippets\n",
                r.mean,
                r.std,
                r.per_snippet.len()
            ));
        }
        None => ctx.out(&io::to_json_pretty(&r)),
    }
    Ok(())
}
