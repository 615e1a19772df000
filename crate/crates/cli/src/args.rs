use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Depth and ego-motion from frame pairs: synthetic scenes, warping, ICP,
/// losses, direct optimization and evaluation.
#[derive(Debug, Parser)]
#[command(name = "egodepth", version)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "EGODEPTH_THREADS")]
    pub threads: Option<usize>,

    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// More progress output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic frame pair with ground-truth depth and pose.
    Synth(SynthArgs),
    /// Warp a source image into the target view.
    Warp(WarpArgs),
    /// Register two point clouds.
    Icp(IcpArgs),
    /// Evaluate the multi-scale loss for a pair at given depths and pose.
    Loss(LossArgs),
    /// Descend the loss on depth and pose for one pair.
    Optimize(OptimizeArgs),
    /// Compare optimization runs with loss terms switched off.
    Ablate(AblateArgs),
    /// Score predicted depth against ground truth.
    EvalDepth(EvalDepthArgs),
    /// Absolute trajectory error between two KITTI pose files.
    EvalOdom(EvalOdomArgs),
}

#[derive(Debug, Args)]
pub struct SceneSource {
    /// Scene file (JSON) to render.
    #[arg(long, conflicts_with = "preset")]
    pub scene: Option<PathBuf>,

    /// Built-in scene: plane or lowtex.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub source: SceneSource,

    /// Standard deviation of seeded Gaussian noise added to both images.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

/// Where a frame pair comes from. Rendered scenes and pair directories
/// supply everything; individual flags override single pieces.
#[derive(Debug, Args)]
pub struct PairSource {
    #[command(flatten)]
    pub scene: SceneSource,

    /// Directory written by `synth`.
    #[arg(long, conflicts_with_all = ["scene", "preset"])]
    pub pair: Option<PathBuf>,

    #[arg(long)]
    pub prev_image: Option<PathBuf>,
    #[arg(long)]
    pub cur_image: Option<PathBuf>,
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Norm {
    L1,
    SquaredL2,
}

#[derive(Debug, Args)]
pub struct LossFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,

    /// Pyramid levels, 1 to 4.
    #[arg(long)]
    pub scales: Option<usize>,

    /// Divide each term by its level's pixel count.
    #[arg(long)]
    pub normalize: bool,

    #[arg(long, value_enum)]
    pub norm: Option<Norm>,

    /// ICP distance used by the 3-d term.
    #[arg(long, value_enum)]
    pub icp_mode: Option<IcpMode>,

    #[arg(long)]
    pub icp_iterations: Option<usize>,

    /// Do not evaluate terms whose weight is zero.
    #[arg(long)]
    pub skip_zero_weight: bool,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    /// Image to sample from.
    #[arg(long)]
    pub image: PathBuf,

    /// Depth of the target view.
    #[arg(long)]
    pub depth: PathBuf,

    #[arg(long)]
    pub intrinsics: PathBuf,

    /// Pose vector: six comma-separated numbers or a JSON file.
    #[arg(long, allow_hyphen_values = true)]
    pub pose: String,

    /// Apply the inverse pose (target is frame t-1, source frame t).
    #[arg(long)]
    pub inverse: bool,

    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IcpMode {
    PointToPoint,
    PointToPlane,
}

#[derive(Debug, Args)]
pub struct IcpArgs {
    /// Source cloud (PLY).
    #[arg(long)]
    pub source: PathBuf,

    /// Target cloud (PLY).
    #[arg(long, required_unless_present = "self_")]
    pub target: Option<PathBuf>,

    /// Register the source cloud against itself.
    #[arg(long = "self", id = "self_", conflicts_with = "target")]
    pub self_: bool,

    #[arg(long, value_enum, default_value = "point-to-plane")]
    pub mode: IcpMode,

    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,

    #[arg(long, default_value_t = 1.0)]
    pub max_distance: f64,

    /// Initial transform: six comma-separated numbers or a JSON file.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,

    /// Write the source cloud moved by the result here (PLY).
    #[arg(long)]
    pub aligned: Option<PathBuf>,

    /// JSON result file (stdout if omitted).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateInputs {
    #[arg(long)]
    pub depth_prev: Option<PathBuf>,
    #[arg(long)]
    pub depth_cur: Option<PathBuf>,

    /// Pose vector: six comma-separated numbers or a JSON file.
    #[arg(long, allow_hyphen_values = true)]
    pub pose: Option<String>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[command(flatten)]
    pub pair: PairSource,

    #[command(flatten)]
    pub estimate: EstimateInputs,

    #[command(flatten)]
    pub loss: LossFlags,

    /// JSON output file (stdout if omitted).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InitFlags {
    /// Starting depths (defaults to the ground truth, scaled by --init-depth-scale).
    #[command(flatten)]
    pub estimate: EstimateInputs,

    #[arg(long, default_value_t = 1.0)]
    pub init_depth_scale: f64,

    /// Rotate the starting pose by this many degrees about a seeded random axis.
    #[arg(long, default_value_t = 0.0)]
    pub perturb_rot_deg: f64,

    /// Move the starting translation by this fraction of its length in a seeded
    /// random direction.
    #[arg(long, default_value_t = 0.0)]
    pub perturb_trans: f64,
}

#[derive(Debug, Args)]
pub struct OptimFlags {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub depth_step: Option<f64>,
    #[arg(long)]
    pub pose_step: Option<f64>,

    /// Adam-scaled steps instead of plain gradient descent.
    #[arg(long)]
    pub adam: bool,

    #[arg(long)]
    pub fix_pose: bool,
    #[arg(long)]
    pub fix_depth: bool,

    #[command(flatten)]
    pub loss: LossFlags,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub pair: PairSource,

    #[command(flatten)]
    pub init: InitFlags,

    #[command(flatten)]
    pub optim: OptimFlags,

    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub pair: PairSource,

    #[command(flatten)]
    pub init: InitFlags,

    #[command(flatten)]
    pub optim: OptimFlags,

    /// Comma-separated terms to switch off in one extra run (rec, 3d, sm,
    /// ssim). Repeat for more runs. The full loss always runs first.
    #[arg(long, required = true)]
    pub disable: Vec<String>,

    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalDepthArgs {
    /// Predicted depth (PFM or 16-bit PNG).
    #[arg(long)]
    pub pred: PathBuf,

    /// Ground-truth depth (PFM or 16-bit PNG).
    #[arg(long)]
    pub gt: PathBuf,

    #[arg(long, default_value_t = 80.0)]
    pub cap: f64,

    #[arg(long)]
    pub no_median_scaling: bool,

    /// Only pixels set in this mask PNG are scored.
    #[arg(long)]
    pub crop: Option<PathBuf>,

    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalOdomArgs {
    #[arg(long)]
    pub pred: PathBuf,

    #[arg(long)]
    pub gt: PathBuf,

    #[arg(long, default_value_t = 3)]
    pub snippet: usize,

    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
