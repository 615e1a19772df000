//! Loading frame pairs, poses and depths named on the command line.

use std::path::{Path, PathBuf};

use egodepth::camera::{DepthMap, Intrinsics};
use egodepth::io;
use egodepth::losses::{DepthPair, FramePair};
use egodepth::se3::{exp_so3, Pose, PoseVector};
use egodepth::synth::{make_pair_from_spec, preset, SceneSpec};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{EstimateInputs, InitFlags, PairSource, SceneSource};
use crate::CliError;

/// File names inside a pair directory.
pub const PREV_IMAGE: &str = "prev.png";
pub const CUR_IMAGE: &str = "cur.png";
pub const DEPTH_PREV: &str = "depth_prev.pfm";
pub const DEPTH_CUR: &str = "depth_cur.pfm";
pub const INTRINSICS: &str = "intrinsics.json";
pub const POSE: &str = "pose.json";
pub const SCENE: &str = "scene.json";

pub struct LoadedPair {
    pub frames: FramePair,
    pub intrinsics: Intrinsics,
    pub truth_depths: Option<DepthPair>,
    pub truth_pose: Option<PoseVector>,
}

pub fn scene_spec(src: &SceneSource) -> Result<Option<SceneSpec>, CliError> {
    match (&src.scene, &src.preset) {
        (Some(path), _) => Ok(Some(io::from_json_file(path)?)),
        (None, Some(name)) => Ok(Some(preset(name)?)),
        (None, None) => Ok(None),
    }
}

fn optional_file(dir: &Path, name: &str) -> Option<PathBuf> {
    let p = dir.join(name);
    p.exists().then_some(p)
}

pub fn load_pair(src: &PairSource) -> Result<LoadedPair, CliError> {
    let mut prev = None;
    let mut cur = None;
    let mut k = None;
    let mut truth_depths = None;
    let mut truth_pose = None;

    if let Some(spec) = scene_spec(&src.scene)? {
        let pair = make_pair_from_spec(&spec)?;
        prev = Some(pair.frames.prev);
        cur = Some(pair.frames.cur);
        k = Some(pair.intrinsics);
        truth_depths = Some(pair.depths);
        truth_pose = Some(spec.ego);
    } else if let Some(dir) = &src.pair {
        if !dir.is_dir() {
            return Err(CliError::Run(egodepth::Error::Io {
                path: dir.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            }));
        }
        prev = Some(io::read_image(&dir.join(PREV_IMAGE))?);
        cur = Some(io::read_image(&dir.join(CUR_IMAGE))?);
        k = Some(io::from_json_file(&dir.join(INTRINSICS))?);
        if let (Some(a), Some(b)) = (
            optional_file(dir, DEPTH_PREV),
            optional_file(dir, DEPTH_CUR),
        ) {
            truth_depths = Some(DepthPair {
                prev: io::read_depth(&a)?,
                cur: io::read_depth(&b)?,
            });
        }
        if let Some(p) = optional_file(dir, POSE) {
            truth_pose = Some(read_pose_file(&p)?);
        }
    }
    if let Some(p) = &src.prev_image {
        prev = Some(io::read_image(p)?);
    }
    if let Some(p) = &src.cur_image {
        cur = Some(io::read_image(p)?);
    }
    if let Some(p) = &src.intrinsics {
        k = Some(io::from_json_file(p)?);
    }
    match (prev, cur, k) {
        (Some(prev), Some(cur), Some(intrinsics)) => Ok(LoadedPair {
            frames: FramePair { prev, cur },
            intrinsics,
            truth_depths,
            truth_pose,
        }),
        _ => Err(CliError::Usage(
            "a frame pair needs --scene, --preset or --pair, or all of --prev-image, \
             --cur-image and --intrinsics"
                .into(),
        )),
    }
}

#[derive(Serialize)]
pub struct PoseOut {
    /// Axis-angle rotation (radians) then translation.
    pub vector: PoseVector,
    /// Row-major `[R | t]`.
    pub matrix: [f64; 12],
}

impl PoseOut {
    pub fn new(v: PoseVector) -> Result<Self, CliError> {
        Ok(Self {
            vector: v,
            matrix: v.to_pose()?.to_rows(),
        })
    }

    pub fn from_pose(p: &Pose) -> Result<Self, CliError> {
        Ok(Self {
            vector: p.to_vector()?,
            matrix: p.to_rows(),
        })
    }
}

/// A pose JSON file: a bare 6-vector or an object with a `vector` field.
pub fn read_pose_file(path: &Path) -> Result<PoseVector, CliError> {
    let value: serde_json::Value = io::from_json_file(path)?;
    let v = value.get("vector").cloned().unwrap_or(value);
    serde_json::from_value(v).map_err(|e| {
        CliError::Run(egodepth::Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected a pose 6-vector: {e}"),
        })
    })
}

/// Six comma-separated numbers, or else a pose JSON file.
pub fn parse_pose(arg: &str) -> Result<PoseVector, CliError> {
    let parts: Vec<&str> = arg.split(',').collect();
    if parts.len() == 6 {
        let vals: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse()).collect();
        if let Ok(vals) = vals {
            return Ok(PoseVector(vals.try_into().expect("six values")));
        }
    }
    read_pose_file(Path::new(arg))
}

/// Estimated depths and pose: explicit files first, then the ground truth.
pub fn estimate(
    inputs: &EstimateInputs,
    pair: &LoadedPair,
    needs: &str,
) -> Result<(DepthPair, PoseVector), CliError> {
    let depth = |file: &Option<PathBuf>, truth: Option<&DepthMap>| -> Result<DepthMap, CliError> {
        match (file, truth) {
            (Some(p), _) => Ok(io::read_depth(p)?),
            (None, Some(d)) => Ok(d.clone()),
            (None, None) => Err(CliError::Usage(format!(
                "{needs} needs --depth-prev and --depth-cur when the pair has no ground truth"
            ))),
        }
    };
    let truth = pair.truth_depths.as_ref();
    let depths = DepthPair {
        prev: depth(&inputs.depth_prev, truth.map(|d| &d.prev))?,
        cur: depth(&inputs.depth_cur, truth.map(|d| &d.cur))?,
    };
    let pose = match (&inputs.pose, pair.truth_pose) {
        (Some(s), _) => parse_pose(s)?,
        (None, Some(v)) => v,
        (None, None) => {
            return Err(CliError::Usage(format!(
                "{needs} needs --pose when the pair has no ground truth"
            )))
        }
    };
    Ok((depths, pose))
}

/// Starting depths and pose for optimization, with the seeded perturbations applied.
pub fn initial(
    init: &InitFlags,
    pair: &LoadedPair,
    seed: u64,
) -> Result<(DepthPair, PoseVector), CliError> {
    let (depths, pose) = estimate(&init.estimate, pair, "optimization")?;
    if !(init.init_depth_scale > 0.0) {
        return Err(CliError::Usage(
            "--init-depth-scale must be positive".into(),
        ));
    }
    let scale =
        |d: &DepthMap| -> Result<DepthMap, CliError> { Ok(d.scaled(init.init_depth_scale)?) };
    let depths = DepthPair {
        prev: scale(&depths.prev)?,
        cur: scale(&depths.cur)?,
    };
    let pose = perturb_pose(&pose, init.perturb_rot_deg, init.perturb_trans, seed)?;
    Ok((depths, pose))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotates by `rot_deg` about a random axis and shifts the translation by
/// `trans_frac` of its length in a random direction.
pub fn perturb_pose(
    v: &PoseVector,
    rot_deg: f64,
    trans_frac: f64,
    seed: u64,
) -> Result<PoseVector, CliError> {
    if rot_deg == 0.0 && trans_frac == 0.0 {
        return Ok(*v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = random_unit(&mut rng);
    let dir = random_unit(&mut rng);
    let pose = v.to_pose()?;
    let moved = Pose {
        rotation: exp_so3(&(axis * rot_deg.to_radians())) * pose.rotation,
        translation: pose.translation + dir * (trans_frac * pose.translation.norm()),
    };
    Ok(moved.to_vector()?)
}
