//! Synthetic scenes with exactly known depth and ego-motion.
//!
//! Primitives are ray traced analytically and shaded with a seeded solid
//! texture evaluated at the world-space hit point, so every surface point
//! has the same intensity in every view.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{DepthMap, Intrinsics, Z_MIN};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::losses::{DepthPair, FramePair};
use crate::se3::{Pose, PoseVector};

/// Band-limited sum of sinusoids over world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Texture {
    /// Lowest spatial frequency, cycles per scene unit.
    pub frequency: f64,
    /// Peak deviation from `base`.
    pub amplitude: f64,
    pub base: f64,
    /// Number of sinusoids; component `k` has frequency `frequency * (1 + k/2)`.
    pub octaves: usize,
    pub seed: u64,
}

impl Default for Texture {
    fn default() -> Self {
        Self {
            frequency: 0.5,
            amplitude: 0.3,
            base: 0.5,
            octaves: 4,
            seed: 0,
        }
    }
}

struct Wave {
    freq: f64,
    dir: Vector3<f64>,
    phase: [f64; 3],
}

impl Texture {
    fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0
            && self.base - self.amplitude >= 0.0
            && self.base + self.amplitude <= 1.0
            && self.frequency > 0.0
            && self.octaves >= 1)
        {
            return Err(Error::InvalidParameter(format!(
                "texture must stay inside [0, 1] with positive frequency: {self:?}"
            )));
        }
        Ok(())
    }

    fn waves(&self) -> Vec<Wave> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.octaves)
            .map(|k| {
                let dir = loop {
                    let v = Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 0.2 && n <= 1.0 {
                        break v / n;
                    }
                };
                let tau = std::f64::consts::TAU;
                Wave {
                    freq: self.frequency * (1.0 + 0.5 * k as f64),
                    dir,
                    phase: [
                        rng.random_range(0.0..tau),
                        rng.random_range(0.0..tau),
                        rng.random_range(0.0..tau),
                    ],
                }
            })
            .collect()
    }
}

/// Textures with their sinusoids precomputed.
struct Shader {
    base: f64,
    scale: f64,
    waves: Vec<Wave>,
}

impl Shader {
    fn new(t: &Texture) -> Self {
        Self {
            base: t.base,
            scale: t.amplitude / t.octaves as f64,
            waves: t.waves(),
        }
    }

    fn eval(&self, p: &Vector3<f64>, channel: usize) -> f64 {
        let tau = std::f64::consts::TAU;
        let s: f64 = self
            .waves
            .iter()
            .map(|w| (tau * w.freq * w.dir.dot(p) + w.phase[channel]).sin())
            .sum();
        (self.base + self.scale * s).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Primitive {
    /// Infinite plane through `point` with normal `normal`.
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
        #[serde(default)]
        texture: Texture,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        texture: Texture,
    },
    /// Axis-aligned box.
    Box {
        min: [f64; 3],
        max: [f64; 3],
        #[serde(default)]
        texture: Texture,
    },
}

impl Primitive {
    pub fn texture(&self) -> &Texture {
        match self {
            Primitive::Plane { texture, .. }
            | Primitive::Sphere { texture, .. }
            | Primitive::Box { texture, .. } => texture,
        }
    }

    fn validate(&self) -> Result<()> {
        self.texture().validate()?;
        let ok = match self {
            Primitive::Plane { normal, .. } => Vector3::from(*normal).norm() > 0.0,
            Primitive::Sphere { radius, .. } => *radius > 0.0,
            Primitive::Box { min, max, .. } => (0..3).all(|a| min[a] < max[a]),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "degenerate primitive {self:?}"
            )));
        }
        Ok(())
    }

    /// Smallest ray parameter `> Z_MIN` at which `o + s d` hits the surface.
    fn hit(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let front = |s: f64| (s > Z_MIN).then_some(s);
        match self {
            Primitive::Plane { point, normal, .. } => {
                let n = Vector3::from(*normal);
                let den = n.dot(d);
                if den == 0.0 {
                    return None;
                }
                front(n.dot(&(Vector3::from(*point) - o)) / den)
            }
            Primitive::Sphere { center, radius, .. } => {
                let oc = o - Vector3::from(*center);
                let a = d.norm_squared();
                let b = oc.dot(d);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                front((-b - sq) / a).or_else(|| front((-b + sq) / a))
            }
            Primitive::Box { min, max, .. } => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    if d[a] == 0.0 {
                        if o[a] < min[a] || o[a] > max[a] {
                            return None;
                        }
                        continue;
                    }
                    let s0 = (min[a] - o[a]) / d[a];
                    let s1 = (max[a] - o[a]) / d[a];
                    lo = lo.max(s0.min(s1));
                    hi = hi.min(s0.max(s1));
                }
                if lo > hi {
                    return None;
                }
                front(lo).or_else(|| front(hi))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// 1 (gray) or 3 (RGB).
    #[serde(default = "default_channels")]
    pub channels: usize,
    pub primitives: Vec<Primitive>,
}

fn default_channels() -> usize {
    3
}

/// A scene file: the scene plus the camera and true ego-motion of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub intrinsics: Intrinsics,
    /// Frame `t` to frame `t-1` point transform.
    pub ego: PoseVector,
    #[serde(flatten)]
    pub scene: Scene,
}

/// Renders `scene` seen from a camera whose camera-to-world transform is
/// `camera`. Pixels whose ray misses every primitive get intensity 0 and an
/// invalid depth.
pub fn render(scene: &Scene, camera: &Pose, k: &Intrinsics) -> Result<(Image, DepthMap)> {
    if scene.primitives.is_empty() {
        return Err(Error::InvalidParameter("scene has no primitives".into()));
    }
    if scene.channels != 1 && scene.channels != 3 {
        return Err(Error::InvalidParameter(format!(
            "scenes render 1 or 3 channels, got {}",
            scene.channels
        )));
    }
    for p in &scene.primitives {
        p.validate()?;
    }
    let shaders: Vec<Shader> = scene
        .primitives
        .iter()
        .map(|p| Shader::new(p.texture()))
        .collect();
    let (w, h) = k.dims();
    let c = scene.channels;
    let origin = camera.translation;

    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut px = Vec::with_capacity(w * c);
            let mut depth = Vec::with_capacity(w);
            let mut valid = Vec::with_capacity(w);
            for i in 0..w {
                // z = 1 in the camera frame, so the ray parameter is the depth
                let dir = camera.rotation * k.ray(i as f64, j as f64);
                let best = scene
                    .primitives
                    .iter()
                    .enumerate()
                    .filter_map(|(n, p)| p.hit(&origin, &dir).map(|s| (s, n)))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                match best {
                    Some((s, n)) => {
                        let hit = origin + s * dir;
                        px.extend((0..c).map(|ch| shaders[n].eval(&hit, ch)));
                        depth.push(s);
                        valid.push(true);
                    }
                    None => {
                        px.extend(std::iter::repeat_n(0.0, c));
                        depth.push(0.0);
                        valid.push(false);
                    }
                }
            }
            (px, depth, valid)
        })
        .collect();

    let mut data = Vec::with_capacity(w * h * c);
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for (p, d, v) in rows {
        data.extend(p);
        values.extend(d);
        valid.extend(v);
    }
    Ok((
        Image::new(w, h, c, data)?,
        DepthMap::with_validity(w, h, values, valid)?,
    ))
}

/// A rendered frame pair with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub frames: FramePair,
    pub depths: DepthPair,
    /// True ego-motion: frame `t` points to frame `t-1`.
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

/// Renders frame `t-1` from the world origin and frame `t` from `ego`, so
/// that `ego` maps frame-`t` points into frame `t-1`.
pub fn make_pair(scene: &Scene, ego: &Pose, k: &Intrinsics) -> Result<SyntheticPair> {
    let (prev, depth_prev) = render(scene, &Pose::identity(), k)?;
    let (cur, depth_cur) = render(scene, ego, k)?;
    Ok(SyntheticPair {
        frames: FramePair { prev, cur },
        depths: DepthPair {
            prev: depth_prev,
            cur: depth_cur,
        },
        pose: *ego,
        intrinsics: *k,
    })
}

pub fn make_pair_from_spec(spec: &SceneSpec) -> Result<SyntheticPair> {
    make_pair(&spec.scene, &spec.ego.to_pose()?, &spec.intrinsics)
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 2] = ["plane", "lowtex"];

/// Shipped test scenes: a textured fronto-parallel plane at depth 4 seen by
/// a 64x64 camera translating sideways by 8 pixels' worth of parallax, an
/// integer shift at every pyramid level. `lowtex` is the same geometry with
/// a faint texture.
pub fn preset(name: &str) -> Result<SceneSpec> {
    let intrinsics = Intrinsics::new(48.0, 48.0, 31.5, 31.5, 64, 64)?;
    let ego = PoseVector([0.0, 0.0, 0.0, 2.0 / 3.0, 0.0, 0.0]);
    let texture = match name {
        "plane" => Texture {
            frequency: 0.5,
            amplitude: 0.35,
            base: 0.5,
            octaves: 4,
            seed: 7,
        },
        "lowtex" => Texture {
            frequency: 0.25,
            amplitude: 0.03,
            base: 0.5,
            octaves: 2,
            seed: 11,
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown scene preset {other:?}; expected one of {PRESETS:?}"
            )))
        }
    };
    Ok(SceneSpec {
        intrinsics,
        ego,
        scene: Scene {
            channels: 3,
            primitives: vec![Primitive::Plane {
                point: [0.0, 0.0, 4.0],
                normal: [0.0, 0.0, -1.0],
                texture,
            }],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> Intrinsics {
        Intrinsics::new(40.0, 40.0, 16.0, 12.0, 32, 24).unwrap()
    }

    fn plane(d: f64) -> Scene {
        Scene {
            channels: 1,
            primitives: vec![Primitive::Plane {
                point: [0.0, 0.0, d],
                normal: [0.0, 0.0, 1.0],
                texture: Texture::default(),
            }],
        }
    }

    #[test]
    fn plane_depth_is_constant() {
        let (_, d) = render(&plane(3.5), &Pose::identity(), &k()).unwrap();
        assert!(d.validity().iter().all(|v| *v));
        assert!(d.values().iter().all(|v| *v == 3.5));
    }

    #[test]
    fn sphere_centre_depth() {
        let scene = Scene {
            channels: 1,
            primitives: vec![Primitive::Sphere {
                center: [0.0, 0.0, 6.0],
                radius: 1.5,
                texture: Texture::default(),
            }],
        };
        let (_, d) = render(&scene, &Pose::identity(), &k()).unwrap();
        assert_eq!(d.get(16, 12), Some(4.5));
        // rays far off axis miss
        assert_eq!(d.get(0, 0), None);
    }

    #[test]
    fn box_front_face_and_occlusion() {
        let tex = Texture::default();
        let scene = Scene {
            channels: 1,
            primitives: vec![
                Primitive::Plane {
                    point: [0.0, 0.0, 10.0],
                    normal: [0.0, 0.0, -1.0],
                    texture: tex,
                },
                Primitive::Box {
                    min: [-0.5, -0.5, 3.0],
                    max: [0.5, 0.5, 4.0],
                    texture: tex,
                },
            ],
        };
        let (_, d) = render(&scene, &Pose::identity(), &k()).unwrap();
        assert_eq!(d.get(16, 12), Some(3.0));
        assert_eq!(d.get(0, 0), Some(10.0));
    }

    #[test]
    fn identity_ego_gives_identical_frames() {
        let spec = preset("plane").unwrap();
        let pair = make_pair(&spec.scene, &Pose::identity(), &spec.intrinsics).unwrap();
        assert_eq!(pair.frames.prev, pair.frames.cur);
        assert_eq!(pair.depths.prev, pair.depths.cur);
    }

    #[test]
    fn renders_are_deterministic() {
        let spec = preset("plane").unwrap();
        let a = make_pair_from_spec(&spec).unwrap();
        let b = make_pair_from_spec(&spec).unwrap();
        assert_eq!(a.frames.cur.data(), b.frames.cur.data());
        let other = Texture {
            seed: 8,
            ..*spec.scene.primitives[0].texture()
        };
        let mut changed = spec.clone();
        if let Primitive::Plane { texture, .. } = &mut changed.scene.primitives[0] {
            *texture = other;
        }
        let c = make_pair_from_spec(&changed).unwrap();
        assert_ne!(a.frames.cur.data(), c.frames.cur.data());
    }

    #[test]
    fn scene_json_round_trip() {
        let spec = preset("lowtex").unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"plane\""));
        let back: SceneSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn bad_scenes() {
        let empty = Scene {
            channels: 1,
            primitives: vec![],
        };
        assert!(render(&empty, &Pose::identity(), &k()).is_err());
        let mut bright = plane(2.0);
        if let Primitive::Plane { texture, .. } = &mut bright.primitives[0] {
            texture.base = 0.9;
        }
        assert!(render(&bright, &Pose::identity(), &k()).is_err());
        assert!(preset("nope").is_err());
    }
}
