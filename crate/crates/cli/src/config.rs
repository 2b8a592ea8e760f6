//! Run configuration: every tunable in one `key = value` file.
//!
//! Unknown keys and out-of-range values are rejected when the file is
//! loaded, before any command starts work.

use std::path::Path;

use mo_ransac::dpc::{Activation, InferConfig, NetConfig, Optimizer, TrainConfig, VoteNorm};
use mo_ransac::grasp::DEFAULT_FLOOR_CONE_DEG;
use mo_ransac::io::kv::KeyValues;
use mo_ransac::merge::MergeParams;
use mo_ransac::pipeline::PipelineConfig;
use mo_ransac::synth::{CameraPose, SceneSpec};
use mo_ransac::{Error, RansacParams, Result, Vec3};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    /// Baseline RANSAC. `min_inliers = 0` means `max(50, n / 200)`.
    pub ransac: RansacParams,
    pub max_planes: usize,
    pub infer: InferConfig,
    pub merge: MergeParams,
    pub train: TrainConfig,
    pub net: NetConfig,
    /// Voxel sizes for `eval`.
    pub voxels: Vec<f64>,
    pub floor_cone_deg: f64,
    /// World up in camera coordinates, used when the input carries none.
    pub up: Vec3,
    pub scene: SceneSpec,
    pub scenes: usize,
    pub render_frames: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ransac: RansacParams {
                min_inliers: 0,
                ..RansacParams::default()
            },
            max_planes: 20,
            infer: InferConfig::default(),
            merge: MergeParams::default(),
            train: TrainConfig::default(),
            net: NetConfig::default(),
            voxels: vec![0.005],
            floor_cone_deg: DEFAULT_FLOOR_CONE_DEG,
            up: CameraPose::default().up(),
            scene: SceneSpec::default(),
            scenes: 1,
            render_frames: false,
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "ransac.threshold",
    "ransac.iterations",
    "ransac.min_inliers",
    "baseline.max_planes",
    "infer.k",
    "infer.splits",
    "infer.threshold",
    "infer.iterations",
    "infer.min_inliers",
    "merge.beta",
    "merge.gamma",
    "merge.delta",
    "merge.neighbors",
    "train.epochs",
    "train.learning_rate",
    "train.weight_decay",
    "train.k_min",
    "train.k_max",
    "train.alpha",
    "train.points",
    "train.norm",
    "train.optimizer",
    "net.backbone",
    "net.backbone_activation",
    "net.head_activation",
    "eval.voxels",
    "grasp.cone_deg",
    "grasp.up",
    "synth.scenes",
    "synth.frames",
];

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("config `{key}`: {msg}"))
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| bad(key, format_args!("cannot parse `{v}`")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|t| parse(key, t)).collect()
}

pub fn parse_voxels(v: &str) -> Result<Vec<f64>> {
    list("eval.voxels", v)
}

fn parse_activation(key: &str, v: &str) -> Result<Activation> {
    v.parse()
        .map_err(|_| bad(key, format_args!("unknown activation `{v}`")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_key_values(&KeyValues::parse(&text)?)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut scene_kv = KeyValues::default();
        for key in kv.keys() {
            let v = kv.get(key).unwrap_or_default();
            if let Some(field) = key.strip_prefix("synth.").filter(|f| !["scenes", "frames"].contains(f)) {
                scene_kv.insert(field, v);
                continue;
            }
            match key {
                "seed" => c.seed = parse(key, v)?,
                "ransac.threshold" => c.ransac.inlier_threshold = parse(key, v)?,
                "ransac.iterations" => c.ransac.max_iterations = parse(key, v)?,
                "ransac.min_inliers" => c.ransac.min_inliers = parse(key, v)?,
                "baseline.max_planes" => c.max_planes = parse(key, v)?,
                "infer.k" => c.infer.k = parse(key, v)?,
                "infer.splits" => c.infer.splits = parse(key, v)?,
                "infer.threshold" => c.infer.ransac.inlier_threshold = parse(key, v)?,
                "infer.iterations" => c.infer.ransac.max_iterations = parse(key, v)?,
                "infer.min_inliers" => c.infer.ransac.min_inliers = parse(key, v)?,
                "merge.beta" => c.merge.beta = parse(key, v)?,
                "merge.gamma" => c.merge.gamma = parse(key, v)?,
                "merge.delta" => c.merge.delta = parse(key, v)?,
                "merge.neighbors" => c.merge.neighbors = parse(key, v)?,
                "train.epochs" => c.train.epochs = parse(key, v)?,
                "train.learning_rate" => c.train.learning_rate = parse(key, v)?,
                "train.weight_decay" => c.train.weight_decay = parse(key, v)?,
                "train.k_min" => c.train.k_range.0 = parse(key, v)?,
                "train.k_max" => c.train.k_range.1 = parse(key, v)?,
                "train.alpha" => c.train.alpha = parse(key, v)?,
                "train.points" => c.train.points_per_cloud = parse(key, v)?,
                "train.norm" => {
                    c.train.norm = match v {
                        "l1" => VoteNorm::L1,
                        "l2" => VoteNorm::L2,
                        _ => return Err(bad(key, "expected l1 or l2")),
                    }
                }
                "train.optimizer" => c.train.optimizer = v.parse::<Optimizer>().map_err(|e| bad(key, e))?,
                "net.backbone" => c.net.backbone = list(key, v)?,
                "net.backbone_activation" => c.net.backbone_activation = parse_activation(key, v)?,
                "net.head_activation" => c.net.head_activation = parse_activation(key, v)?,
                "eval.voxels" => c.voxels = parse_voxels(v)?,
                "grasp.cone_deg" => c.floor_cone_deg = parse(key, v)?,
                "grasp.up" => {
                    let u: Vec<f64> = list(key, v)?;
                    let [x, y, z]: [f64; 3] = u.try_into().map_err(|_| bad(key, "needs 3 values"))?;
                    c.up = Vec3::new(x, y, z);
                }
                "synth.scenes" => c.scenes = parse(key, v)?,
                "synth.frames" => c.render_frames = parse(key, v)?,
                _ => {
                    debug_assert!(!KEYS.contains(&key));
                    return Err(Error::Input(format!("config: unknown key `{key}`")));
                }
            }
        }
        c.scene = SceneSpec::from_key_values(&scene_kv)?;
        c.set_seed(c.seed);
        c.validate()?;
        Ok(c)
    }

    /// Propagates the run seed to every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.ransac.seed = seed;
        self.infer.seed = seed;
        self.infer.ransac.seed = seed;
        self.train.seed = seed;
        self.train.ransac.seed = seed;
        self.net.seed = seed;
        self.scene.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        RansacParams {
            min_inliers: self.ransac.min_inliers.max(3),
            ..self.ransac
        }
        .validate()?;
        if self.ransac.min_inliers != 0 && self.ransac.min_inliers < 3 {
            return Err(bad("ransac.min_inliers", "must be 0 (auto) or >= 3"));
        }
        if self.max_planes < 1 {
            return Err(bad("baseline.max_planes", "must be >= 1"));
        }
        self.infer.validate()?;
        self.infer.ransac.validate()?;
        self.merge.validate()?;
        self.train.validate()?;
        if self.net.backbone.is_empty() || self.net.backbone.contains(&0) {
            return Err(bad("net.backbone", "needs at least one non-zero width"));
        }
        if self.voxels.is_empty() || self.voxels.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(bad("eval.voxels", "sizes must be positive"));
        }
        if !(self.floor_cone_deg > 0.0 && self.floor_cone_deg < 90.0) {
            return Err(bad("grasp.cone_deg", "must be in (0, 90)"));
        }
        if self.up.norm() < 1e-12 || !self.up.iter().all(|v| v.is_finite()) {
            return Err(bad("grasp.up", "must be a non-zero vector"));
        }
        if self.scenes < 1 {
            return Err(bad("synth.scenes", "must be >= 1"));
        }
        Ok(())
    }

    /// Baseline RANSAC parameters for a cloud of `n` points.
    pub fn baseline_ransac(&self, n: usize) -> RansacParams {
        RansacParams {
            min_inliers: if self.ransac.min_inliers == 0 {
                RansacParams::for_cloud_size(n).min_inliers
            } else {
                self.ransac.min_inliers
            },
            ..self.ransac
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            infer: self.infer,
            merge: self.merge,
        }
    }
}
