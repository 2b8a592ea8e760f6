//! Synthetic cluttered tabletop scenes with exact plane labels, scene
//! archives on disk, and RGB-D frame ingestion.
//!
//! Scenes are built in a world frame (z up, floor at z = 0) and returned in
//! the frame of a camera looking at the world origin, using the usual
//! x-right, y-down, z-forward convention so they can be rendered to depth
//! images directly.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Matrix3;
use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{
    depth_to_cloud_indexed, estimate_normals, CameraIntrinsics, PointCloud, Vec3, DEFAULT_NORMAL_NEIGHBORS,
};
use crate::io::kv::KeyValues;
use crate::io::{self, PlyFormat};
use crate::plane::Plane;
use crate::rng;
use crate::segmentation::{Segmentation, UNASSIGNED};

/// Noise is truncated at this many standard deviations.
const NOISE_CLIP: f64 = 4.0;
const PLACEMENT_ATTEMPTS: usize = 2000;
const PLACEMENT_GAP: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectKind {
    /// Top face plus up to two camera-facing sides.
    Box { visible_faces: usize },
    /// Faceted side strip plus the top disk.
    Cylinder { facets: usize },
}

/// One object. Boxes use `size = [width, depth, height]`; cylinders use
/// `size = [diameter, diameter, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    pub center: [f64; 2],
    pub size: [f64; 3],
    pub yaw: f64,
    /// Height of the object's bottom, for stacking.
    pub base: f64,
}

impl ObjectSpec {
    fn footprint_radius(&self) -> f64 {
        0.5 * (self.size[0] * self.size[0] + self.size[1] * self.size[1]).sqrt()
    }

    fn covers(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        match self.kind {
            ObjectKind::Box { .. } => {
                let (s, c) = self.yaw.sin_cos();
                let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
                lx.abs() <= self.size[0] / 2.0 && ly.abs() <= self.size[1] / 2.0
            }
            ObjectKind::Cylinder { .. } => dx * dx + dy * dy <= (self.size[0] / 2.0).powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub distance: f64,
    /// Angle above the floor plane, degrees, in `(0, 89]`.
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

impl Default for CameraPose {
    fn default() -> Self {
        Self {
            distance: 0.9,
            elevation_deg: 60.0,
            azimuth_deg: -90.0,
        }
    }
}

impl CameraPose {
    pub fn position(&self) -> Vec3 {
        let (el, az) = (self.elevation_deg.to_radians(), self.azimuth_deg.to_radians());
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * self.distance
    }

    /// World-to-camera rotation (rows: right, down, forward).
    pub fn rotation(&self) -> Matrix3<f64> {
        let forward = (-self.position()).normalize();
        let right = forward.cross(&Vec3::z()).normalize();
        let down = forward.cross(&right);
        Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()])
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation() * (p - self.position())
    }

    /// World up expressed in the camera frame.
    pub fn up(&self) -> Vec3 {
        self.rotation() * Vec3::z()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Floor width and depth in meters.
    pub floor_extent: [f64; 2],
    /// Floor samples; 0 leaves the floor out.
    pub floor_points: usize,
    /// Randomly placed objects, used when `objects` is empty.
    pub object_count: usize,
    /// Probability that a random object is a cylinder.
    pub cylinder_fraction: f64,
    pub cylinder_facets: usize,
    pub size_min: [f64; 3],
    pub size_max: [f64; 3],
    pub points_per_face: usize,
    pub noise_sigma: f64,
    /// Uniform outliers as a fraction of all emitted points.
    pub outlier_fraction: f64,
    pub seed: u64,
    pub camera: CameraPose,
    /// Explicit objects; overrides random placement when non-empty.
    pub objects: Vec<ObjectSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            floor_extent: [0.8, 0.8],
            floor_points: 3000,
            object_count: 5,
            cylinder_fraction: 0.2,
            cylinder_facets: 12,
            size_min: [0.06, 0.06, 0.05],
            size_max: [0.16, 0.16, 0.22],
            points_per_face: 300,
            noise_sigma: 0.001,
            outlier_fraction: 0.0,
            seed: 0,
            camera: CameraPose::default(),
            objects: Vec::new(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = self
            .floor_extent
            .iter()
            .chain(&self.size_min)
            .chain(&self.size_max)
            .all(|&v| v > 0.0)
            && self.camera.distance > 0.0;
        if !positive {
            return Err(Error::Spec("extents and sizes must be positive".into()));
        }
        if self.size_min.iter().zip(&self.size_max).any(|(a, b)| a > b) {
            return Err(Error::Spec("size_min exceeds size_max".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::Spec("outlier fraction must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.cylinder_fraction) {
            return Err(Error::Spec("cylinder fraction must be in [0, 1]".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Spec("noise sigma must be non-negative".into()));
        }
        if !(self.camera.elevation_deg > 0.0 && self.camera.elevation_deg <= 89.0) {
            return Err(Error::Spec("camera elevation must be in (0, 89]".into()));
        }
        if self.cylinder_facets < 3 {
            return Err(Error::Spec("cylinders need at least 3 facets".into()));
        }
        for o in &self.objects {
            if o.size.iter().any(|&s| s <= 0.0) {
                return Err(Error::Spec("object sizes must be positive".into()));
            }
            if let ObjectKind::Box { visible_faces } = o.kind {
                if !(1..=3).contains(&visible_faces) {
                    return Err(Error::Spec("boxes show 1 to 3 faces".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        kv.insert("floor_extent", join(&self.floor_extent));
        kv.insert("floor_points", self.floor_points);
        kv.insert("object_count", self.object_count);
        kv.insert("cylinder_fraction", self.cylinder_fraction);
        kv.insert("cylinder_facets", self.cylinder_facets);
        kv.insert("size_min", join(&self.size_min));
        kv.insert("size_max", join(&self.size_max));
        kv.insert("points_per_face", self.points_per_face);
        kv.insert("noise_sigma", self.noise_sigma);
        kv.insert("outlier_fraction", self.outlier_fraction);
        kv.insert("seed", self.seed);
        kv.insert(
            "camera",
            join(&[self.camera.distance, self.camera.elevation_deg, self.camera.azimuth_deg]),
        );
        for (i, o) in self.objects.iter().enumerate() {
            let (kind, param) = match o.kind {
                ObjectKind::Box { visible_faces } => ("box", visible_faces),
                ObjectKind::Cylinder { facets } => ("cylinder", facets),
            };
            let nums = join(&[o.center[0], o.center[1], o.size[0], o.size[1], o.size[2], o.yaw, o.base]);
            kv.insert(format!("object.{i:03}"), format!("{kind},{param},{nums}"));
        }
        kv
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut spec = SceneSpec::default();
        let floats = |key: &str| -> Result<Option<Vec<f64>>> {
            kv.get(key)
                .map(|v| {
                    v.split(',')
                        .map(|t| {
                            t.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::Spec(format!("`{key}`: bad number `{t}`")))
                        })
                        .collect()
                })
                .transpose()
        };
        let arr3 = |key: &str, v: Vec<f64>| -> Result<[f64; 3]> {
            v.try_into().map_err(|_| Error::Spec(format!("`{key}` needs 3 values")))
        };
        if let Some(v) = floats("floor_extent")? {
            spec.floor_extent = v
                .try_into()
                .map_err(|_| Error::Spec("`floor_extent` needs 2 values".into()))?;
        }
        if let Some(v) = floats("size_min")? {
            spec.size_min = arr3("size_min", v)?;
        }
        if let Some(v) = floats("size_max")? {
            spec.size_max = arr3("size_max", v)?;
        }
        if let Some(v) = floats("camera")? {
            let [distance, elevation_deg, azimuth_deg] = arr3("camera", v)?;
            spec.camera = CameraPose {
                distance,
                elevation_deg,
                azimuth_deg,
            };
        }
        macro_rules! scalar {
            ($field:ident) => {
                if let Some(v) = kv.get_parsed(stringify!($field))? {
                    spec.$field = v;
                }
            };
        }
        scalar!(floor_points);
        scalar!(object_count);
        scalar!(cylinder_fraction);
        scalar!(cylinder_facets);
        scalar!(points_per_face);
        scalar!(noise_sigma);
        scalar!(outlier_fraction);
        scalar!(seed);
        for key in kv.keys().filter(|k| k.starts_with("object.")) {
            let raw = kv.get(key).unwrap_or_default();
            let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
            let bad = || Error::Spec(format!("`{key}`: expected kind,param,cx,cy,sx,sy,sz,yaw,base"));
            if parts.len() != 9 {
                return Err(bad());
            }
            let param: usize = parts[1].parse().map_err(|_| bad())?;
            let n: Vec<f64> = parts[2..]
                .iter()
                .map(|t| t.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            let kind = match parts[0] {
                "box" => ObjectKind::Box { visible_faces: param },
                "cylinder" => ObjectKind::Cylinder { facets: param },
                _ => return Err(bad()),
            };
            spec.objects.push(ObjectSpec {
                kind,
                center: [n[0], n[1]],
                size: [n[2], n[3], n[4]],
                yaw: n[5],
                base: n[6],
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// A generated scene in camera coordinates.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cloud: PointCloud,
    pub gt: Segmentation,
    /// Plane of every ground-truth label, indexed by label.
    pub planes: Vec<Plane>,
    /// Label of the floor, when present.
    pub floor_label: Option<i64>,
    /// World up in camera coordinates.
    pub up: Vec3,
    pub objects: Vec<ObjectSpec>,
}

/// A planar patch parameterized as `origin + s * u + t * v`, `s, t ∈ [0, 1]`.
struct Face {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    normal: Vec3,
    /// For disks: sample the inscribed ellipse instead of the parallelogram.
    disk: bool,
}

impl Face {
    fn center(&self) -> Vec3 {
        self.origin + (self.u + self.v) * 0.5
    }

    fn sample(&self, rng: &mut rng::Rng) -> Vec3 {
        loop {
            let (s, t): (f64, f64) = (rng.random(), rng.random());
            if self.disk && (s - 0.5).powi(2) + (t - 0.5).powi(2) > 0.25 {
                continue;
            }
            return self.origin + self.u * s + self.v * t;
        }
    }
}

fn object_faces(o: &ObjectSpec, camera: &Vec3) -> Vec<Face> {
    let (s, c) = o.yaw.sin_cos();
    let ax = Vec3::new(c, s, 0.0);
    let ay = Vec3::new(-s, c, 0.0);
    let center = Vec3::new(o.center[0], o.center[1], o.base);
    let h = o.size[2];
    let facing = |f: &Face| f.normal.dot(&(camera - f.center()));
    match o.kind {
        ObjectKind::Box { visible_faces } => {
            let (hx, hy) = (o.size[0] / 2.0, o.size[1] / 2.0);
            let top = Face {
                origin: center - ax * hx - ay * hy + Vec3::z() * h,
                u: ax * o.size[0],
                v: ay * o.size[1],
                normal: Vec3::z(),
                disk: false,
            };
            let mut sides: Vec<Face> = [
                (ax, hx, ay, hy),
                (-ax, hx, -ay, hy),
                (ay, hy, -ax, hx),
                (-ay, hy, ax, hx),
            ]
            .into_iter()
            .map(|(n, half_n, t, half_t)| Face {
                origin: center + n * half_n - t * half_t,
                u: t * (2.0 * half_t),
                v: Vec3::z() * h,
                normal: n,
                disk: false,
            })
            .filter(|f| facing(f) > 0.0)
            .collect();
            sides.sort_by(|a, b| facing(b).total_cmp(&facing(a)));
            sides.truncate(visible_faces.saturating_sub(1));
            std::iter::once(top).chain(sides).collect()
        }
        ObjectKind::Cylinder { facets } => {
            let r = o.size[0] / 2.0;
            let top = Face {
                origin: center - (ax + ay) * r + Vec3::z() * h,
                u: ax * (2.0 * r),
                v: ay * (2.0 * r),
                normal: Vec3::z(),
                disk: true,
            };
            let step = 2.0 * PI / facets as f64;
            let strips = (0..facets).map(|i| {
                let a0 = o.yaw + i as f64 * step;
                let p0 = center + Vec3::new(a0.cos(), a0.sin(), 0.0) * r;
                let p1 = center + Vec3::new((a0 + step).cos(), (a0 + step).sin(), 0.0) * r;
                let mid = a0 + step / 2.0;
                Face {
                    origin: p0,
                    u: p1 - p0,
                    v: Vec3::z() * h,
                    normal: Vec3::new(mid.cos(), mid.sin(), 0.0),
                    disk: false,
                }
            });
            std::iter::once(top).chain(strips.filter(|f| facing(f) > 0.0)).collect()
        }
    }
}

fn place_objects(spec: &SceneSpec, rng: &mut rng::Rng) -> Result<Vec<ObjectSpec>> {
    if !spec.objects.is_empty() {
        return Ok(spec.objects.clone());
    }
    let mut placed: Vec<ObjectSpec> = Vec::new();
    let [ex, ey] = spec.floor_extent;
    for _ in 0..spec.object_count {
        let cylinder = rng.random::<f64>() < spec.cylinder_fraction;
        let mut size: [f64; 3] = std::array::from_fn(|a| rng.random_range(spec.size_min[a]..=spec.size_max[a]));
        let kind = if cylinder {
            size[1] = size[0];
            ObjectKind::Cylinder {
                facets: spec.cylinder_facets,
            }
        } else {
            ObjectKind::Box {
                visible_faces: rng.random_range(1..=3),
            }
        };
        let yaw = rng.random_range(0.0..PI);
        let mut ok = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let mut cand = ObjectSpec {
                kind,
                center: [0.0; 2],
                size,
                yaw,
                base: 0.0,
            };
            let r = cand.footprint_radius();
            let (mx, my) = (ex / 2.0 - r, ey / 2.0 - r);
            if mx <= 0.0 || my <= 0.0 {
                break;
            }
            cand.center = [rng.random_range(-mx..mx), rng.random_range(-my..my)];
            let clear = placed.iter().all(|o| {
                let d = ((o.center[0] - cand.center[0]).powi(2) + (o.center[1] - cand.center[1]).powi(2)).sqrt();
                d > o.footprint_radius() + r + PLACEMENT_GAP
            });
            if clear {
                ok = Some(cand);
                break;
            }
        }
        placed.push(ok.ok_or_else(|| Error::Spec(format!("cannot fit {} objects on the floor", spec.object_count)))?);
    }
    Ok(placed)
}

fn jitter(rng: &mut rng::Rng, base: [f64; 3], amount: f64) -> [f64; 3] {
    base.map(|c| (c + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

fn object_color(rng: &mut rng::Rng) -> [f64; 3] {
    // saturated hue so objects stand apart from the gray floor
    let h = rng.random_range(0.0..6.0);
    let x = 1.0 - ((h % 2.0) - 1.0f64).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [0.15 + 0.7 * r, 0.15 + 0.7 * g, 0.15 + 0.7 * b]
}

/// Samples a scene. Deterministic for a given spec (seed included).
pub fn gen_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = rng::rng(spec.seed);
    let objects = place_objects(spec, &mut rng)?;
    let cam = spec.camera.position();
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let sample_noise = |rng: &mut rng::Rng| -> f64 {
        if spec.noise_sigma == 0.0 {
            return 0.0;
        }
        loop {
            let n = noise.sample(rng);
            if n.abs() <= NOISE_CLIP * spec.noise_sigma {
                return n;
            }
        }
    };

    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut labels = Vec::new();
    let mut world_planes = Vec::new();

    let floor_label = if spec.floor_points > 0 {
        let [ex, ey] = spec.floor_extent;
        let gray = [0.55, 0.55, 0.5];
        let mut emitted = 0;
        let mut attempts = 0;
        while emitted < spec.floor_points && attempts < spec.floor_points * 50 {
            attempts += 1;
            let (x, y) = (
                rng.random_range(-ex / 2.0..ex / 2.0),
                rng.random_range(-ey / 2.0..ey / 2.0),
            );
            if objects.iter().any(|o| o.base == 0.0 && o.covers(x, y)) {
                continue;
            }
            positions.push(Vec3::new(x, y, sample_noise(&mut rng)));
            normals.push(Vec3::z());
            colors.push(jitter(&mut rng, gray, 0.03));
            labels.push(0);
            emitted += 1;
        }
        world_planes.push((Vec3::z(), 0.0));
        Some(0)
    } else {
        None
    };

    for o in &objects {
        let color = object_color(&mut rng);
        let top = o.base + o.size[2];
        let resting_on: Vec<&ObjectSpec> = objects.iter().filter(|a| (a.base - top).abs() < 1e-9).collect();
        for face in object_faces(o, &cam) {
            let label = world_planes.len() as i64;
            let is_top = face.normal.z > 0.5;
            let mut emitted = 0;
            let mut attempts = 0;
            while emitted < spec.points_per_face && attempts < spec.points_per_face * 50 {
                attempts += 1;
                let s = face.sample(&mut rng);
                // hidden under an object stacked on this one
                if is_top && resting_on.iter().any(|a| a.covers(s.x, s.y)) {
                    continue;
                }
                emitted += 1;
                let p = s + face.normal * sample_noise(&mut rng);
                positions.push(p);
                normals.push(face.normal);
                colors.push(jitter(&mut rng, color, 0.03));
                labels.push(label);
            }
            world_planes.push((face.normal, -face.normal.dot(&face.origin)));
        }
    }
    if positions.is_empty() {
        return Err(Error::Spec("scene has no points".into()));
    }

    let n_outliers = if spec.outlier_fraction > 0.0 {
        (positions.len() as f64 * spec.outlier_fraction / (1.0 - spec.outlier_fraction)).round() as usize
    } else {
        0
    };
    if n_outliers > 0 {
        let (lo, hi) = positions.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let hi = hi + Vec3::repeat(1e-6);
        for _ in 0..n_outliers {
            let p = Vec3::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
                rng.random_range(lo.z..hi.z),
            );
            let n = loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if let Some(v) = v.try_normalize(1e-6) {
                    break v;
                }
            };
            positions.push(p);
            normals.push(if n.dot(&(cam - p)) < 0.0 { -n } else { n });
            colors.push([rng.random(), rng.random(), rng.random()]);
            labels.push(UNASSIGNED);
        }
    }

    let rot = spec.camera.rotation();
    let to_cam = |p: &Vec3| rot * (p - cam);
    let cam_positions: Vec<Vec3> = positions.iter().map(to_cam).collect();
    let cam_normals: Vec<Vec3> = normals.iter().map(|n| (rot * n).normalize()).collect();
    let planes = world_planes
        .iter()
        .map(|(n, d)| Plane::new(rot * n, n.dot(&cam) + d))
        .collect::<Result<Vec<_>>>()?;

    Ok(Scene {
        cloud: PointCloud::new(cam_positions)?
            .with_colors(colors)?
            .with_normals(cam_normals)?,
        gt: Segmentation::new(labels)?,
        planes,
        floor_label,
        up: spec.camera.up(),
        objects,
    })
}

/// Intrinsics used for rendering synthetic frames (640×480).
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 600.0,
        fy: 600.0,
        cx: 319.5,
        cy: 239.5,
        depth_scale: 0.001,
    }
}

/// A rendered RGB-D frame with a per-pixel label image.
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub depth: Array2<u16>,
    pub rgb: Array3<u8>,
    /// Ground-truth label per pixel, -1 where empty or unlabeled.
    pub labels: Array2<i64>,
    /// Source point index per pixel.
    pub source: Array2<Option<usize>>,
}

/// Z-buffer splat of every point into its nearest pixel.
pub fn render_frame(
    cloud: &PointCloud,
    labels: &Segmentation,
    intr: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> RenderedFrame {
    let mut depth = Array2::<u16>::zeros((height, width));
    let mut rgb = Array3::<u8>::zeros((height, width, 3));
    let mut label_img = Array2::from_elem((height, width), UNASSIGNED);
    let mut source = Array2::from_elem((height, width), None);
    let mut zbuf = Array2::from_elem((height, width), f64::INFINITY);
    for (i, p) in cloud.positions().iter().enumerate() {
        if p.z <= 0.0 {
            continue;
        }
        let (u, v) = intr.project(p);
        let (u, v) = (u.round(), v.round());
        if u < 0.0 || v < 0.0 || u >= width as f64 || v >= height as f64 {
            continue;
        }
        let raw = (p.z / intr.depth_scale).round();
        if raw < 1.0 || raw > u16::MAX as f64 {
            continue;
        }
        let (u, v) = (u as usize, v as usize);
        if p.z < zbuf[[v, u]] {
            zbuf[[v, u]] = p.z;
            depth[[v, u]] = raw as u16;
            label_img[[v, u]] = labels.labels()[i];
            source[[v, u]] = Some(i);
            if let Some(c) = cloud.colors() {
                for ch in 0..3 {
                    rgb[[v, u, ch]] = (c[i][ch] * 255.0).round() as u8;
                }
            }
        }
    }
    RenderedFrame {
        depth,
        rgb,
        labels: label_img,
        source,
    }
}

/// A frame loaded from disk.
#[derive(Debug, Clone)]
pub struct LoadedFrame {
    pub cloud: PointCloud,
    pub gt: Option<Segmentation>,
    /// Pixel `(u, v)` of each point.
    pub pixels: Vec<(usize, usize)>,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
}

/// Reads a depth image, optional RGB, intrinsics and optional label image;
/// back-projects and estimates normals.
pub fn load_rgbd_frame(
    depth_path: &Path,
    rgb_path: Option<&Path>,
    intrinsics_path: &Path,
    gt_label_path: Option<&Path>,
) -> Result<LoadedFrame> {
    let text = std::fs::read_to_string(intrinsics_path).map_err(|e| Error::io(intrinsics_path, e))?;
    let intrinsics = CameraIntrinsics::parse(&text)?;
    let depth = io::image::read_depth(depth_path)?;
    let rgb = rgb_path.map(io::image::read_rgb).transpose()?;
    let frame = depth_to_cloud_indexed(depth.view(), &intrinsics, rgb.as_ref().map(|r| r.view()))?;
    let k = DEFAULT_NORMAL_NEIGHBORS.min(frame.cloud.len());
    let cloud = if k >= 3 {
        estimate_normals(&frame.cloud, k)?.cloud
    } else {
        frame.cloud
    };
    let gt = match gt_label_path {
        Some(path) => {
            let img = io::image::read_label_image(path)?;
            if img.dim() != depth.dim() {
                return Err(Error::Dimension(format!(
                    "label image is {:?}, depth is {:?}",
                    img.dim(),
                    depth.dim()
                )));
            }
            Some(Segmentation::new(
                frame.pixels.iter().map(|&(u, v)| img[[v, u]]).collect(),
            )?)
        }
        None => None,
    };
    Ok(LoadedFrame {
        cloud,
        gt,
        pixels: frame.pixels,
        width: frame.width,
        height: frame.height,
        intrinsics,
    })
}

pub const DEPTH_FILE: &str = "depth.png";
pub const RGB_FILE: &str = "rgb.png";
pub const INTRINSICS_FILE: &str = "intrinsics.txt";
pub const LABEL_IMAGE_FILE: &str = "labels.png";

/// Writes `depth.png`, `rgb.png`, `labels.png` and `intrinsics.txt` into `dir`.
pub fn write_frame(dir: &Path, frame: &RenderedFrame, intr: &CameraIntrinsics) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::image::write_depth(&dir.join(DEPTH_FILE), &frame.depth)?;
    io::image::write_rgb(&dir.join(RGB_FILE), &frame.rgb)?;
    io::image::write_label_image(&dir.join(LABEL_IMAGE_FILE), &frame.labels)?;
    let path = dir.join(INTRINSICS_FILE);
    std::fs::write(&path, intr.to_text()).map_err(|e| Error::io(path, e))
}

/// True when `dir` holds a depth image and intrinsics.
pub fn is_frame_dir(dir: &Path) -> bool {
    dir.join(DEPTH_FILE).is_file() && dir.join(INTRINSICS_FILE).is_file()
}

/// Loads a directory written by [`write_frame`]; RGB and labels are optional.
pub fn read_frame_dir(dir: &Path) -> Result<LoadedFrame> {
    let rgb = dir.join(RGB_FILE);
    let labels = dir.join(LABEL_IMAGE_FILE);
    load_rgbd_frame(
        &dir.join(DEPTH_FILE),
        rgb.is_file().then_some(rgb.as_path()),
        &dir.join(INTRINSICS_FILE),
        labels.is_file().then_some(labels.as_path()),
    )
}

pub const CLOUD_FILE: &str = "cloud.ply";
pub const LABELS_FILE: &str = "gt_labels";
pub const PLANES_FILE: &str = "planes.csv";
pub const SPEC_FILE: &str = "spec";

/// Writes `cloud.ply`, `gt_labels`, `planes.csv` and `spec` into `dir`.
pub fn write_scene(dir: &Path, spec: &SceneSpec, scene: &Scene) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::save_ply(&dir.join(CLOUD_FILE), &scene.cloud, PlyFormat::BinaryLittleEndian)?;
    scene.gt.write(&dir.join(LABELS_FILE))?;
    let mut csv = String::from("label,nx,ny,nz,offset\n");
    for (i, p) in scene.planes.iter().enumerate() {
        let n = p.normal();
        csv.push_str(&format!("{i},{},{},{},{}\n", n.x, n.y, n.z, p.offset()));
    }
    let path = dir.join(PLANES_FILE);
    std::fs::write(&path, csv).map_err(|e| Error::io(path, e))?;
    let mut kv = spec.to_key_values();
    kv.insert("up", format!("{},{},{}", scene.up.x, scene.up.y, scene.up.z));
    let path = dir.join(SPEC_FILE);
    std::fs::write(&path, kv.to_text()).map_err(|e| Error::io(path, e))
}

/// A scene archive read back from disk.
#[derive(Debug, Clone)]
pub struct SceneArchive {
    pub cloud: PointCloud,
    pub gt: Option<Segmentation>,
    pub planes: Vec<Plane>,
    pub spec: Option<SceneSpec>,
    pub up: Option<Vec3>,
}

pub fn read_scene(dir: &Path) -> Result<SceneArchive> {
    let cloud = io::load_ply(&dir.join(CLOUD_FILE))?;
    let labels_path = dir.join(LABELS_FILE);
    let gt = if labels_path.exists() {
        let gt = Segmentation::read(&labels_path)?;
        if gt.len() != cloud.len() {
            return Err(Error::Dimension(format!(
                "{} gt labels for {} points",
                gt.len(),
                cloud.len()
            )));
        }
        Some(gt)
    } else {
        None
    };
    let planes_path = dir.join(PLANES_FILE);
    let mut planes = Vec::new();
    if planes_path.exists() {
        let text = std::fs::read_to_string(&planes_path).map_err(|e| Error::io(&planes_path, e))?;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let v: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::format("planes.csv", format!("bad row `{line}`")))
                })
                .collect::<Result<_>>()?;
            if v.len() != 5 {
                return Err(Error::format("planes.csv", format!("bad row `{line}`")));
            }
            planes.push(Plane::new(Vec3::new(v[1], v[2], v[3]), v[4])?);
        }
    }
    let spec_path = dir.join(SPEC_FILE);
    let (spec, up) = if spec_path.exists() {
        let text = std::fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
        let kv = KeyValues::parse(&text)?;
        let up = kv.get("up").and_then(|s| {
            let v: Vec<f64> = s.split(',').filter_map(|t| t.trim().parse().ok()).collect();
            (v.len() == 3).then(|| Vec3::new(v[0], v[1], v[2]))
        });
        (Some(SceneSpec::from_key_values(&kv)?), up)
    } else {
        (None, None)
    };
    Ok(SceneArchive {
        cloud,
        gt,
        planes,
        spec,
        up,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor_only() -> SceneSpec {
        SceneSpec {
            object_count: 0,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn floor_only_scene() {
        let scene = gen_scene(&floor_only()).unwrap();
        assert_eq!(scene.gt.cluster_count(), 1);
        assert_eq!(scene.planes.len(), 1);
        assert_eq!(scene.floor_label, Some(0));
        // floor normal is world up
        assert!(
            (scene.planes[0].normal() - scene.up).norm() < 1e-12
                || (scene.planes[0].normal() + scene.up).norm() < 1e-12
        );
    }

    #[test]
    fn box_with_three_faces_has_four_planes() {
        let spec = SceneSpec {
            objects: vec![ObjectSpec {
                kind: ObjectKind::Box { visible_faces: 3 },
                center: [0.0, 0.0],
                size: [0.2, 0.15, 0.1],
                yaw: 0.4,
                base: 0.0,
            }],
            ..SceneSpec::default()
        };
        let scene = gen_scene(&spec).unwrap();
        assert_eq!(scene.planes.len(), 4);
        assert_eq!(scene.gt.cluster_count(), 4);
    }

    #[test]
    fn stacked_box_hides_covered_top() {
        let bottom = ObjectSpec {
            kind: ObjectKind::Box { visible_faces: 1 },
            center: [0.0, 0.0],
            size: [0.2, 0.2, 0.1],
            yaw: 0.0,
            base: 0.0,
        };
        let upper = ObjectSpec {
            size: [0.1, 0.1, 0.1],
            base: 0.1,
            ..bottom
        };
        let spec = SceneSpec {
            floor_points: 0,
            noise_sigma: 0.0,
            objects: vec![bottom, upper],
            ..SceneSpec::default()
        };
        let scene = gen_scene(&spec).unwrap();
        // label 0 is the lower top face
        let members = scene.gt.clusters();
        let lower = &members[&0];
        assert_eq!(lower.len(), spec.points_per_face);
        let rot = spec.camera.rotation();
        let cam = spec.camera.position();
        for &i in lower {
            let w = rot.transpose() * scene.cloud.positions()[i] + cam;
            assert!(!upper.covers(w.x, w.y));
        }
    }

    #[test]
    fn noise_mean_matches_folded_normal() {
        let sigma = 0.002;
        let spec = SceneSpec {
            noise_sigma: sigma,
            floor_points: 20_000,
            ..floor_only()
        };
        let scene = gen_scene(&spec).unwrap();
        let plane = scene.planes[0];
        let mean = scene.cloud.positions().iter().map(|p| plane.distance(p)).sum::<f64>() / scene.cloud.len() as f64;
        let expected = sigma * (2.0 / PI).sqrt();
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn labeled_points_near_their_planes_and_deterministic() {
        let spec = SceneSpec {
            noise_sigma: 0.002,
            outlier_fraction: 0.05,
            seed: 4,
            ..SceneSpec::default()
        };
        let a = gen_scene(&spec).unwrap();
        for (p, &l) in a.cloud.positions().iter().zip(a.gt.labels()) {
            if l >= 0 {
                assert!(a.planes[l as usize].distance(p) <= 4.0 * spec.noise_sigma + 1e-12);
            }
        }
        let outliers = a.gt.unassigned_count() as f64 / a.cloud.len() as f64;
        assert!((outliers - 0.05).abs() < 0.005);
        let b = gen_scene(&spec).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.gt, b.gt);
    }

    #[test]
    fn impossible_packing_is_spec_error() {
        let spec = SceneSpec {
            floor_extent: [0.2, 0.2],
            object_count: 30,
            ..SceneSpec::default()
        };
        assert!(matches!(gen_scene(&spec), Err(Error::Spec(_))));
        let bad = SceneSpec {
            outlier_fraction: 1.0,
            ..SceneSpec::default()
        };
        assert!(matches!(gen_scene(&bad), Err(Error::Spec(_))));
    }

    #[test]
    fn scene_in_front_of_camera() {
        let scene = gen_scene(&SceneSpec::default()).unwrap();
        assert!(scene.cloud.positions().iter().all(|p| p.z > 0.1));
        // normals face the camera at the origin
        let facing = scene
            .cloud
            .positions()
            .iter()
            .zip(scene.cloud.normals().unwrap())
            .filter(|(p, n)| n.dot(&(-*p)) > 0.0)
            .count();
        assert_eq!(facing, scene.cloud.len());
    }

    #[test]
    fn spec_key_values_round_trip() {
        let spec = SceneSpec {
            seed: 99,
            objects: vec![ObjectSpec {
                kind: ObjectKind::Cylinder { facets: 10 },
                center: [0.1, -0.05],
                size: [0.08, 0.08, 0.12],
                yaw: 0.0,
                base: 0.0,
            }],
            ..SceneSpec::default()
        };
        let back = SceneSpec::from_key_values(&spec.to_key_values()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn archive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec {
            seed: 3,
            ..SceneSpec::default()
        };
        let scene = gen_scene(&spec).unwrap();
        write_scene(dir.path(), &spec, &scene).unwrap();
        let back = read_scene(dir.path()).unwrap();
        assert_eq!(back.cloud.len(), scene.cloud.len());
        assert_eq!(back.gt.unwrap(), scene.gt);
        assert_eq!(back.planes.len(), scene.planes.len());
        assert_eq!(back.spec.unwrap(), spec);
        assert!((back.up.unwrap() - scene.up).norm() < 1e-12);
    }

    #[test]
    fn rendered_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = gen_scene(&SceneSpec {
            seed: 8,
            ..SceneSpec::default()
        })
        .unwrap();
        let intr = default_intrinsics();
        let frame = render_frame(&scene.cloud, &scene.gt, &intr, 640, 480);
        let (dp, cp, ip, lp) = (
            dir.path().join("depth.png"),
            dir.path().join("rgb.png"),
            dir.path().join("intrinsics.txt"),
            dir.path().join("labels.png"),
        );
        io::image::write_depth(&dp, &frame.depth).unwrap();
        io::image::write_rgb(&cp, &frame.rgb).unwrap();
        io::image::write_label_image(&lp, &frame.labels).unwrap();
        std::fs::write(&ip, intr.to_text()).unwrap();

        let loaded = load_rgbd_frame(&dp, Some(&cp), &ip, Some(&lp)).unwrap();
        let gt = loaded.gt.as_ref().unwrap();
        assert!(loaded.cloud.len() > scene.cloud.len() / 2);
        for (i, &(u, v)) in loaded.pixels.iter().enumerate() {
            let src = frame.source[[v, u]].unwrap();
            // half a pixel plus half a depth unit at under 1.5 m stays inside a 5 mm voxel
            assert!((loaded.cloud.position(i) - scene.cloud.position(src)).norm() < 0.005);
            assert_eq!(gt.labels()[i], scene.gt.labels()[src]);
        }
        assert!(loaded.cloud.normals().is_some());
    }

    #[test]
    fn frame_dir_round_trip() {
        let spec = SceneSpec {
            object_count: 2,
            ..SceneSpec::default()
        };
        let scene = gen_scene(&spec).unwrap();
        let intr = default_intrinsics();
        let frame = render_frame(&scene.cloud, &scene.gt, &intr, 640, 480);
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), &frame, &intr).unwrap();
        assert!(is_frame_dir(dir.path()));
        let loaded = read_frame_dir(dir.path()).unwrap();
        let filled = frame.source.iter().filter(|s| s.is_some()).count();
        assert_eq!(loaded.cloud.len(), filled);
        let gt = loaded.gt.unwrap();
        for (i, &(u, v)) in loaded.pixels.iter().enumerate() {
            assert_eq!(gt.labels()[i], frame.labels[[v, u]]);
        }
    }

    #[test]
    fn blank_frame_is_empty_cloud() {
        let dir = tempfile::tempdir().unwrap();
        let dp = dir.path().join("depth.png");
        let ip = dir.path().join("intr.txt");
        io::image::write_depth(&dp, &Array2::zeros((8, 8))).unwrap();
        std::fs::write(&ip, default_intrinsics().to_text()).unwrap();
        assert!(matches!(load_rgbd_frame(&dp, None, &ip, None), Err(Error::EmptyCloud)));
    }
}
