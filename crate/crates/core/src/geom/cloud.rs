use ndarray::{Array2, ArrayView2, ArrayView3};

use crate::error::{Error, Result};
use crate::io::kv::KeyValues;

pub type Vec3 = nalgebra::Vector3<f64>;

const NORMAL_TOLERANCE: f64 = 1e-6;

/// Points with optional per-point RGB (in `[0, 1]`) and unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    colors: Option<Vec<[f64; 3]>>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::input(format!("non-finite position at index {i}")));
        }
        Ok(Self {
            positions,
            colors: None,
            normals: None,
        })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} colors for {} points",
                colors.len(),
                self.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} normals for {} points",
                normals.len(),
                self.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| !((n.norm() - 1.0).abs() <= NORMAL_TOLERANCE))
        {
            return Err(Error::input(format!("normal {i} is not unit length")));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn without_colors(mut self) -> Self {
        self.colors = None;
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[f64; 3]]> {
        self.colors.as_deref()
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.positions[i]
    }

    /// Subset in the order of `indices`.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    /// N×9 rows of (xyz, rgb, normal). Missing channels are zero.
    pub fn features9(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.len(), 9));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let p = self.positions[i];
            row[0] = p.x;
            row[1] = p.y;
            row[2] = p.z;
            if let Some(c) = &self.colors {
                row[3] = c[i][0];
                row[4] = c[i][1];
                row[5] = c[i][2];
            }
            if let Some(n) = &self.normals {
                row[6] = n[i].x;
                row[7] = n[i].y;
                row[8] = n[i].z;
            }
        }
        out
    }

    /// Axis-aligned (min, max) corners, `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.positions.first()?;
        Some(
            self.positions
                .iter()
                .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
        )
    }

    pub fn centroid_of(&self, indices: &[usize]) -> Vec3 {
        let sum = indices.iter().fold(Vec3::zeros(), |acc, &i| acc + self.positions[i]);
        sum / indices.len().max(1) as f64
    }
}

/// Pinhole intrinsics plus the raw-depth-to-meters factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, depth_scale: f64) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            depth_scale,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.fx, self.fy, self.cx, self.cy, self.depth_scale]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.fx <= 0.0 || self.fy <= 0.0 || self.depth_scale <= 0.0 {
            return Err(Error::input(format!(
                "intrinsics require fx, fy, depth_scale > 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Parses `fx`, `fy`, `cx`, `cy`, `depth_scale` from `key = value` text.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let get = |k: &str| -> Result<f64> {
            kv.get_f64(k)?
                .ok_or_else(|| Error::format("intrinsics", format!("missing key `{k}`")))
        };
        Self::new(get("fx")?, get("fy")?, get("cx")?, get("cy")?, get("depth_scale")?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\ndepth_scale = {}\n",
            self.fx, self.fy, self.cx, self.cy, self.depth_scale
        )
    }

    /// Pixel coordinates (u, v) of a camera-frame point with z > 0.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn back_project(&self, u: f64, v: f64, z: f64) -> Vec3 {
        Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }
}

/// A cloud built from a depth frame, with the source pixel `(u, v)` of each point.
#[derive(Debug, Clone)]
pub struct FrameCloud {
    pub cloud: PointCloud,
    pub pixels: Vec<(usize, usize)>,
    pub width: usize,
    pub height: usize,
}

/// Back-projects every pixel with nonzero depth. `depth` is indexed
/// `[row, col] = [v, u]`; `rgb` is `[v, u, channel]`.
pub fn depth_to_cloud(
    depth: ArrayView2<u16>,
    intrinsics: &CameraIntrinsics,
    rgb: Option<ArrayView3<u8>>,
) -> Result<PointCloud> {
    depth_to_cloud_indexed(depth, intrinsics, rgb).map(|f| f.cloud)
}

pub fn depth_to_cloud_indexed(
    depth: ArrayView2<u16>,
    intrinsics: &CameraIntrinsics,
    rgb: Option<ArrayView3<u8>>,
) -> Result<FrameCloud> {
    intrinsics.validate()?;
    let (height, width) = depth.dim();
    if let Some(rgb) = &rgb {
        let (h, w, c) = rgb.dim();
        if (h, w) != (height, width) || c != 3 {
            return Err(Error::Dimension(format!(
                "rgb is {w}x{h}x{c}, depth is {width}x{height}"
            )));
        }
    }
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut pixels = Vec::new();
    for ((v, u), &d) in depth.indexed_iter() {
        if d == 0 {
            continue;
        }
        let z = d as f64 * intrinsics.depth_scale;
        positions.push(intrinsics.back_project(u as f64, v as f64, z));
        pixels.push((u, v));
        if let Some(rgb) = &rgb {
            colors.push([
                rgb[[v, u, 0]] as f64 / 255.0,
                rgb[[v, u, 1]] as f64 / 255.0,
                rgb[[v, u, 2]] as f64 / 255.0,
            ]);
        }
    }
    if positions.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut cloud = PointCloud::new(positions)?;
    if rgb.is_some() {
        cloud = cloud.with_colors(colors)?;
    }
    Ok(FrameCloud {
        cloud,
        pixels,
        width,
        height,
    })
}
