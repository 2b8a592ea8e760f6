use std::collections::HashMap;

use super::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};

pub type VoxelKey = [i64; 3];

/// Integer voxel coordinates of `p` in a grid anchored at `origin`.
pub fn voxel_key(p: &Vec3, origin: &Vec3, voxel: f64) -> VoxelKey {
    let r = (p - origin) / voxel;
    [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
}

/// Member indices of every occupied voxel, sorted by voxel key.
pub fn voxel_groups(positions: &[Vec3], origin: &Vec3, voxel: f64) -> Vec<(VoxelKey, Vec<usize>)> {
    let mut map: HashMap<VoxelKey, Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        map.entry(voxel_key(p, origin, voxel)).or_default().push(i);
    }
    let mut groups: Vec<_> = map.into_iter().collect();
    groups.sort_unstable_by_key(|g| g.0);
    groups
}

/// One point per occupied voxel at the centroid of its members. Colors are
/// averaged, normals averaged and re-normalized. The grid is anchored at the
/// cloud's minimum corner.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(Error::input(format!("voxel size must be positive, got {voxel}")));
    }
    let Some((origin, _)) = cloud.bounds() else {
        return Ok(cloud.clone());
    };
    let groups = voxel_groups(cloud.positions(), &origin, voxel);
    Ok(aggregate(cloud, &groups))
}

fn aggregate(cloud: &PointCloud, groups: &[(VoxelKey, Vec<usize>)]) -> PointCloud {
    // Offsets from the first member keep coincident points exact.
    let mean_vec = |src: &[Vec3], idx: &[usize]| {
        let base = src[idx[0]];
        base + idx.iter().fold(Vec3::zeros(), |a, &i| a + (src[i] - base)) / idx.len() as f64
    };
    let positions: Vec<Vec3> = groups.iter().map(|(_, g)| mean_vec(cloud.positions(), g)).collect();
    let mut out = PointCloud::new(positions).expect("centroids of finite points are finite");
    if let Some(colors) = cloud.colors() {
        let avg = groups
            .iter()
            .map(|(_, g)| {
                let mut c = [0.0; 3];
                for &i in g {
                    for ch in 0..3 {
                        c[ch] += colors[i][ch];
                    }
                }
                c.map(|v| v / g.len() as f64)
            })
            .collect();
        out = out.with_colors(avg).expect("one color per voxel");
    }
    if let Some(normals) = cloud.normals() {
        let avg = groups
            .iter()
            .map(|(_, g)| {
                let s = g.iter().fold(Vec3::zeros(), |a, &i| a + normals[i]);
                // Opposing normals can cancel; fall back to the first member's.
                s.try_normalize(1e-12).unwrap_or(normals[g[0]])
            })
            .collect();
        out = out.with_normals(avg).expect("unit normals");
    }
    out
}

/// Downsamples to within ±5% of `target` points by bisecting the voxel size.
/// Clouds already at or below the target are returned unchanged. Returns the
/// cloud and the voxel size used (0 when unchanged).
pub fn downsample_to_count(cloud: &PointCloud, target: usize) -> Result<(PointCloud, f64)> {
    if target == 0 {
        return Err(Error::input("target point count must be positive"));
    }
    if cloud.len() <= target {
        return Ok((cloud.clone(), 0.0));
    }
    let (lo_corner, hi_corner) = cloud.bounds().expect("non-empty");
    let origin = lo_corner;
    let diag = (hi_corner - lo_corner).norm().max(1e-9);
    let tolerance = (target as f64 * 0.05).max(1.0);
    let count = |v: f64| voxel_groups(cloud.positions(), &origin, v).len();

    // Count is (nearly) decreasing in voxel size; bisect in log space.
    let (mut lo, mut hi) = (diag * 1e-7, diag * 2.0);
    let mut best = (hi, count(hi));
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        let c = count(mid);
        if (c as f64 - target as f64).abs() < (best.1 as f64 - target as f64).abs() {
            best = (mid, c);
        }
        if (c as f64 - target as f64).abs() <= tolerance {
            break;
        }
        if c > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let voxel = best.0;
    let groups = voxel_groups(cloud.positions(), &origin, voxel);
    Ok((aggregate(cloud, &groups), voxel))
}
