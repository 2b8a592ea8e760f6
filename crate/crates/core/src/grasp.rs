//! Suction target selection: the centroid of the planar cluster that sits
//! highest above the floor.

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Vec3};
use crate::merge::ClusterDict;
use crate::segmentation::Segmentation;

pub const DEFAULT_FLOOR_CONE_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grasp {
    pub point: Vec3,
    pub cluster: usize,
    pub floor: usize,
    /// Height of `point` above the floor plane.
    pub height: f64,
}

/// The floor is the largest cluster whose plane normal lies within
/// `cone_deg` of `±up`; the target is the other planar cluster whose
/// centroid is farthest above it (ties to the lowest id).
pub fn grasp_point(
    seg: &Segmentation,
    cloud: &PointCloud,
    dict: &ClusterDict,
    up: &Vec3,
    cone_deg: f64,
) -> Result<Grasp> {
    if seg.len() != cloud.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} points",
            seg.len(),
            cloud.len()
        )));
    }
    let up = up
        .try_normalize(1e-12)
        .ok_or_else(|| Error::input("up vector must be non-zero"))?;
    let cos_cone = cone_deg.to_radians().cos();
    let mut floor: Option<(usize, usize)> = None;
    for (&id, c) in dict {
        let Some(plane) = c.plane else { continue };
        if plane.normal().dot(&up).abs() >= cos_cone && floor.is_none_or(|(_, n)| c.indices.len() > n) {
            floor = Some((id, c.indices.len()));
        }
    }
    let (floor_id, _) = floor.ok_or(Error::NoFloor)?;
    let floor_plane = dict[&floor_id].plane.unwrap();
    let sign = floor_plane.normal().dot(&up).signum();
    let mut best: Option<(usize, Vec3, f64)> = None;
    for (&id, c) in dict {
        if id == floor_id || c.plane.is_none() || c.indices.is_empty() {
            continue;
        }
        let centroid = cloud.centroid_of(&c.indices);
        let height = sign * floor_plane.signed_distance(&centroid);
        if best.is_none_or(|b| height > b.2) {
            best = Some((id, centroid, height));
        }
    }
    let (cluster, point, height) = best.ok_or(Error::NothingToGrasp)?;
    Ok(Grasp {
        point,
        cluster,
        floor: floor_id,
        height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge::Cluster;
    use crate::plane::fit_plane_lsq;

    fn square(cx: f64, cy: f64, z: f64, half: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(Vec3::new(
                    cx - half + i as f64 * half / 2.0,
                    cy - half + j as f64 * half / 2.0,
                    z,
                ));
            }
        }
        pts
    }

    fn scene(parts: Vec<Vec<Vec3>>) -> (Segmentation, PointCloud, ClusterDict) {
        let mut all = Vec::new();
        let mut dict = ClusterDict::new();
        let mut labels = Vec::new();
        for (id, p) in parts.into_iter().enumerate() {
            let start = all.len();
            let plane = fit_plane_lsq(&p).ok();
            labels.extend(std::iter::repeat_n(id as i64, p.len()));
            all.extend(p);
            dict.insert(
                id,
                Cluster {
                    indices: (start..all.len()).collect(),
                    plane,
                },
            );
        }
        (Segmentation::new(labels).unwrap(), PointCloud::new(all).unwrap(), dict)
    }

    #[test]
    fn picks_tallest_top() {
        let floor = square(0.0, 0.0, 0.0, 1.0);
        let (seg, cloud, dict) = scene(vec![floor, square(0.3, 0.0, 0.1, 0.05), square(-0.3, 0.0, 0.3, 0.05)]);
        let g = grasp_point(&seg, &cloud, &dict, &Vec3::z(), 30.0).unwrap();
        assert_eq!((g.cluster, g.floor), (2, 0));
        assert!((g.point - Vec3::new(-0.3, 0.0, 0.3)).norm() < 1e-12);
        // a downward up vector flips which side counts as above
        let g = grasp_point(&seg, &cloud, &dict, &-Vec3::z(), 30.0).unwrap();
        assert_eq!(g.cluster, 1);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let (seg, cloud, dict) = scene(vec![
            square(0.0, 0.0, 0.0, 1.0),
            square(0.3, 0.0, 0.2, 0.05),
            square(-0.3, 0.0, 0.2, 0.05),
        ]);
        assert_eq!(grasp_point(&seg, &cloud, &dict, &Vec3::z(), 30.0).unwrap().cluster, 1);
    }

    #[test]
    fn floor_only_and_no_floor() {
        let (seg, cloud, dict) = scene(vec![square(0.0, 0.0, 0.0, 1.0)]);
        assert!(matches!(
            grasp_point(&seg, &cloud, &dict, &Vec3::z(), 30.0),
            Err(Error::NothingToGrasp)
        ));
        assert!(matches!(
            grasp_point(&seg, &cloud, &dict, &Vec3::x(), 30.0),
            Err(Error::NoFloor)
        ));
    }
}
