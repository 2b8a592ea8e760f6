use nalgebra::{Matrix3, SymmetricEigen};

use super::cloud::{PointCloud, Vec3};
use super::kdtree::KdTree;
use crate::error::{Error, Result};
use crate::par;

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 30;

/// Neighborhoods whose second-largest covariance eigenvalue falls below this
/// fraction of the largest are treated as rank < 2.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NormalEstimation {
    pub cloud: PointCloud,
    /// Points whose neighborhood was rank-deficient (collinear or coincident).
    pub degenerate: Vec<bool>,
}

impl NormalEstimation {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

/// PCA normals over the `k` nearest neighbors (the point included), oriented
/// toward the origin.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalEstimation> {
    estimate_normals_toward(cloud, k, Vec3::zeros())
}

pub fn estimate_normals_toward(cloud: &PointCloud, k: usize, viewpoint: Vec3) -> Result<NormalEstimation> {
    if k < 3 {
        return Err(Error::input(format!("normal estimation needs k >= 3, got {k}")));
    }
    if cloud.len() < k {
        return Err(Error::InsufficientPoints {
            needed: k,
            got: cloud.len(),
        });
    }
    let positions = cloud.positions();
    let tree = KdTree::build(positions);
    let estimates = par::map_range(positions.len(), |i| {
        let nbrs = tree.nearest(&positions[i], k);
        let pts: Vec<Vec3> = nbrs.iter().map(|&j| positions[j]).collect();
        let (mut normal, degenerate) = neighborhood_normal(&pts);
        if normal.dot(&(viewpoint - positions[i])) < 0.0 {
            normal = -normal;
        }
        (normal, degenerate)
    });
    let (normals, degenerate): (Vec<Vec3>, Vec<bool>) = estimates.into_iter().unzip();
    Ok(NormalEstimation {
        cloud: cloud.clone().with_normals(normals)?,
        degenerate,
    })
}

pub(crate) fn covariance(points: &[Vec3]) -> (Vec3, Matrix3<f64>) {
    let n = points.len().max(1) as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - centroid;
        acc + d * d.transpose()
    }) / n;
    (centroid, cov)
}

/// Eigenpairs sorted by ascending eigenvalue.
pub(crate) fn sorted_eigen(cov: Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let vecs = idx.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (vals, vecs)
}

/// Unit normal of a neighborhood and whether it was rank-deficient.
pub(crate) fn neighborhood_normal(points: &[Vec3]) -> (Vec3, bool) {
    let (_, cov) = covariance(points);
    let (vals, vecs) = sorted_eigen(cov);
    let scale = vals[2].abs();
    if scale <= f64::MIN_POSITIVE {
        return (orthogonal_to(&Vec3::x()), true);
    }
    if vals[1] <= RANK_TOLERANCE * scale {
        return (orthogonal_to(&vecs[2]), true);
    }
    (vecs[0], false)
}

/// A unit vector orthogonal to `dir`, built from the coordinate axis least
/// aligned with it (lowest axis index on ties).
pub(crate) fn orthogonal_to(dir: &Vec3) -> Vec3 {
    let d = dir.normalize();
    let axis = (0..3)
        .min_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()).then(a.cmp(&b)))
        .unwrap_or(0);
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    (e - d * d.dot(&e)).normalize()
}
