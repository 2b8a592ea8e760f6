//! Plane model, total-least-squares fitting, RANSAC and the sequential
//! multi-plane baseline.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{covariance, sorted_eigen, PointCloud, Vec3};
use crate::segmentation::Segmentation;
use crate::{par, rng};

/// Hypotheses whose edge cross product is below this fraction of the edge
/// lengths' product are collinear and skipped.
const COLLINEAR_TOLERANCE: f64 = 1e-9;
/// Relative eigenvalue gap below which a least-squares fit is degenerate.
const FIT_RANK_TOLERANCE: f64 = 1e-12;
/// Attempts at drawing a non-collinear triple per hypothesis.
const MAX_DRAWS: usize = 64;
const SIGN_EPS: f64 = 1e-12;

/// `{x : normal · x + offset = 0}` with a unit normal whose first nonzero
/// component is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Vec3,
    offset: f64,
}

impl Plane {
    /// Normalizes and canonicalizes `normal · x + offset = 0`.
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() || !offset.is_finite() {
            return Err(Error::DegenerateFit("plane normal must be finite and nonzero"));
        }
        let (mut n, mut d) = (normal / len, offset / len);
        let first = n.iter().copied().find(|c| c.abs() > SIGN_EPS).unwrap_or(0.0);
        if first < 0.0 {
            n = -n;
            d = -d;
        }
        Ok(Self { normal: n, offset: d })
    }

    pub fn from_point_normal(point: &Vec3, normal: &Vec3) -> Result<Self> {
        Self::new(*normal, -normal.dot(point))
    }

    /// The plane through three points, if they are not collinear.
    pub fn through(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Self> {
        let (e1, e2) = (b - a, c - a);
        let cross = e1.cross(&e2);
        let scale = e1.norm() * e2.norm();
        if !(cross.norm() > COLLINEAR_TOLERANCE * scale) {
            return None;
        }
        Self::from_point_normal(a, &cross).ok()
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.signed_distance(p).abs()
    }

    /// Angle between the plane normals, ignoring orientation, in radians.
    pub fn angle_to(&self, other: &Plane) -> f64 {
        self.normal.dot(&other.normal).abs().min(1.0).acos()
    }
}

pub fn point_plane_distance(plane: &Plane, p: &Vec3) -> f64 {
    plane.distance(p)
}

/// Total-least-squares plane through the centroid.
pub fn fit_plane_lsq(points: &[Vec3]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let (centroid, cov) = covariance(points);
    let (vals, vecs) = sorted_eigen(cov);
    if !(vals[2] > 0.0) || vals[1] <= FIT_RANK_TOLERANCE * vals[2] {
        return Err(Error::DegenerateFit("points are collinear or coincident"));
    }
    Plane::from_point_normal(&centroid, &vecs[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Points strictly closer than this (meters) are inliers.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.005,
            max_iterations: 200,
            min_inliers: 50,
            seed: 0,
        }
    }
}

impl RansacParams {
    /// Defaults with `min_inliers = max(50, 0.5% of n)`.
    pub fn for_cloud_size(n: usize) -> Self {
        Self {
            min_inliers: 50.max(n / 200),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) || !self.inlier_threshold.is_finite() {
            return Err(Error::input("ransac inlier_threshold must be > 0"));
        }
        if self.max_iterations < 1 {
            return Err(Error::input("ransac max_iterations must be >= 1"));
        }
        if self.min_inliers < 3 {
            return Err(Error::input("ransac min_inliers must be >= 3"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub plane: Plane,
    /// Indices with distance < threshold to `plane`, ascending.
    pub inliers: Vec<usize>,
    /// The complement of `inliers`, ascending.
    pub outliers: Vec<usize>,
    /// Support of the best sampled hypothesis, before the refit.
    pub consensus: usize,
}

fn count_inliers(points: &[Vec3], plane: &Plane, threshold: f64) -> usize {
    points.iter().filter(|p| plane.distance(p) < threshold).count()
}

fn hypothesis(points: &[Vec3], seed: u64, iteration: usize) -> Option<Plane> {
    let mut rng = rng::stream(seed, iteration as u64);
    let n = points.len();
    for _ in 0..MAX_DRAWS {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        if a == b || b == c || a == c {
            continue;
        }
        if let Some(plane) = Plane::through(&points[a], &points[b], &points[c]) {
            return Some(plane);
        }
    }
    None
}

/// Three-point RANSAC with one least-squares refit and recount.
///
/// Each iteration draws from its own derived RNG stream so the result does not
/// depend on thread count. Collinear triples are redrawn rather than counted.
pub fn ransac_plane(points: &[Vec3], params: &RansacParams) -> Result<RansacFit> {
    params.validate()?;
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let thr = params.inlier_threshold;
    let scored = par::map_range(params.max_iterations, |it| {
        hypothesis(points, params.seed, it).map(|plane| (count_inliers(points, &plane, thr), plane))
    });
    let mut best: Option<(usize, Plane)> = None;
    for (count, plane) in scored.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| count > b.0) {
            best = Some((count, plane));
        }
    }
    let Some((consensus, hypothesis_plane)) = best else {
        return Err(Error::NoPlaneFound {
            best: 0,
            min: params.min_inliers,
        });
    };

    let support: Vec<Vec3> = points
        .iter()
        .filter(|p| hypothesis_plane.distance(p) < thr)
        .copied()
        .collect();
    let plane = fit_plane_lsq(&support).unwrap_or(hypothesis_plane);
    let (inliers, outliers): (Vec<usize>, Vec<usize>) =
        (0..points.len()).partition(|&i| plane.distance(&points[i]) < thr);
    if inliers.len() < params.min_inliers {
        return Err(Error::NoPlaneFound {
            best: inliers.len(),
            min: params.min_inliers,
        });
    }
    Ok(RansacFit {
        plane,
        inliers,
        outliers,
        consensus,
    })
}

/// Iterative multi-plane extraction: fit a plane, label its inliers, repeat
/// on the remainder. Labels follow extraction order; leftovers are -1.
pub fn sequential_multiplane(
    cloud: &PointCloud,
    params: &RansacParams,
    max_planes: usize,
) -> Result<(Segmentation, Vec<Plane>)> {
    params.validate()?;
    if cloud.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: cloud.len(),
        });
    }
    let mut seg = Segmentation::unassigned(cloud.len());
    let mut planes = Vec::new();
    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    while planes.len() < max_planes && remaining.len() >= 3 {
        let pts: Vec<Vec3> = remaining.iter().map(|&i| cloud.position(i)).collect();
        let round = RansacParams {
            seed: rng::derive_seed(params.seed, planes.len() as u64),
            ..*params
        };
        let fit = match ransac_plane(&pts, &round) {
            Ok(fit) => fit,
            Err(Error::NoPlaneFound { .. }) => break,
            Err(e) => return Err(e),
        };
        let label = planes.len() as i64;
        for &i in &fit.inliers {
            seg.set(remaining[i], label);
        }
        remaining = fit.outliers.iter().map(|&i| remaining[i]).collect();
        planes.push(fit.plane);
    }
    Ok((seg, planes))
}
