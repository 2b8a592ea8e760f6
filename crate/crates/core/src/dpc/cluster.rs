//! Nearest-representative grouping of voted points and per-group RANSAC
//! pseudo-labels.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::par;
use crate::plane::{ransac_plane, Plane, RansacParams};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SubplaneClustering {
    /// Representative index per point, `0..K`.
    pub labels: Vec<usize>,
    /// Point indices the representatives were taken from.
    pub sample_indices: Vec<usize>,
    /// Voted positions of the sampled points.
    pub representatives: Vec<Vec3>,
    /// Voted position of every point.
    pub voted: Vec<Vec3>,
}

impl SubplaneClustering {
    pub fn k(&self) -> usize {
        self.representatives.len()
    }

    /// Member indices of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Labels every voted point with its nearest representative (L2), ties to
/// the lowest representative.
pub fn assign_clusters(voted: &[Vec3], sample_indices: &[usize]) -> Result<SubplaneClustering> {
    if sample_indices.is_empty() {
        return Err(Error::input("need at least one representative"));
    }
    let mut seen = std::collections::HashSet::new();
    for &s in sample_indices {
        if s >= voted.len() {
            return Err(Error::input(format!(
                "sample index {s} out of range for {} points",
                voted.len()
            )));
        }
        if !seen.insert(s) {
            return Err(Error::input(format!("duplicate sample index {s}")));
        }
    }
    let representatives: Vec<Vec3> = sample_indices.iter().map(|&s| voted[s]).collect();
    let labels = par::map_slice(voted, |p| {
        let mut best = (f64::INFINITY, 0);
        for (k, r) in representatives.iter().enumerate() {
            let d = (p - r).norm_squared();
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    });
    Ok(SubplaneClustering {
        labels,
        sample_indices: sample_indices.to_vec(),
        representatives,
        voted: voted.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPseudoLabel {
    pub inliers: Vec<usize>,
    pub outliers: Vec<usize>,
    pub plane: Option<Plane>,
    /// Fewer than 3 members; contributes nothing to the loss.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub clusters: Vec<ClusterPseudoLabel>,
}

impl PseudoLabels {
    pub fn active_count(&self) -> usize {
        self.clusters.iter().filter(|c| !c.skipped).count()
    }
}

/// RANSAC on the original positions of every cluster's members. Cluster `k`
/// uses a seed derived from `params.seed` and `k`.
pub fn pseudo_labels(
    positions: &[Vec3],
    clustering: &SubplaneClustering,
    params: &RansacParams,
) -> Result<PseudoLabels> {
    params.validate()?;
    if clustering.labels.len() != positions.len() {
        return Err(Error::Dimension(format!(
            "clustering covers {} points, cloud has {}",
            clustering.labels.len(),
            positions.len()
        )));
    }
    let members = clustering.members();
    let clusters = par::map_range(members.len(), |k| {
        let idx = &members[k];
        if idx.len() < 3 {
            return ClusterPseudoLabel {
                inliers: Vec::new(),
                outliers: idx.clone(),
                plane: None,
                skipped: true,
            };
        }
        let pts: Vec<Vec3> = idx.iter().map(|&i| positions[i]).collect();
        let local = RansacParams {
            seed: rng::derive_seed(params.seed, k as u64),
            ..*params
        };
        match ransac_plane(&pts, &local) {
            Ok(fit) => ClusterPseudoLabel {
                inliers: fit.inliers.iter().map(|&i| idx[i]).collect(),
                outliers: fit.outliers.iter().map(|&i| idx[i]).collect(),
                plane: Some(fit.plane),
                skipped: false,
            },
            Err(_) => ClusterPseudoLabel {
                inliers: Vec::new(),
                outliers: idx.clone(),
                plane: None,
                skipped: false,
            },
        }
    });
    Ok(PseudoLabels { clusters })
}
