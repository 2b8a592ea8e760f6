//! Inference: split the cloud with K-means, cluster each split around voted
//! representatives, and fit a plane to every cluster.

use super::loss::VoteNorm;
use super::net::{Mode, VotingNet};
use super::train::{cluster_cloud, Step};
use crate::error::{Error, Result};
use crate::geom::{kmeans, standardize, PointCloud};
use crate::merge::{Cluster, ClusterDict};
use crate::par;
use crate::plane::RansacParams;
use crate::rng;
use ndarray::Axis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferConfig {
    /// Representatives per split.
    pub k: usize,
    pub splits: usize,
    pub ransac: RansacParams,
    pub seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            k: 64,
            splits: 3,
            ransac: RansacParams {
                min_inliers: 3,
                ..RansacParams::default()
            },
            seed: 0,
        }
    }
}

impl InferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.splits < 1 {
            return Err(Error::input("k and splits must be >= 1"));
        }
        self.ransac.validate()
    }
}

/// A split of the cloud and its clustering.
pub struct SplitStep {
    /// Cloud indices of the split's points.
    pub indices: Vec<usize>,
    pub step: Step,
}

/// K-means split followed by per-split voting, assignment and RANSAC.
pub fn infer_steps(net: Option<&VotingNet>, cloud: &PointCloud, config: &InferConfig) -> Result<Vec<SplitStep>> {
    config.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let features = cloud.features9();
    let splits = config.splits.min(cloud.len());
    let assignment = kmeans(standardize(features.view()).view(), splits, config.seed)?;
    let mut members = vec![Vec::new(); splits];
    for (i, &l) in assignment.labels.iter().enumerate() {
        members[l].push(i);
    }
    par::map_range(splits, |s| -> Result<Option<SplitStep>> {
        let idx = &members[s];
        if idx.is_empty() {
            return Ok(None);
        }
        let sub = features.select(Axis(0), idx);
        let seed = rng::derive_seed(config.seed, s as u64 + 1);
        let step = cluster_cloud(net, sub.view(), config.k, Mode::Eval, &config.ransac, seed)?;
        Ok(Some(SplitStep {
            indices: idx.clone(),
            step,
        }))
    })
    .into_iter()
    .filter_map(Result::transpose)
    .collect()
}

/// One cluster dictionary per split. Without a network the votes are zero,
/// so clusters are plain Voronoi cells of the sampled points.
pub fn infer_subplanes(net: Option<&VotingNet>, cloud: &PointCloud, config: &InferConfig) -> Result<Vec<ClusterDict>> {
    let steps = infer_steps(net, cloud, config)?;
    let mut dicts: Vec<ClusterDict> = steps
        .into_iter()
        .map(|SplitStep { indices, step }| {
            let mut dict = ClusterDict::new();
            for (k, (cluster, label)) in step
                .clustering
                .members()
                .into_iter()
                .zip(step.labels.clusters)
                .enumerate()
            {
                if !cluster.is_empty() {
                    dict.insert(
                        k,
                        Cluster {
                            indices: cluster.iter().map(|&i| indices[i]).collect(),
                            plane: label.plane,
                        },
                    );
                }
            }
            dict
        })
        .collect();
    dicts.resize(config.splits.min(cloud.len()), ClusterDict::new());
    Ok(dicts)
}

/// Mean L1 distance (vote frame) from every pseudo-inlier to its cluster's
/// representative, over all splits.
pub fn inlier_spread(net: Option<&VotingNet>, cloud: &PointCloud, config: &InferConfig) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for s in infer_steps(net, cloud, config)? {
        let c = &s.step.clustering;
        for (k, label) in s.step.labels.clusters.iter().enumerate() {
            for &i in &label.inliers {
                sum += VoteNorm::L1.of(&(c.voted[i] - c.representatives[k]));
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::input("no pseudo-inliers"));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpc::net::NetConfig;
    use crate::synth::{gen_scene, SceneSpec};

    #[test]
    fn deterministic_and_disjoint() {
        let scene = gen_scene(&SceneSpec {
            seed: 2,
            ..SceneSpec::default()
        })
        .unwrap();
        let net = VotingNet::new(&NetConfig {
            backbone: vec![16],
            ..NetConfig::default()
        })
        .unwrap();
        let a = infer_subplanes(Some(&net), &scene.cloud, &InferConfig::default()).unwrap();
        let b = infer_subplanes(Some(&net), &scene.cloud, &InferConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let mut all: Vec<usize> = a
            .iter()
            .flat_map(|d| d.values())
            .flat_map(|c| c.indices.clone())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..scene.cloud.len()).collect::<Vec<_>>());
    }

    #[test]
    fn small_splits_and_missing_colors() {
        let scene = gen_scene(&SceneSpec {
            object_count: 1,
            floor_points: 100,
            points_per_face: 20,
            ..SceneSpec::default()
        })
        .unwrap();
        let cloud = scene.cloud.without_colors();
        let dicts = infer_subplanes(
            None,
            &cloud,
            &InferConfig {
                k: 500,
                ..InferConfig::default()
            },
        )
        .unwrap();
        // every point is its own representative when K exceeds the split
        assert_eq!(dicts.iter().map(|d| d.len()).sum::<usize>(), cloud.len());
        assert!(
            inlier_spread(
                None,
                &cloud,
                &InferConfig {
                    k: 8,
                    ..InferConfig::default()
                }
            )
            .unwrap()
                >= 0.0
        );
        assert!(inlier_spread(None, &cloud, &InferConfig::default()).is_err());
    }
}
