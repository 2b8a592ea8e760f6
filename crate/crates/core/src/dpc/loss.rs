//! Per-cluster contrastive loss: pull pseudo-inliers onto the cluster
//! representative, push pseudo-outliers at least `alpha` away from it.

use ndarray::Array2;

use super::cluster::{PseudoLabels, SubplaneClustering};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoteNorm {
    #[default]
    L1,
    L2,
}

impl VoteNorm {
    pub fn of(self, v: &Vec3) -> f64 {
        match self {
            VoteNorm::L1 => v.abs().sum(),
            VoteNorm::L2 => v.norm(),
        }
    }

    /// Subgradient; zero at the origin.
    fn grad(self, v: &Vec3) -> Vec3 {
        match self {
            VoteNorm::L1 => v.map(|c| {
                if c > 0.0 {
                    1.0
                } else if c < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }),
            VoteNorm::L2 => {
                let n = v.norm();
                if n > 0.0 {
                    v / n
                } else {
                    Vec3::zeros()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    /// Mean of `per_cluster` over clusters that were not skipped.
    pub total: f64,
    /// Loss of every cluster; 0 for skipped ones.
    pub per_cluster: Vec<f64>,
}

/// Loss and its gradient with respect to every voted point. Assignments and
/// pseudo-labels are constants.
pub fn contrastive_loss_with_grad(
    clustering: &SubplaneClustering,
    labels: &PseudoLabels,
    alpha: f64,
    norm: VoteNorm,
) -> (LossValue, Array2<f64>) {
    let n = clustering.voted.len();
    let mut grad = Array2::zeros((n, 3));
    let mut per_cluster = vec![0.0; labels.clusters.len()];
    let active = labels.active_count();
    if active == 0 {
        return (
            LossValue {
                total: 0.0,
                per_cluster,
            },
            grad,
        );
    }
    let scale = 1.0 / active as f64;
    let mut add = |i: usize, g: Vec3| {
        for c in 0..3 {
            grad[[i, c]] += g[c];
        }
    };
    for (k, lab) in labels.clusters.iter().enumerate() {
        if lab.skipped {
            continue;
        }
        let rep = clustering.representatives[k];
        let rep_idx = clustering.sample_indices[k];
        let mut loss = 0.0;
        if !lab.inliers.is_empty() {
            let w = 1.0 / lab.inliers.len() as f64;
            for &i in &lab.inliers {
                let diff = clustering.voted[i] - rep;
                loss += w * norm.of(&diff);
                let g = norm.grad(&diff) * (w * scale);
                add(i, g);
                add(rep_idx, -g);
            }
        }
        if !lab.outliers.is_empty() {
            let w = 1.0 / lab.outliers.len() as f64;
            for &i in &lab.outliers {
                let diff = clustering.voted[i] - rep;
                let gap = alpha - norm.of(&diff);
                if gap > 0.0 {
                    loss += w * gap;
                    let g = norm.grad(&diff) * (-w * scale);
                    add(i, g);
                    add(rep_idx, -g);
                }
            }
        }
        per_cluster[k] = loss;
    }
    let total = per_cluster.iter().sum::<f64>() * scale;
    (LossValue { total, per_cluster }, grad)
}

pub fn contrastive_loss(
    clustering: &SubplaneClustering,
    labels: &PseudoLabels,
    alpha: f64,
    norm: VoteNorm,
) -> LossValue {
    contrastive_loss_with_grad(clustering, labels, alpha, norm).0
}
