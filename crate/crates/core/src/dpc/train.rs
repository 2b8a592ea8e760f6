//! Self-supervised training against RANSAC pseudo-labels.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

use super::cluster::{assign_clusters, pseudo_labels, PseudoLabels, SubplaneClustering};
use super::loss::{contrastive_loss_with_grad, LossValue, VoteNorm};
use super::net::{ForwardCache, Gradients, VotingNet};
use crate::error::{Error, Result};
use crate::geom::{
    downsample_to_count, estimate_normals, farthest_point_sample, PointCloud, Vec3, DEFAULT_NORMAL_NEIGHBORS,
};
use crate::plane::RansacParams;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    /// Plain gradient descent with decoupled weight decay.
    #[default]
    Sgd,
    /// Adam moments with decoupled weight decay.
    AdamW,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adamw" => Ok(Optimizer::AdamW),
            _ => Err(Error::input(format!("unknown optimizer `{s}`"))),
        }
    }
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::AdamW => "adamw",
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, n: usize) -> Self {
        Self {
            kind,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) {
        self.t += 1;
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            let update = match self.kind {
                Optimizer::Sgd => g,
                Optimizer::AdamW => {
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = self.m[i] / (1.0 - ADAM_BETA1.powi(self.t));
                    let v_hat = self.v[i] / (1.0 - ADAM_BETA2.powi(self.t));
                    m_hat / (v_hat.sqrt() + ADAM_EPS)
                }
            };
            *p -= lr * update + lr * weight_decay * *p;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epoch number to start from, so resumed runs continue the schedule.
    pub start_epoch: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Inclusive range the per-step cluster count is drawn from.
    pub k_range: (usize, usize),
    pub alpha: f64,
    pub points_per_cloud: usize,
    pub norm: VoteNorm,
    pub optimizer: Optimizer,
    pub ransac: RansacParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            start_epoch: 0,
            learning_rate: 1e-5,
            weight_decay: 1e-5,
            k_range: (8, 196),
            alpha: 3.0,
            points_per_cloud: 32768,
            norm: VoteNorm::L1,
            optimizer: Optimizer::Sgd,
            ransac: RansacParams {
                min_inliers: 3,
                ..RansacParams::default()
            },
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.k_range;
        if lo < 1 || lo > hi {
            return Err(Error::input("k_range must satisfy 1 <= lo <= hi"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::input("alpha must be > 0"));
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::input("learning_rate and weight_decay must be >= 0"));
        }
        if self.points_per_cloud < 3 {
            return Err(Error::input("points_per_cloud must be >= 3"));
        }
        self.ransac.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: usize,
    pub k: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub log: Vec<LossRecord>,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "epoch,step,K,loss";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.log {
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.step, r.k, r.loss);
        }
        out
    }

    /// Mean loss per epoch, in epoch order.
    pub fn epoch_means(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in &self.log {
            match out.last_mut() {
                Some(last) if last.0 == r.epoch => {
                    last.1 += r.loss;
                    last.2 += 1;
                }
                _ => out.push((r.epoch, r.loss, 1)),
            }
        }
        out.into_iter().map(|(e, s, n)| (e, s / n as f64)).collect()
    }
}

/// Positions as the first three feature columns.
fn positions_of(features: &ArrayView2<f64>) -> Vec<Vec3> {
    features
        .rows()
        .into_iter()
        .map(|r| Vec3::new(r[0], r[1], r[2]))
        .collect()
}

/// Copy of `features` with positions centered on their centroid and divided
/// by their RMS distance to it. Votes live in this frame, so the margin
/// `alpha` is relative to the size of the cloud.
pub fn vote_frame(features: ArrayView2<f64>) -> Array2<f64> {
    let positions = positions_of(&features);
    let n = positions.len().max(1) as f64;
    let center = positions.iter().sum::<Vec3>() / n;
    let rms = (positions.iter().map(|p| (p - center).norm_squared()).sum::<f64>() / n).sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    let mut out = features.to_owned();
    for mut row in out.rows_mut() {
        for c in 0..3 {
            row[c] = (row[c] - center[c]) * scale;
        }
    }
    out
}

fn voted_points(positions: &[Vec3], votes: &Array2<f64>) -> Vec<Vec3> {
    positions
        .iter()
        .zip(votes.rows())
        .map(|(p, v)| p + Vec3::new(v[0], v[1], v[2]))
        .collect()
}

/// Loss and exact parameter gradients for one cloud, holding the
/// representatives' identities and the pseudo-labels fixed. `features` are
/// taken as already in the vote frame.
pub fn loss_gradients(
    net: &VotingNet,
    features: ArrayView2<f64>,
    sample_indices: &[usize],
    labels: &PseudoLabels,
    alpha: f64,
    norm: VoteNorm,
) -> Result<(LossValue, Gradients, ForwardCache)> {
    let (votes, cache) = net.forward_train(features)?;
    let voted = voted_points(&positions_of(&features), &votes);
    if sample_indices.len() != labels.clusters.len() || sample_indices.iter().any(|&s| s >= voted.len()) {
        return Err(Error::input("sample indices do not match the pseudo-labels"));
    }
    let clustering = SubplaneClustering {
        labels: Vec::new(),
        sample_indices: sample_indices.to_vec(),
        representatives: sample_indices.iter().map(|&s| voted[s]).collect(),
        voted,
    };
    let (loss, d_votes) = contrastive_loss_with_grad(&clustering, labels, alpha, norm);
    let grads = net.backward(&cache, &d_votes);
    Ok((loss, grads, cache))
}

/// One clustering of a cloud under the current network.
pub struct Step {
    pub clustering: SubplaneClustering,
    pub labels: PseudoLabels,
}

/// Forward pass in the vote frame, representative sampling, assignment and
/// pseudo-labels on the original positions. Without a network every vote is
/// zero.
pub fn cluster_cloud(
    net: Option<&VotingNet>,
    features: ArrayView2<f64>,
    k: usize,
    mode: super::net::Mode,
    ransac: &RansacParams,
    seed: u64,
) -> Result<Step> {
    let positions = positions_of(&features);
    let framed = vote_frame(features);
    let framed_positions = positions_of(&framed.view());
    let voted = match net {
        Some(net) => voted_points(&framed_positions, &net.forward(framed.view(), mode)?),
        None => framed_positions,
    };
    let samples = farthest_point_sample(&positions, k.min(positions.len()), seed)?;
    let clustering = assign_clusters(&voted, &samples)?;
    let labels = pseudo_labels(
        &positions,
        &clustering,
        &RansacParams {
            seed: rng::derive_seed(seed, 1),
            ..*ransac
        },
    )?;
    Ok(Step { clustering, labels })
}

/// Normals where missing, then voxel downsampling to the target size.
pub fn prepare_cloud(cloud: &PointCloud, target: usize) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let with_normals = if cloud.normals().is_some() {
        cloud.clone()
    } else {
        let k = DEFAULT_NORMAL_NEIGHBORS.min(cloud.len());
        if k < 3 {
            return Err(Error::InsufficientPoints {
                needed: 3,
                got: cloud.len(),
            });
        }
        estimate_normals(cloud, k)?.cloud
    };
    Ok(downsample_to_count(&with_normals, target)?.0)
}

pub fn train(mut net: VotingNet, dataset: &[PointCloud], config: &TrainConfig) -> Result<(VotingNet, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::input("training dataset is empty"));
    }
    let prepared: Vec<Array2<f64>> = dataset
        .iter()
        .map(|c| prepare_cloud(c, config.points_per_cloud).map(|c| c.features9()))
        .collect::<Result<_>>()?;
    let mut report = TrainReport::default();
    let mut optimizer = OptimizerState::new(config.optimizer, net.parameter_count());
    let mut step = 0;
    for epoch in config.start_epoch..config.start_epoch + config.epochs {
        let mut rng = rng::stream(config.seed, epoch as u64);
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        order.shuffle(&mut rng);
        for ci in order {
            let features = prepared[ci].view();
            let k = rng
                .random_range(config.k_range.0..=config.k_range.1)
                .min(features.nrows());
            let step_seed = rng.random::<u64>();
            let clustered = cluster_cloud(
                Some(&net),
                features,
                k,
                super::net::Mode::Train,
                &config.ransac,
                step_seed,
            )?;
            let framed = vote_frame(features);
            let (loss, grads, cache) = loss_gradients(
                &net,
                framed.view(),
                &clustered.clustering.sample_indices,
                &clustered.labels,
                config.alpha,
                config.norm,
            )?;
            net.update_running_stats(&cache);
            if config.learning_rate > 0.0 {
                let mut params = net.flat_params();
                optimizer.step(&mut params, &grads.flat(), config.learning_rate, config.weight_decay);
                net.set_flat_params(&params)?;
            }
            report.log.push(LossRecord {
                epoch,
                step,
                k,
                loss: loss.total,
            });
            step += 1;
        }
    }
    Ok((net, report))
}
