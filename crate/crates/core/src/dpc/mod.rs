//! Deep plane clustering: a voting network whose votes group points by
//! plane, trained against per-cluster RANSAC pseudo-labels.

pub mod cluster;
pub mod infer;
pub mod loss;
pub mod model_io;
pub mod net;
pub mod train;

pub use cluster::{assign_clusters, pseudo_labels, ClusterPseudoLabel, PseudoLabels, SubplaneClustering};
pub use infer::{infer_steps, infer_subplanes, inlier_spread, InferConfig, SplitStep};
pub use loss::{contrastive_loss, contrastive_loss_with_grad, LossValue, VoteNorm};
pub use model_io::{load_model, read_model, save_model, write_model};
pub use net::{Activation, Gradients, Mode, NetConfig, VotingNet};
pub use train::{loss_gradients, train, LossRecord, Optimizer, TrainConfig, TrainReport};
