// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Plane instance segmentation for cluttered RGB-D point clouds.
//!
//! The pipeline samples representatives by farthest point sampling, moves
//! every point by a learned vote, groups points around the voted
//! representatives, labels each group with RANSAC, and finally merges groups
//! that lie on a common plane. The voting network is trained without ground
//! truth, using those per-group RANSAC inlier sets as targets.

pub mod dpc;
pub mod error;
pub mod geom;
pub mod grasp;
pub mod io;
pub mod merge;
pub mod metrics;
pub mod pipeline;
pub mod plane;
pub mod segmentation;
pub mod synth;

mod par;
pub mod rng;

pub use error::{Error, Result};
pub use geom::{PointCloud, Vec3};
pub use plane::{Plane, RansacParams};
pub use segmentation::{Segmentation, UNASSIGNED};

pub use par::is_parallel;
