//! Point clouds, spatial search, sampling and normal estimation.

mod cloud;
mod kdtree;
mod kmeans;
mod normals;
mod sampling;
mod voxel;

pub use cloud::{depth_to_cloud, depth_to_cloud_indexed, CameraIntrinsics, FrameCloud, PointCloud, Vec3};
pub use kdtree::{knn, KdTree};
pub use kmeans::{kmeans, standardize, KMeans};
pub(crate) use normals::{covariance, sorted_eigen};
pub use normals::{estimate_normals, estimate_normals_toward, NormalEstimation, DEFAULT_NORMAL_NEIGHBORS};
pub use sampling::farthest_point_sample;
pub use voxel::{downsample_to_count, voxel_downsample, voxel_groups, voxel_key, VoxelKey};
