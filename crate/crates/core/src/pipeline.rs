//! End-to-end segmentation, the sequential RANSAC baseline, and exports.

use ndarray::Array2;

use crate::dpc::{infer_subplanes, InferConfig, VotingNet};
use crate::error::{Error, Result};
use crate::geom::{estimate_normals, PointCloud, DEFAULT_NORMAL_NEIGHBORS};
use crate::merge::{two_stage_merge_traced, ClusterDict, MergeEvent, MergeParams, MergeStats};
use crate::plane::{sequential_multiplane, RansacParams};
use crate::segmentation::{Segmentation, UNASSIGNED};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub infer: InferConfig,
    pub merge: MergeParams,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub segmentation: Segmentation,
    pub clusters: ClusterDict,
    /// Clusters produced before merging, over all splits.
    pub subplanes: usize,
    pub merge_stats: MergeStats,
}

/// Returns the cloud with normals, estimating them when absent.
pub fn ensure_normals(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.normals().is_some() {
        return Ok(cloud.clone());
    }
    let k = DEFAULT_NORMAL_NEIGHBORS.min(cloud.len());
    if k < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: cloud.len(),
        });
    }
    Ok(estimate_normals(cloud, k)?.cloud)
}

/// Subplane inference followed by the two-stage merge. `net = None` runs
/// the sampling-plus-merge ablation with zero votes.
pub fn segment(net: Option<&VotingNet>, cloud: &PointCloud, config: &PipelineConfig) -> Result<PipelineOutput> {
    segment_traced(net, cloud, config, None)
}

/// [`segment`] that records the merge trace.
pub fn segment_traced(
    net: Option<&VotingNet>,
    cloud: &PointCloud,
    config: &PipelineConfig,
    trace: Option<&mut Vec<MergeEvent>>,
) -> Result<PipelineOutput> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let cloud = ensure_normals(cloud)?;
    let dicts = infer_subplanes(net, &cloud, &config.infer)?;
    let subplanes = dicts.iter().map(|d| d.len()).sum();
    let merged = two_stage_merge_traced(&dicts, &cloud, &config.merge, trace)?;
    Ok(PipelineOutput {
        segmentation: merged.segmentation,
        clusters: merged.clusters,
        subplanes,
        merge_stats: merged.stats,
    })
}

/// Iterative single-plane RANSAC.
pub fn baseline(cloud: &PointCloud, params: &RansacParams, max_planes: usize) -> Result<Segmentation> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(sequential_multiplane(cloud, params, max_planes)?.0)
}

/// Paints point labels back onto the image grid; empty pixels are -1.
pub fn project_labels(
    seg: &Segmentation,
    pixels: &[(usize, usize)],
    width: usize,
    height: usize,
) -> Result<Array2<i64>> {
    if seg.len() != pixels.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} pixels",
            seg.len(),
            pixels.len()
        )));
    }
    let mut img = Array2::from_elem((height, width), UNASSIGNED);
    for (&(u, v), &l) in pixels.iter().zip(seg.labels()) {
        if u >= width || v >= height {
            return Err(Error::Dimension(format!("pixel ({u}, {v}) outside {width}x{height}")));
        }
        img[[v, u]] = l;
    }
    Ok(img)
}

/// A fixed, well-spread color per label; unassigned points are black.
pub fn label_color(label: i64) -> [f64; 3] {
    if label < 0 {
        return [0.0; 3];
    }
    // golden-ratio hue walk
    let h = (label as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let shade = if (label / 6) % 2 == 0 { 1.0 } else { 0.6 };
    [r * shade, g * shade, b * shade]
}

pub fn label_colors(seg: &Segmentation) -> Vec<[f64; 3]> {
    seg.labels().iter().map(|&l| label_color(l)).collect()
}

/// Label image rendered as RGB.
pub fn colorize_label_image(labels: &Array2<i64>) -> ndarray::Array3<u8> {
    let (h, w) = labels.dim();
    ndarray::Array3::from_shape_fn((h, w, 3), |(v, u, c)| {
        (label_color(labels[[v, u]])[c] * 255.0).round() as u8
    })
}
