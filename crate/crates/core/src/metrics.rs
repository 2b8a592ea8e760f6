//! Partition comparison metrics on voxelized labels: variation of
//! information, Rand index and segmentation covering.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geom::{voxel_groups, PointCloud, VoxelKey};
use crate::segmentation::{Segmentation, UNASSIGNED};

/// One majority label per occupied voxel, in ascending voxel-key order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelLabels {
    pub keys: Vec<VoxelKey>,
    pub labels: Vec<i64>,
}

/// Majority label of a voxel. Unassigned points only win when nothing else
/// is present; ties go to the lowest label.
fn majority(labels: impl Iterator<Item = i64>) -> i64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for l in labels.filter(|&l| l != UNASSIGNED) {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(UNASSIGNED, |(l, _)| l)
}

/// Voxel grid anchored at the cloud's minimum corner.
pub fn voxelize_labels(cloud: &PointCloud, seg: &Segmentation, voxel: f64) -> Result<VoxelLabels> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(Error::input(format!("voxel size must be positive, got {voxel}")));
    }
    if seg.len() != cloud.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} points",
            seg.len(),
            cloud.len()
        )));
    }
    let Some((origin, _)) = cloud.bounds() else {
        return Ok(VoxelLabels {
            keys: Vec::new(),
            labels: Vec::new(),
        });
    };
    let groups = voxel_groups(cloud.positions(), &origin, voxel);
    let labels = groups
        .iter()
        .map(|(_, members)| majority(members.iter().map(|&i| seg.labels()[i])))
        .collect();
    Ok(VoxelLabels {
        keys: groups.into_iter().map(|(k, _)| k).collect(),
        labels,
    })
}

struct Contingency {
    n: usize,
    a: HashMap<i64, usize>,
    b: HashMap<i64, usize>,
    joint: HashMap<(i64, i64), usize>,
}

impl Contingency {
    fn new(a: &[i64], b: &[i64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(format!(
                "label lists differ in length: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        let mut t = Contingency {
            n: a.len(),
            a: HashMap::new(),
            b: HashMap::new(),
            joint: HashMap::new(),
        };
        for (&x, &y) in a.iter().zip(b) {
            *t.a.entry(x).or_default() += 1;
            *t.b.entry(y).or_default() += 1;
            *t.joint.entry((x, y)).or_default() += 1;
        }
        Ok(t)
    }
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Fraction of unordered element pairs on which both labelings agree about
/// being together or apart. Every label value, -1 included, is a cluster.
pub fn rand_index(a: &[i64], b: &[i64]) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    if t.n < 2 {
        return Err(Error::input("rand index needs at least two elements"));
    }
    let total = pairs(t.n);
    let same_both: f64 = t.joint.values().map(|&c| pairs(c)).sum();
    let same_a: f64 = t.a.values().map(|&c| pairs(c)).sum();
    let same_b: f64 = t.b.values().map(|&c| pairs(c)).sum();
    // agreements = pairs together in both + pairs apart in both
    let agree = total + 2.0 * same_both - same_a - same_b;
    Ok(agree / total)
}

/// Variation of information in nats, `H(a) + H(b) - 2 I(a; b)`.
pub fn variation_of_information(a: &[i64], b: &[i64]) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    if t.n == 0 {
        return Err(Error::input("variation of information needs at least one element"));
    }
    let n = t.n as f64;
    // Summed as H(a|b) + H(b|a); every term is non-negative.
    let voi = t
        .joint
        .iter()
        .map(|(&(x, y), &nij)| {
            let nij = nij as f64;
            nij / n * ((t.a[&x] as f64 / nij).ln() + (t.b[&y] as f64 / nij).ln())
        })
        .sum();
    Ok(voi)
}

/// Shannon entropy (nats) of a labeling.
pub fn entropy(labels: &[i64]) -> f64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoveringDirection {
    /// Ground-truth regions covered by predicted regions.
    #[default]
    GtByPred,
    PredByGt,
}

/// Segmentation covering of `gt` by `pred`: the size-weighted best IoU of each
/// ground-truth region against predicted regions. Unassigned elements form no
/// region on either side and are never credited, but they still enlarge the
/// union of any region they fall in on the other side.
pub fn segmentation_covering(gt: &[i64], pred: &[i64]) -> Result<f64> {
    let t = Contingency::new(gt, pred)?;
    let covered: usize = t.a.iter().filter(|(&l, _)| l != UNASSIGNED).map(|(_, &c)| c).sum();
    if covered == 0 {
        return Err(Error::input("ground truth has no assigned elements"));
    }
    let mut best: HashMap<i64, f64> = HashMap::new();
    for (&(g, p), &nij) in &t.joint {
        if g == UNASSIGNED || p == UNASSIGNED {
            continue;
        }
        let union = t.a[&g] + t.b[&p] - nij;
        let iou = nij as f64 / union as f64;
        let e = best.entry(g).or_insert(0.0);
        if iou > *e {
            *e = iou;
        }
    }
    let sc =
        t.a.iter()
            .filter(|(&l, _)| l != UNASSIGNED)
            .map(|(l, &c)| c as f64 * best.get(l).copied().unwrap_or(0.0))
            .sum::<f64>()
            / covered as f64;
    Ok(sc)
}

pub fn segmentation_covering_directed(gt: &[i64], pred: &[i64], direction: CoveringDirection) -> Result<f64> {
    match direction {
        CoveringDirection::GtByPred => segmentation_covering(gt, pred),
        CoveringDirection::PredByGt => segmentation_covering(pred, gt),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub voi: f64,
    pub ri: f64,
    pub sc: f64,
    pub voxel_size: f64,
    pub voxel_count: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "voxel_size,voxel_count,voi,ri,sc";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6}",
            self.voxel_size, self.voxel_count, self.voi, self.ri, self.sc
        )
    }

    pub fn to_csv(reports: &[MetricsReport]) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in reports {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn table(reports: &[MetricsReport]) -> String {
        let mut s = format!(
            "{:>10}  {:>8}  {:>8}  {:>8}  {:>8}\n",
            "voxel(m)", "voxels", "VOI", "RI", "SC"
        );
        for r in reports {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>10.4}  {:>8}  {:>8.4}  {:>8.4}  {:>8.4}",
            self.voxel_size, self.voxel_count, self.voi, self.ri, self.sc
        )
    }
}

/// Voxelizes both labelings on one grid and compares the voxel labels.
pub fn evaluate(cloud: &PointCloud, gt: &Segmentation, pred: &Segmentation, voxel: f64) -> Result<MetricsReport> {
    if gt.len() != pred.len() {
        return Err(Error::Dimension(format!(
            "gt has {} labels, prediction has {}",
            gt.len(),
            pred.len()
        )));
    }
    let g = voxelize_labels(cloud, gt, voxel)?;
    let p = voxelize_labels(cloud, pred, voxel)?;
    if g.labels.is_empty() {
        return Err(Error::input("no occupied voxels"));
    }
    debug_assert_eq!(g.keys, p.keys);
    Ok(MetricsReport {
        voi: variation_of_information(&g.labels, &p.labels)?,
        ri: rand_index(&g.labels, &p.labels)?,
        sc: segmentation_covering(&g.labels, &p.labels)?,
        voxel_size: voxel,
        voxel_count: g.labels.len(),
    })
}

/// One report per voxel size.
pub fn evaluate_sweep(
    cloud: &PointCloud,
    gt: &Segmentation,
    pred: &Segmentation,
    voxels: &[f64],
) -> Result<Vec<MetricsReport>> {
    voxels.iter().map(|&v| evaluate(cloud, gt, pred, v)).collect()
}
