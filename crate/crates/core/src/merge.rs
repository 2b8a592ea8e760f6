//! Graph-based merging of subplane clusters that lie on a common surface.
//!
//! Two clusters merge when some pair of their points is closer than `beta`
//! and more than a `gamma` fraction of one cluster lies within `delta` of
//! the other's plane.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Vec3};
use crate::par;
use crate::plane::{fit_plane_lsq, Plane};
use crate::segmentation::{Segmentation, UNASSIGNED};

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the original cloud, ascending.
    pub indices: Vec<usize>,
    /// `None` when no plane could be fitted; such clusters never merge.
    pub plane: Option<Plane>,
}

/// Cluster id to members and plane.
pub type ClusterDict = BTreeMap<usize, Cluster>;

/// Point count over all clusters.
pub fn member_count(dict: &ClusterDict) -> usize {
    dict.values().map(|c| c.indices.len()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeParams {
    /// Maximum closest-pair distance (meters).
    pub beta: f64,
    /// Required coplanar fraction.
    pub gamma: f64,
    /// Point-to-plane tolerance (meters).
    pub delta: f64,
    /// Neighbors per cluster in the centroid graph.
    pub neighbors: usize,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.9,
            delta: 0.005,
            neighbors: 5,
        }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.delta > 0.0) {
            return Err(Error::input("merge beta and delta must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::input("merge gamma must be in (0, 1]"));
        }
        if self.neighbors < 1 {
            return Err(Error::input("merge neighbors must be >= 1"));
        }
        Ok(())
    }
}

/// Undirected adjacency over cluster ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterGraph {
    pub adjacency: BTreeMap<usize, BTreeSet<usize>>,
}

impl ClusterGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        self.adjacency
            .iter()
            .flat_map(|(&a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect()
    }
}

/// Symmetrized `u`-nearest-neighbor graph over cluster centroids. Distance
/// ties go to the lower id.
pub fn build_cluster_graph(dict: &ClusterDict, cloud: &PointCloud, u: usize) -> ClusterGraph {
    let ids: Vec<usize> = dict.keys().copied().collect();
    let centroids: Vec<Vec3> = dict.values().map(|c| cloud.centroid_of(&c.indices)).collect();
    let nearest = par::map_range(ids.len(), |i| {
        let mut others: Vec<(f64, usize)> = (0..ids.len())
            .filter(|&j| j != i)
            .map(|j| ((centroids[i] - centroids[j]).norm_squared(), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        others.truncate(u);
        others
    });
    let mut graph = ClusterGraph::default();
    for &id in &ids {
        graph.adjacency.insert(id, BTreeSet::new());
    }
    for (i, ns) in nearest.iter().enumerate() {
        for &(_, j) in ns {
            graph.adjacency.get_mut(&ids[i]).unwrap().insert(ids[j]);
            graph.adjacency.get_mut(&ids[j]).unwrap().insert(ids[i]);
        }
    }
    graph
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeDecision {
    pub merge: bool,
    pub m_a: f64,
    pub m_b: f64,
    /// Closest-pair distance; the scan stops at the first pair below beta,
    /// and is skipped (None) when the coplanarity test already failed.
    pub min_d: Option<f64>,
    /// Point pairs whose distance was evaluated.
    pub distance_evaluations: u64,
}

fn fraction_within(points: &[Vec3], plane: &Plane, delta: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().filter(|p| plane.distance(p) < delta).count() as f64 / points.len() as f64
}

pub fn try_merge_pair(xa: &[Vec3], xb: &[Vec3], eq_a: &Plane, eq_b: &Plane, params: &MergeParams) -> MergeDecision {
    let m_a = fraction_within(xa, eq_b, params.delta);
    let m_b = fraction_within(xb, eq_a, params.delta);
    if m_a.max(m_b) <= params.gamma {
        return MergeDecision {
            merge: false,
            m_a,
            m_b,
            min_d: None,
            distance_evaluations: 0,
        };
    }
    let beta2 = params.beta * params.beta;
    let mut best = f64::INFINITY;
    let mut evaluations = 0u64;
    'scan: for a in xa {
        for b in xb {
            evaluations += 1;
            let d2 = (a - b).norm_squared();
            if d2 < best {
                best = d2;
                if best < beta2 {
                    break 'scan;
                }
            }
        }
    }
    let min_d = best.sqrt();
    MergeDecision {
        merge: min_d < params.beta,
        m_a,
        m_b,
        min_d: Some(min_d),
        distance_evaluations: evaluations,
    }
}

/// Which merge run produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeStage {
    /// A direct `merge_process` call.
    Single,
    /// First stage, on one split.
    Split(usize),
    /// Second stage, on the union of the splits.
    Union,
}

impl fmt::Display for MergeStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeStage::Single => f.write_str("single"),
            MergeStage::Split(s) => write!(f, "split{s}"),
            MergeStage::Union => f.write_str("union"),
        }
    }
}

/// One tested pair, for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeEvent {
    pub stage: MergeStage,
    pub pass: usize,
    pub id_a: usize,
    pub id_b: usize,
    pub decision: MergeDecision,
    /// State just before the test.
    pub plane_a: Plane,
    pub plane_b: Plane,
    pub members_a: Vec<usize>,
    pub members_b: Vec<usize>,
}

pub const TRACE_HEADER: &str = "stage,pass,id_a,id_b,m_a,m_b,min_d,merged";

pub fn trace_csv(events: &[MergeEvent]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for e in events {
        let min_d = e.decision.min_d.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.stage, e.pass, e.id_a, e.id_b, e.decision.m_a, e.decision.m_b, min_d, e.decision.merge as u8
        );
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MergeStats {
    pub passes: usize,
    pub merges: usize,
    pub distance_evaluations: u64,
}

impl MergeStats {
    fn absorb(&mut self, other: MergeStats) {
        self.passes += other.passes;
        self.merges += other.merges;
        self.distance_evaluations += other.distance_evaluations;
    }
}

pub fn merge_process(
    dict: &ClusterDict,
    cloud: &PointCloud,
    params: &MergeParams,
) -> Result<(ClusterDict, MergeStats)> {
    merge_process_traced(dict, cloud, params, None)
}

/// Sweeps clusters in ascending id order, testing each against its graph
/// neighbors and absorbing the ones that pass. Passes repeat until one makes
/// no merge, capped at the initial cluster count.
pub fn merge_process_traced(
    dict: &ClusterDict,
    cloud: &PointCloud,
    params: &MergeParams,
    mut trace: Option<&mut Vec<MergeEvent>>,
) -> Result<(ClusterDict, MergeStats)> {
    params.validate()?;
    if let Some(&bad) = dict.values().flat_map(|c| &c.indices).find(|&&i| i >= cloud.len()) {
        return Err(Error::input(format!(
            "cluster index {bad} outside cloud of {}",
            cloud.len()
        )));
    }
    let mut dict = dict.clone();
    let mut stats = MergeStats::default();
    let max_passes = dict.len().max(1);
    let planar = |d: &ClusterDict| -> ClusterDict {
        d.iter()
            .filter(|(_, c)| c.plane.is_some() && !c.indices.is_empty())
            .map(|(&k, c)| (k, c.clone()))
            .collect()
    };
    let positions = |idx: &[usize]| -> Vec<Vec3> { idx.iter().map(|&i| cloud.position(i)).collect() };

    while stats.passes < max_passes {
        stats.passes += 1;
        let mut graph = build_cluster_graph(&planar(&dict), cloud, params.neighbors);
        let mut merged_this_pass = false;
        let order: Vec<usize> = graph.adjacency.keys().copied().collect();
        let mut visited = BTreeSet::new();
        for a in order {
            if visited.contains(&a) || !dict.contains_key(&a) {
                continue;
            }
            let mut tested = BTreeSet::new();
            loop {
                let Some(b) = graph.neighbors(a).find(|b| !tested.contains(b)) else {
                    break;
                };
                tested.insert(b);
                let (ca, cb) = (&dict[&a], &dict[&b]);
                let (eq_a, eq_b) = (ca.plane.unwrap(), cb.plane.unwrap());
                let (xa, xb) = (positions(&ca.indices), positions(&cb.indices));
                let decision = try_merge_pair(&xa, &xb, &eq_a, &eq_b, params);
                stats.distance_evaluations += decision.distance_evaluations;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(MergeEvent {
                        stage: MergeStage::Single,
                        pass: stats.passes,
                        id_a: a,
                        id_b: b,
                        decision,
                        plane_a: eq_a,
                        plane_b: eq_b,
                        members_a: ca.indices.clone(),
                        members_b: cb.indices.clone(),
                    });
                }
                if !decision.merge {
                    continue;
                }
                let absorbed = dict.remove(&b).unwrap();
                let survivor = dict.get_mut(&a).unwrap();
                survivor.indices.extend(absorbed.indices);
                survivor.indices.sort_unstable();
                survivor.plane = Some(fit_plane_lsq(&positions(&survivor.indices)).unwrap_or(eq_a));
                stats.merges += 1;
                merged_this_pass = true;
                visited.insert(b);
                graph = build_cluster_graph(&planar(&dict), cloud, params.neighbors);
            }
            visited.insert(a);
        }
        if !merged_this_pass {
            break;
        }
    }
    Ok((dict, stats))
}

fn closest_pair(xa: &[Vec3], xb: &[Vec3]) -> f64 {
    xa.iter()
        .flat_map(|a| xb.iter().map(move |b| (a - b).norm_squared()))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Hands every cluster without a plane to the planar cluster that would
/// accept it (more than `gamma` of its points within `delta` of that plane,
/// closest pair under `beta`), preferring the closest one and then the
/// lowest id. Planes are left untouched. Returns distance evaluations.
fn adopt_planeless(dict: &mut ClusterDict, cloud: &PointCloud, params: &MergeParams) -> u64 {
    let orphans: Vec<usize> = dict
        .iter()
        .filter(|(_, c)| c.plane.is_none())
        .map(|(&k, _)| k)
        .collect();
    let mut evaluations = 0u64;
    for id in orphans {
        let xa: Vec<Vec3> = dict[&id].indices.iter().map(|&i| cloud.position(i)).collect();
        let mut best: Option<(f64, usize)> = None;
        for (&cand, c) in dict.iter() {
            let Some(plane) = c.plane else { continue };
            if fraction_within(&xa, &plane, params.delta) <= params.gamma {
                continue;
            }
            let xb: Vec<Vec3> = c.indices.iter().map(|&i| cloud.position(i)).collect();
            evaluations += (xa.len() * xb.len()) as u64;
            let d = closest_pair(&xa, &xb);
            if d < params.beta && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, cand));
            }
        }
        if let Some((_, target)) = best {
            let orphan = dict.remove(&id).unwrap();
            let survivor = dict.get_mut(&target).unwrap();
            survivor.indices.extend(orphan.indices);
            survivor.indices.sort_unstable();
        }
    }
    evaluations
}

#[derive(Debug, Clone)]
pub struct MergeResult {
    pub segmentation: Segmentation,
    /// Final clusters keyed by their label in `segmentation`.
    pub clusters: ClusterDict,
    pub stats: MergeStats,
}

/// Merges each dict on its own, then the union of the results once more,
/// and finally lets planar clusters adopt nearby clusters without a plane.
pub fn two_stage_merge(dicts: &[ClusterDict], cloud: &PointCloud, params: &MergeParams) -> Result<MergeResult> {
    two_stage_merge_traced(dicts, cloud, params, None)
}

/// [`two_stage_merge`] that also records every tested pair, split events
/// first in split order, then the union stage.
pub fn two_stage_merge_traced(
    dicts: &[ClusterDict],
    cloud: &PointCloud,
    params: &MergeParams,
    trace: Option<&mut Vec<MergeEvent>>,
) -> Result<MergeResult> {
    params.validate()?;
    let mut seen = vec![false; cloud.len()];
    for &i in dicts.iter().flat_map(|d| d.values()).flat_map(|c| &c.indices) {
        if i >= cloud.len() {
            return Err(Error::input(format!(
                "cluster index {i} outside cloud of {}",
                cloud.len()
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::input(format!("point {i} belongs to more than one cluster")));
        }
    }
    let tracing = trace.is_some();
    let stage1 = par::map_range(dicts.len(), |i| {
        let mut events = Vec::new();
        let out = merge_process_traced(&dicts[i], cloud, params, tracing.then_some(&mut events));
        (out, events)
    });
    let mut events = Vec::new();
    let mut stats = MergeStats::default();
    let mut union = ClusterDict::new();
    for (split, (result, split_events)) in stage1.into_iter().enumerate() {
        let (d, s) = result?;
        stats.absorb(s);
        events.extend(split_events.into_iter().map(|e| MergeEvent {
            stage: MergeStage::Split(split),
            ..e
        }));
        for c in d.into_values() {
            union.insert(union.len(), c);
        }
    }
    let mut union_events = Vec::new();
    let (mut merged, s) = merge_process_traced(&union, cloud, params, tracing.then_some(&mut union_events))?;
    if let Some(t) = trace {
        t.extend(events);
        t.extend(union_events.into_iter().map(|e| MergeEvent {
            stage: MergeStage::Union,
            ..e
        }));
    }
    stats.absorb(s);
    stats.distance_evaluations += adopt_planeless(&mut merged, cloud, params);

    let mut labels = vec![UNASSIGNED; cloud.len()];
    let mut clusters = ClusterDict::new();
    for c in merged.into_values().filter(|c| !c.indices.is_empty()) {
        let label = clusters.len();
        for &i in &c.indices {
            labels[i] = label as i64;
        }
        clusters.insert(label, c);
    }
    Ok(MergeResult {
        segmentation: Segmentation::new(labels)?,
        clusters,
        stats,
    })
}
