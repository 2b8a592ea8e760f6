//! Exact k-nearest-neighbor search over 3D points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::cloud::Vec3;
use crate::error::{Error, Result};
use crate::par;

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// A static kd-tree. Neighbors come back ordered by (distance, index).
#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    root: Node,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = Self::build_node(points, &mut order, 0, points.len());
        Self { points, order, root }
    }

    fn build_node(points: &[Vec3], order: &mut [usize], start: usize, end: usize) -> Node {
        if end - start <= LEAF_SIZE {
            return Node::Leaf { start, end };
        }
        let slice = &mut order[start..end];
        let (lo, hi) = slice.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), &i| (lo.inf(&points[i]), hi.sup(&points[i])),
        );
        let axis = (hi - lo).imax();
        if hi[axis] - lo[axis] <= 0.0 {
            return Node::Leaf { start, end };
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = points[slice[mid]][axis];
        let split = start + mid;
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(points, order, start, split)),
            right: Box::new(Self::build_node(points, order, split, end)),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest targets to `query`, ascending by distance then index.
    pub fn nearest(&self, query: &Vec3, k: usize) -> Vec<usize> {
        self.nearest_with_dist2(query, k).into_iter().map(|(i, _)| i).collect()
    }

    pub fn nearest_with_dist2(&self, query: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2)).collect()
    }

    fn search(&self, node: &Node, query: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &index in &self.order[*start..*end] {
                    let cand = Candidate {
                        dist2: (self.points[index] - query).norm_squared(),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                // Equal distance may still hide a lower-index tie, so only prune on strict.
                let must_visit = heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |c| c.dist2);
                if must_visit {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

/// Exact k nearest targets for every query, ascending by distance, ties by
/// lowest target index.
pub fn knn(targets: &[Vec3], queries: &[Vec3], k: usize) -> Result<Vec<Vec<usize>>> {
    if k > targets.len() {
        return Err(Error::InsufficientPoints {
            needed: k,
            got: targets.len(),
        });
    }
    let tree = KdTree::build(targets);
    Ok(par::map_slice(queries, |q| tree.nearest(q, k)))
}
