use rand::Rng;

use super::cloud::Vec3;
use crate::error::{Error, Result};
use crate::{par, rng};

/// Greedy farthest point sampling. The first index is drawn from the seeded
/// RNG; each later pick maximizes its distance to the picked set, ties to the
/// lowest index.
pub fn farthest_point_sample(points: &[Vec3], count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > points.len() {
        return Err(Error::InsufficientPoints {
            needed: count,
            got: points.len(),
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let first = rng::rng(seed).random_range(0..points.len());
    Ok(farthest_point_sample_from(points, count, first))
}

pub(crate) fn farthest_point_sample_from(points: &[Vec3], count: usize, first: usize) -> Vec<usize> {
    let mut picked = Vec::with_capacity(count);
    picked.push(first);
    let mut min_d2 = vec![f64::INFINITY; points.len()];
    let mut last = first;
    while picked.len() < count {
        let anchor = points[last];
        par::for_each_mut(&mut min_d2, |i, d| {
            let d2 = (points[i] - anchor).norm_squared();
            if d2 < *d {
                *d = d2;
            }
        });
        // Already-picked points sit at distance 0 and are never re-picked
        // while an unpicked point is farther; duplicates are excluded below.
        for &p in &picked {
            min_d2[p] = f64::NEG_INFINITY;
        }
        last = par::argmax_by_key(&min_d2).expect("non-empty");
        picked.push(last);
    }
    picked
}
