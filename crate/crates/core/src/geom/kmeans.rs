use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::{par, rng};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub labels: Vec<usize>,
    /// Centers in standardized feature space.
    pub centers: Array2<f64>,
    /// Clusters that ended with no members.
    pub empty_clusters: Vec<usize>,
    pub iterations: usize,
}

/// Zero-mean, unit-variance columns. Constant columns become zero.
pub fn standardize(features: ArrayView2<f64>) -> Array2<f64> {
    let mut out = features.to_owned();
    let n = features.nrows().max(1) as f64;
    for mut col in out.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 1e-12 {
            col.mapv_inplace(|v| (v - mean) / sd);
        } else {
            col.fill(0.0);
        }
    }
    out
}

fn dist2(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means on standardized features with seeded farthest-point
/// initialization. Stops when assignments stop changing or after
/// [`MAX_ITERATIONS`].
pub fn kmeans(features: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeans> {
    let n = features.nrows();
    if k == 0 {
        return Err(Error::input("k-means needs k >= 1"));
    }
    if n < k {
        return Err(Error::InsufficientPoints { needed: k, got: n });
    }
    let x = standardize(features);
    let dim = x.ncols();

    let mut centers = Array2::zeros((k, dim));
    let first = rng::rng(seed).random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));
    let mut min_d2 = vec![f64::INFINITY; n];
    for c in 1..k {
        let prev = centers.row(c - 1).to_owned();
        par::for_each_mut(&mut min_d2, |i, d| {
            *d = d.min(dist2(x.row(i), prev.view()));
        });
        let next = par::argmax_by_key(&min_d2).expect("n >= k >= 1");
        centers.row_mut(c).assign(&x.row(next));
    }

    let assign = |centers: &Array2<f64>| -> Vec<usize> {
        par::map_range(n, |i| {
            let row = x.row(i);
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let d = dist2(row, centers.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
    };

    let mut labels = assign(&centers);
    let mut iterations = 1;
    while iterations < MAX_ITERATIONS {
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let mut row = sums.row_mut(l);
            row += &x.row(i);
        }
        for (c, &n) in counts.iter().enumerate() {
            if n > 0 {
                let mean = &sums.row(c) / n as f64;
                centers.row_mut(c).assign(&mean);
            }
        }
        let next = assign(&centers);
        iterations += 1;
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    let empty_clusters = (0..k).filter(|&c| counts[c] == 0).collect();
    Ok(KMeans {
        labels,
        centers,
        empty_clusters,
        iterations,
    })
}
