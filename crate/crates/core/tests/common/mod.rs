#![allow(dead_code)]

use itertools::Itertools;
use mltrp::{DistanceMatrix, LabeledDataset, NodeSet, NodeWeights, Route};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent entries in `(lo, hi)`, asymmetric.
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DistanceMatrix {
    DistanceMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { rng.random_range(lo..hi) }).unwrap()
}

/// Euclidean distances between random planar points.
pub fn metric_dist(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0))).collect();
    DistanceMatrix::from_fn(n, |i, j| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()).unwrap()
}

/// Integer distances in `1..=max`.
pub fn integer_dist(rng: &mut ChaCha8Rng, n: usize, max: u32) -> DistanceMatrix {
    DistanceMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { rng.random_range(1..=max) as f64 }).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> NodeWeights {
    NodeWeights::new((0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_nodes(rng: &mut ChaCha8Rng, n: usize, d: usize) -> NodeSet {
    NodeSet::from_rows((0..n).map(|_| random_vec(rng, d, 1.0)).collect()).unwrap()
}

/// Every route from the depot, in lexicographic order.
pub fn all_routes(n: usize) -> Vec<Route> {
    (1..n)
        .permutations(n - 1)
        .map(|tail| {
            let mut order = vec![0];
            order.extend(tail);
            Route::new(order).unwrap()
        })
        .collect()
}

/// Two Gaussian clusters in `d − 1` dimensions plus a constant bias feature.
pub fn blobs(rng: &mut ChaCha8Rng, m: usize, d: usize, sep: f64) -> LabeledDataset {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for k in 0..m {
        let y = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut x: Vec<f64> = (0..d - 1).map(|_| y * sep + noise.sample(rng)).collect();
        x.push(1.0);
        rows.push(x);
        labels.push(y);
    }
    LabeledDataset::from_rows(rows, &labels).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
