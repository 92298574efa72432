#![allow(dead_code)]

use boostpm::geometry::NodeId;
use boostpm::{PartitionTree, TreeMeasure};
use rand::Rng;

/// A random tree measure: each node stops with probability 1/4 (always at
/// `max_depth`), cuts at a fraction in `[0.1, 0.9)` and gets a left mass in
/// `[0.05, 0.95)`.
pub fn random_measure<R: Rng>(rng: &mut R, d: usize, max_depth: usize) -> TreeMeasure {
    let mut tree = PartitionTree::new(d).unwrap();
    let mut stack = vec![PartitionTree::ROOT];
    while let Some(id) = stack.pop() {
        if tree.node(id).depth >= max_depth || rng.random::<f64>() < 0.25 {
            continue;
        }
        let (l, r) = tree
            .split_leaf(id, rng.random_range(0..d), rng.random_range(0.1..0.9))
            .unwrap();
        tree.set_theta(id, rng.random_range(0.05..0.95)).unwrap();
        stack.push(l);
        stack.push(r);
    }
    TreeMeasure::new(tree, None).unwrap()
}

/// Draws from a tree measure without its tree-CDF: descend by the conditional
/// masses, then place the point uniformly in the leaf.
pub fn sample_by_descent<R: Rng>(m: &TreeMeasure, rng: &mut R) -> Vec<f64> {
    let tree = m.tree();
    let mut id: NodeId = PartitionTree::ROOT;
    while let Some(split) = &tree.node(id).split {
        id = if rng.random::<f64>() < split.theta {
            split.left
        } else {
            split.right
        };
    }
    let region = &tree.node(id).region;
    (0..m.dim())
        .map(|j| region.upper()[j] - region.width(j) * rng.random::<f64>())
        .collect()
}

pub fn uniform_point<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| 1.0 - rng.random::<f64>()).collect()
}

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
pub fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Pearson statistic of 2D points against the uniform law on a `k × k` grid.
pub fn uniform_grid_chi_square(points: &[Vec<f64>], k: usize) -> f64 {
    let mut counts = vec![0usize; k * k];
    for p in points {
        let cell = |v: f64| (((v * k as f64).ceil() as usize).max(1) - 1).min(k - 1);
        counts[cell(p[0]) * k + cell(p[1])] += 1;
    }
    let expected = points.len() as f64 / (k * k) as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}
