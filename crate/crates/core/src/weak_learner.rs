//! Stochastic top-down fitting of one tree measure to the current residuals.
//!
//! Every active node compares "stop" against each candidate split on a grid of
//! `N_L − 1` interior fractions per dimension. Scores are prior × marginal
//! likelihood: a stop prior, uniform priors on dimension and location, and a
//! `Beta(θ0, 1 − θ0)` prior on the left-child mass with `θ0 = μ(A_l)/μ(A)`.
//! One decision is drawn per node in proportion to the scores, so the fitter
//! is a single-particle search rather than a greedy one.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{is_usable_cut, NodeId, PartitionTree, Rect};
use crate::points::Points;
use crate::tree_cdf::TreeMeasure;

/// Nodes with at least this many `residuals × dimensions` score their
/// candidate dimensions in parallel.
const PARALLEL_WORK: usize = 1 << 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// `N_L`; candidate cuts sit at `l / N_L` for `l = 1..N_L`.
    pub grid_size: usize,
    /// Prior probability of stopping at a node.
    pub stop_prior: f64,
    /// Maximum tree depth `R` (a root-only tree has depth 1).
    pub max_depth: usize,
    /// Nodes holding fewer residuals than this are not split.
    pub min_count: usize,
    /// Restrict splits to a single dimension (marginal stage).
    pub dim_restriction: Option<usize>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            grid_size: 128,
            stop_prior: 0.5,
            max_depth: 50,
            min_count: 5,
            dim_restriction: None,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::invalid("grid size must be at least 2"));
        }
        if !(self.stop_prior > 0.0 && self.stop_prior < 1.0) {
            return Err(Error::invalid("stop prior must lie in (0, 1)"));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid("maximum depth must be at least 1"));
        }
        if let Some(j) = self.dim_restriction {
            if j >= d {
                return Err(Error::invalid(format!(
                    "dimension restriction {j} out of range for d = {d}"
                )));
            }
        }
        Ok(())
    }

    fn effective_dims(&self, d: usize) -> usize {
        if self.dim_restriction.is_some() {
            1
        } else {
            d
        }
    }

    /// Log prior of one particular (dimension, location) split.
    fn log_split_prior(&self, d: usize) -> f64 {
        (1.0 - self.stop_prior).ln()
            - ((self.effective_dims(d) * (self.grid_size - 1)) as f64).ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub dim: usize,
    /// `l` in `1..N_L`; the cut sits at fraction `l / N_L` of the node.
    pub loc_index: usize,
    pub log_score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Stop,
    Split { dim: usize, loc_index: usize },
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln B(θ0 + n_l, 1 − θ0 + n_r) − ln B(θ0, 1 − θ0)`: the log marginal
/// likelihood of the left/right counts under the Beta prior.
pub fn log_beta_ratio(theta0: f64, n_left: usize, n_right: usize) -> f64 {
    if n_left == 0 && n_right == 0 {
        return 0.0;
    }
    let a = theta0;
    let b = 1.0 - theta0;
    ln_beta(a + n_left as f64, b + n_right as f64) - ln_beta(a, b)
}

/// Log score of stopping: `log P(stop) − n(A)·log μ(A)`.
pub fn score_stop(count: usize, log_volume: f64, config: &LearnerConfig) -> f64 {
    config.stop_prior.ln() - count as f64 * log_volume
}

/// Log score of one split of a node with `log_volume = log μ(A)`, where the
/// left child takes fraction `theta0` of the volume.
pub fn score_split(
    log_volume: f64,
    theta0: f64,
    n_left: usize,
    n_right: usize,
    d: usize,
    config: &LearnerConfig,
) -> f64 {
    let log_left = log_volume + theta0.ln();
    let log_right = log_volume + (1.0 - theta0).ln();
    config.log_split_prior(d) + log_beta_ratio(theta0, n_left, n_right)
        - n_left as f64 * log_left
        - n_right as f64 * log_right
}

/// Draws a decision with probability proportional to `exp(score)`.
/// Options are ordered stop first, then candidates in slice order.
pub fn sample_decision<R: Rng + ?Sized>(
    stop_score: f64,
    candidates: &[SplitCandidate],
    rng: &mut R,
) -> Decision {
    let max = candidates
        .iter()
        .map(|c| c.log_score)
        .fold(stop_score, f64::max);
    let stop_weight = (stop_score - max).exp();
    let total: f64 = stop_weight
        + candidates
            .iter()
            .map(|c| (c.log_score - max).exp())
            .sum::<f64>();
    let mut u = rng.random::<f64>() * total;
    if u < stop_weight {
        return Decision::Stop;
    }
    u -= stop_weight;
    for c in candidates {
        let w = (c.log_score - max).exp();
        if u < w {
            return Decision::Split {
                dim: c.dim,
                loc_index: c.loc_index,
            };
        }
        u -= w;
    }
    // Rounding left u just past the last weight.
    candidates
        .iter()
        .rev()
        .find(|c| c.log_score > f64::NEG_INFINITY)
        .map_or(Decision::Stop, |c| Decision::Split {
            dim: c.dim,
            loc_index: c.loc_index,
        })
}

/// Scores every usable cut of `region` along `dim` for the residuals in
/// `members`.
fn score_dimension(
    residuals: &Points,
    members: &[usize],
    region: &Rect,
    log_volume: f64,
    dim: usize,
    config: &LearnerConfig,
) -> Vec<SplitCandidate> {
    let grid = config.grid_size;
    let a = region.lower()[dim];
    let b = region.upper()[dim];
    // cuts[l] for l in 0..=grid; cuts[0] = a and cuts[grid] = b.
    let mut cuts = Vec::with_capacity(grid + 1);
    cuts.push(a);
    for l in 1..grid {
        cuts.push(region.cut_at(dim, l as f64 / grid as f64));
    }
    cuts.push(b);

    // bucket[l] counts residuals whose smallest cut at or above them is cuts[l].
    let mut bucket = vec![0usize; grid + 1];
    let width = b - a;
    for &i in members {
        let x = residuals.row(i)[dim];
        let t = (x - a) / width;
        let mut g = ((t * grid as f64).ceil() as usize).clamp(1, grid);
        while g > 1 && x <= cuts[g - 1] {
            g -= 1;
        }
        while g < grid && x > cuts[g] {
            g += 1;
        }
        bucket[g] += 1;
    }

    let n = members.len();
    let d = residuals.dim();
    let mut out = Vec::with_capacity(grid - 1);
    let mut n_left = 0;
    for l in 1..grid {
        n_left += bucket[l];
        let cut = cuts[l];
        if !is_usable_cut(a, cut, b) {
            continue;
        }
        let theta0 = (cut - a) / width;
        out.push(SplitCandidate {
            dim,
            loc_index: l,
            log_score: score_split(log_volume, theta0, n_left, n - n_left, d, config),
        });
    }
    out
}

/// All candidate splits of a node, ordered by dimension then location.
pub fn score_candidates(
    residuals: &Points,
    members: &[usize],
    region: &Rect,
    config: &LearnerConfig,
) -> Vec<SplitCandidate> {
    let log_volume = region.log2_volume() * std::f64::consts::LN_2;
    let dims: Vec<usize> = match config.dim_restriction {
        Some(j) => vec![j],
        None => (0..residuals.dim()).collect(),
    };
    let per_dim: Vec<Vec<SplitCandidate>> = if members.len() * dims.len() >= PARALLEL_WORK {
        dims.par_iter()
            .map(|&j| score_dimension(residuals, members, region, log_volume, j, config))
            .collect()
    } else {
        dims.iter()
            .map(|&j| score_dimension(residuals, members, region, log_volume, j, config))
            .collect()
    };
    per_dim.into_iter().flatten().collect()
}

/// Grows one partition tree on `residuals` (all inside the unit cube).
///
/// Nodes are visited depth-first, left before right, so the sequence of
/// random draws and hence the tree is fixed by the RNG state. Each node
/// records its residual count; split nodes record `F̃(A_l | A)`.
pub fn fit_tree<R: Rng + ?Sized>(
    residuals: &Points,
    config: &LearnerConfig,
    rng: &mut R,
) -> Result<PartitionTree> {
    let d = residuals.dim();
    config.validate(d)?;
    let mut tree = PartitionTree::new(d)?;
    let mut members: Vec<usize> = (0..residuals.len()).collect();
    let mut stack: Vec<(NodeId, usize, usize)> = vec![(PartitionTree::ROOT, 0, members.len())];

    while let Some((id, start, end)) = stack.pop() {
        let count = end - start;
        tree.set_count(id, count);
        let node = tree.node(id);
        if node.depth >= config.max_depth || count < config.min_count {
            continue;
        }
        let region = node.region.clone();
        let log_volume = region.log2_volume() * std::f64::consts::LN_2;
        let stop = score_stop(count, log_volume, config);
        let candidates = score_candidates(residuals, &members[start..end], &region, config);
        let (dim, loc_index) = match sample_decision(stop, &candidates, rng) {
            Decision::Stop => continue,
            Decision::Split { dim, loc_index } => (dim, loc_index),
        };
        let (left, right) =
            tree.split_leaf(id, dim, loc_index as f64 / config.grid_size as f64)?;
        let cut = tree.node(id).split.as_ref().map(|s| s.cut).unwrap_or_default();

        // Partition members in place: left child first.
        let slice = &mut members[start..end];
        let mut boundary = 0;
        for k in 0..slice.len() {
            if residuals.row(slice[k])[dim] <= cut {
                slice.swap(boundary, k);
                boundary += 1;
            }
        }
        if count > 0 {
            if let Some(split) = tree.node_mut(id).split.as_mut() {
                split.empirical_left = boundary as f64 / count as f64;
            }
        }
        let mid = start + boundary;
        stack.push((right, mid, end));
        stack.push((left, start, mid));
    }
    Ok(tree)
}

/// Node-wise learning rate `c(A) = c0 · (1 − log2 vol(A))^(−γ)`.
pub fn learning_rate(c0: f64, gamma: f64, log2_volume: f64) -> f64 {
    c0 * (1.0 - log2_volume).powf(-gamma)
}

/// Turns a fitted tree into a measure by pulling each empirical conditional
/// toward the uniform one: `θ = (1 − c(A))·μ(A_l|A) + c(A)·F̃(A_l|A)`.
/// Nodes that saw no residuals keep the uniform conditional.
pub fn apply_shrinkage(
    mut tree: PartitionTree,
    c0: f64,
    gamma: f64,
    restriction: Option<usize>,
) -> Result<TreeMeasure> {
    validate_shrinkage(c0, gamma)?;
    for id in 0..tree.len() {
        let node = tree.node(id);
        let Some(mu_left) = node.uniform_left() else {
            continue;
        };
        let rate = learning_rate(c0, gamma, node.region.log2_volume());
        let empirical = if node.count > 0 {
            node.split.as_ref().map_or(mu_left, |s| s.empirical_left)
        } else {
            mu_left
        };
        if let Some(split) = tree.node_mut(id).split.as_mut() {
            split.empirical_left = empirical;
            split.theta = (1.0 - rate) * mu_left + rate * empirical;
        }
    }
    TreeMeasure::new(tree, restriction)
}

pub(crate) fn validate_shrinkage(c0: f64, gamma: f64) -> Result<()> {
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(Error::invalid(format!("c0 = {c0} must lie in (0, 1]")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma = {gamma} must be finite and non-negative")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Substream};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Points {
        let values = (0..n * d).map(|_| 1.0 - rng.random::<f64>()).collect();
        Points::new(d, values).unwrap()
    }

    #[test]
    fn log_beta_ratio_examples() {
        assert_eq!(log_beta_ratio(0.3, 0, 0), 0.0);
        assert!((log_beta_ratio(0.5, 1, 0) - 0.5f64.ln()).abs() < 1e-12);
        for (l, r) in [(3, 7), (10, 0), (25, 24)] {
            assert!((log_beta_ratio(0.5, l, r) - log_beta_ratio(0.5, r, l)).abs() < 1e-10);
        }
    }

    #[test]
    fn log_beta_ratio_matches_sequential_predictive() {
        // Polya-urn form: the marginal likelihood is a product of one-step
        // predictive probabilities with total concentration 1.
        let theta0 = 0.3;
        let seq = [true, false, false, true, true, false, true];
        let (mut nl, mut nr, mut log_p) = (0usize, 0usize, 0.0f64);
        for &left in &seq {
            let total = 1.0 + (nl + nr) as f64;
            if left {
                log_p += ((theta0 + nl as f64) / total).ln();
                nl += 1;
            } else {
                log_p += ((1.0 - theta0 + nr as f64) / total).ln();
                nr += 1;
            }
        }
        assert!((log_beta_ratio(theta0, nl, nr) - log_p).abs() < 1e-12);
    }

    #[test]
    fn stop_score_examples() {
        let cfg = LearnerConfig::default();
        assert!((score_stop(17, 0.0, &cfg) - 0.5f64.ln()).abs() < 1e-15);
        let expected = 0.5f64.ln() + 2.0 * 4.0f64.ln();
        assert!((score_stop(2, 0.25f64.ln(), &cfg) - expected).abs() < 1e-12);
        assert!((score_stop(0, 0.01f64.ln(), &cfg) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn split_score_prefers_lopsided_data() {
        let cfg = LearnerConfig::default();
        let lopsided = score_split(0.0, 0.5, 4, 0, 2, &cfg);
        let balanced = score_split(0.0, 0.5, 2, 2, 2, &cfg);
        // Hand values: ln B(4.5, .5)/B(.5,.5) + 4 ln 2 vs ln B(2.5, 2.5)/B(.5,.5) + 4 ln 2.
        let prior = 0.5f64.ln() - (2.0f64 * 127.0).ln();
        let lop_hand = prior + (35.0f64 / 128.0).ln() + 4.0 * 2f64.ln();
        let bal_hand = prior + (3.0f64 / 128.0).ln() + 4.0 * 2f64.ln();
        assert!((lopsided - lop_hand).abs() < 1e-10);
        assert!((balanced - bal_hand).abs() < 1e-10);
        assert!(lopsided > balanced);
        let empty = score_split(-1.3, 0.25, 0, 0, 3, &cfg);
        assert!((empty - cfg.log_split_prior(3)).abs() < 1e-15);
    }

    #[test]
    fn restricted_prior_uses_one_dimension() {
        let cfg = LearnerConfig {
            dim_restriction: Some(1),
            ..LearnerConfig::default()
        };
        assert!((cfg.log_split_prior(5) - (0.5f64 / 127.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn sample_decision_single_option() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_decision(-3.0, &[], &mut rng), Decision::Stop);
        }
    }

    #[test]
    fn sample_decision_equal_scores_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cand = [SplitCandidate {
            dim: 0,
            loc_index: 3,
            log_score: 5.0,
        }];
        let stops = (0..10_000)
            .filter(|_| sample_decision(5.0, &cand, &mut rng) == Decision::Stop)
            .count();
        assert!((stops as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn sample_decision_matches_direct_normalisation() {
        let scores = [1000.0, 1001.0, 998.5];
        let cand = [
            SplitCandidate {
                dim: 0,
                loc_index: 1,
                log_score: scores[1],
            },
            SplitCandidate {
                dim: 1,
                loc_index: 2,
                log_score: scores[2],
            },
        ];
        let weights: Vec<f64> = scores.iter().map(|s| (s - 1000.0f64).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hits = [0usize; 3];
        let draws = 100_000;
        for _ in 0..draws {
            match sample_decision(scores[0], &cand, &mut rng) {
                Decision::Stop => hits[0] += 1,
                Decision::Split { dim: 0, .. } => hits[1] += 1,
                Decision::Split { .. } => hits[2] += 1,
            }
        }
        for k in 0..3 {
            let p = weights[k] / total;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((hits[k] as f64 / draws as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn bucket_counts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = uniform_points(&mut rng, 500, 2);
        let region = Rect::new(vec![0.1, 0.2], vec![0.9, 0.7]).unwrap();
        let members: Vec<usize> = (0..pts.len())
            .filter(|&i| region.contains(pts.row(i)).unwrap())
            .collect();
        let cfg = LearnerConfig {
            grid_size: 16,
            ..LearnerConfig::default()
        };
        let cands = score_candidates(&pts, &members, &region, &cfg);
        assert_eq!(cands.len(), 2 * 15);
        let log_volume = region.volume().ln();
        for c in &cands {
            let cut = region.cut_at(c.dim, c.loc_index as f64 / 16.0);
            let nl = members.iter().filter(|&&i| pts.row(i)[c.dim] <= cut).count();
            let theta0 = (cut - region.lower()[c.dim]) / region.width(c.dim);
            let want = score_split(log_volume, theta0, nl, members.len() - nl, 2, &cfg);
            assert!((c.log_score - want).abs() < 1e-9 * want.abs().max(1.0));
        }
        // Points sitting exactly on a cut count toward the left child.
        let on_cut = Points::from_rows(&[[0.5, 0.5], [0.25, 0.5]]).unwrap();
        let unit = Rect::unit_cube(2).unwrap();
        let cands = score_candidates(&on_cut, &[0, 1], &unit, &cfg);
        let at = |l: usize| cands.iter().find(|c| c.dim == 0 && c.loc_index == l).unwrap();
        let want = |nl| score_split(0.0, 0.5, nl, 2 - nl, 2, &cfg);
        assert!((at(8).log_score - want(2)).abs() < 1e-12);
        let want4 = score_split(0.0, 0.25, 1, 1, 2, &cfg);
        assert!((at(4).log_score - want4).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cuts_are_dropped() {
        let region = Rect::new(vec![0.5], vec![0.5 + 4e-12]).unwrap();
        let pts = Points::from_rows(&[[0.5 + 1e-12]]).unwrap();
        let cands = score_candidates(&pts, &[0], &region, &LearnerConfig::default());
        assert!(cands.iter().all(|c| {
            let cut = region.cut_at(0, c.loc_index as f64 / 128.0);
            cut - 0.5 >= 1e-12 && 0.5 + 4e-12 - cut >= 1e-12
        }));
        assert!(cands.len() < 127);
    }

    #[test]
    fn empty_batch_gives_root_only_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = fit_tree(&Points::empty(3).unwrap(), &LearnerConfig::default(), &mut rng).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn fitted_tree_counts_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pts = uniform_points(&mut rng, 3000, 2);
        for row in pts.rows_mut() {
            row[0] *= 0.3;
        }
        let cfg = LearnerConfig {
            max_depth: 6,
            ..LearnerConfig::default()
        };
        let tree = fit_tree(&pts, &cfg, &mut rng).unwrap();
        assert!(tree.depth() <= 6);
        assert_eq!(tree.node(0).count, 3000);
        for id in tree.interior() {
            let node = tree.node(id);
            let s = node.split.as_ref().unwrap();
            let (l, r) = (tree.node(s.left).count, tree.node(s.right).count);
            assert_eq!(node.count, l + r);
            assert!((s.empirical_left - l as f64 / node.count as f64).abs() < 1e-15);
            let frac = s.fraction * 128.0;
            assert!((frac - frac.round()).abs() < 1e-9);
        }
        for leaf in tree.leaves() {
            let region = &tree.node(leaf).region;
            let inside = pts.rows().filter(|r| region.contains(r).unwrap()).count();
            assert_eq!(inside, tree.node(leaf).count);
        }
    }

    #[test]
    fn small_nodes_are_not_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = Points::from_rows(&[[0.1], [0.11], [0.12], [0.13]]).unwrap();
        let tree = fit_tree(&pts, &LearnerConfig::default(), &mut rng).unwrap();
        assert_eq!(tree.len(), 1);
    }

    #[test]
    fn restriction_confines_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pts = uniform_points(&mut rng, 2000, 3);
        for row in pts.rows_mut() {
            row[0] = row[0].powi(4).max(1e-9);
            row[1] = row[1].powi(3).max(1e-9);
        }
        let cfg = LearnerConfig {
            dim_restriction: Some(1),
            ..LearnerConfig::default()
        };
        let mut splits = 0;
        for _ in 0..10 {
            let tree = fit_tree(&pts, &cfg, &mut rng).unwrap();
            for id in tree.interior() {
                assert_eq!(tree.node(id).split.as_ref().unwrap().dim, 1);
                splits += 1;
            }
        }
        assert!(splits > 0);
    }

    #[test]
    fn uniform_residuals_mostly_stop_at_root() {
        let mut root_only = 0;
        for seed in 0..50 {
            let mut rng = substream(seed, Substream::TreeFit);
            let pts = uniform_points(&mut rng, 10_000, 2);
            let tree = fit_tree(&pts, &LearnerConfig::default(), &mut rng).unwrap();
            if tree.len() == 1 {
                root_only += 1;
            }
        }
        assert!(root_only > 25, "root-only in {root_only}/50 runs");
    }

    /// Posterior probability of stopping at the root, averaged over
    /// replicated uniform samples, grows with n.
    #[test]
    fn stop_share_grows_with_n_on_uniform_data() {
        let cfg = LearnerConfig::default();
        let root = Rect::unit_cube(2).unwrap();
        let mut shares = Vec::new();
        for n in [100, 1000, 10_000] {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let mut acc = 0.0;
            for _ in 0..20 {
                let pts = uniform_points(&mut rng, n, 2);
                let members: Vec<usize> = (0..n).collect();
                let cands = score_candidates(&pts, &members, &root, &cfg);
                let stop = score_stop(n, 0.0, &cfg);
                let max = cands.iter().map(|c| c.log_score).fold(stop, f64::max);
                let total: f64 = (stop - max).exp()
                    + cands.iter().map(|c| (c.log_score - max).exp()).sum::<f64>();
                acc += (stop - max).exp() / total;
            }
            shares.push(acc / 20.0);
        }
        assert!(shares[0] < shares[1] && shares[1] < shares[2], "{shares:?}");
        assert!(shares[2] > 0.5);
    }

    #[test]
    fn learning_rate_examples() {
        assert_eq!(learning_rate(0.3, 0.0, -5.0), 0.3);
        assert!((learning_rate(0.1, 1.0, -2.0) - 1.0 / 30.0).abs() < 1e-15);
        assert_eq!(learning_rate(0.7, 0.8, 0.0), 0.7);
        let mut prev = 1.0;
        for k in 0..20 {
            let c = learning_rate(1.0, 0.5, -(k as f64));
            assert!(c > 0.0 && c <= 1.0 && c <= prev);
            prev = c;
        }
    }

    #[test]
    fn shrinkage_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = uniform_points(&mut rng, 4000, 2);
        for row in pts.rows_mut() {
            row[1] = row[1].powi(2).max(1e-9);
        }
        let tree = fit_tree(&pts, &LearnerConfig::default(), &mut rng).unwrap();
        assert!(tree.len() > 1);
        let full = apply_shrinkage(tree.clone(), 1.0, 0.0, None).unwrap();
        for id in full.tree().interior() {
            let s = full.tree().node(id).split.as_ref().unwrap();
            let expected = s.empirical_left.clamp(1e-12, 1.0 - 1e-12);
            assert_eq!(s.theta, expected);
        }
        let shrunk = apply_shrinkage(tree, 0.2, 0.5, None).unwrap();
        for id in shrunk.tree().interior() {
            let node = shrunk.tree().node(id);
            let s = node.split.as_ref().unwrap();
            let mu = node.uniform_left().unwrap();
            let c = learning_rate(0.2, 0.5, node.region.log2_volume());
            assert!(c > 0.0 && c <= 0.2);
            assert!((s.theta - ((1.0 - c) * mu + c * s.empirical_left)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_count_nodes_keep_uniform_conditional() {
        let mut tree = PartitionTree::new(1).unwrap();
        tree.split_leaf(0, 0, 0.25).unwrap();
        tree.node_mut(0).split.as_mut().unwrap().empirical_left = 0.9;
        let m = apply_shrinkage(tree, 0.5, 0.0, None).unwrap();
        let s = m.tree().node(0).split.as_ref().unwrap();
        assert_eq!(s.theta, 0.25);
    }

    #[test]
    fn shrinkage_rejects_bad_parameters() {
        let tree = PartitionTree::new(1).unwrap();
        assert!(apply_shrinkage(tree.clone(), 0.0, 0.0, None).is_err());
        assert!(apply_shrinkage(tree.clone(), 1.5, 0.0, None).is_err());
        assert!(apply_shrinkage(tree, 0.5, -1.0, None).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = [
            LearnerConfig {
                grid_size: 1,
                ..LearnerConfig::default()
            },
            LearnerConfig {
                stop_prior: 1.0,
                ..LearnerConfig::default()
            },
            LearnerConfig {
                max_depth: 0,
                ..LearnerConfig::default()
            },
            LearnerConfig {
                dim_restriction: Some(2),
                ..LearnerConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate(2).is_err());
        }
        assert!(LearnerConfig::default().validate(2).is_ok());
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let mut data_rng = ChaCha8Rng::seed_from_u64(10);
        let mut pts = uniform_points(&mut data_rng, 3000, 3);
        for row in pts.rows_mut() {
            row[2] = row[2].sqrt();
        }
        let a = fit_tree(&pts, &LearnerConfig::default(), &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = fit_tree(&pts, &LearnerConfig::default(), &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }
}
