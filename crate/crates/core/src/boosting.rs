//! Forward-stagewise fitting of an additive ensemble of tree measures.
//!
//! Each iteration fits a tree measure to the current residuals, then pushes
//! every residual through that tree's forward map. The ensemble density at a
//! point is the product of each tree's density at the point's successive
//! residuals, and the mean training log-density is the sum of the per-tree
//! improvements. With the two-stage schedule, the first trees are restricted to
//! one coordinate each (the margins) and the rest are unrestricted (the copula).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::preprocess::PreprocessRecord;
use crate::points::Points;
use crate::rng::{substream, Substream};
use crate::tree_cdf::TreeMeasure;
use crate::weak_learner::{apply_shrinkage, fit_tree, validate_shrinkage, LearnerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Global learning rate `c0 ∈ (0, 1]`.
    pub c0: f64,
    /// Depth exponent `γ ≥ 0` of the node-wise learning rate.
    pub gamma: f64,
    /// Marginal-stage trees per dimension.
    pub trees_per_margin: usize,
    /// Unrestricted (copula-stage) trees.
    pub trees_copula: usize,
    /// When false the marginal stage is skipped entirely.
    pub two_stage: bool,
    pub learner: LearnerConfig,
    pub seed: u64,
    /// Copula stage stops once the mean of the last `early_stop_window`
    /// improvements drops below this value; `0` disables the check.
    pub early_stop_threshold: f64,
    pub early_stop_window: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            c0: 0.1,
            gamma: 0.0,
            trees_per_margin: 100,
            trees_copula: 2500,
            two_stage: true,
            learner: LearnerConfig::default(),
            seed: 0,
            early_stop_threshold: 0.0,
            early_stop_window: 50,
        }
    }
}

impl FitConfig {
    /// Single-stage schedule with `trees` unrestricted trees.
    pub fn single_stage(c0: f64, gamma: f64, trees: usize) -> Self {
        FitConfig {
            c0,
            gamma,
            trees_per_margin: 0,
            trees_copula: trees,
            two_stage: false,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        validate_shrinkage(self.c0, self.gamma)?;
        self.learner.validate(d)?;
        if self.learner.dim_restriction.is_some() {
            return Err(Error::invalid(
                "dimension restrictions are set per stage, not in the fit configuration",
            ));
        }
        if self.early_stop_threshold > 0.0 && self.early_stop_window == 0 {
            return Err(Error::invalid("early stopping needs a positive window"));
        }
        Ok(())
    }

    /// Restriction of every tree in fitting order.
    fn schedule(&self, d: usize) -> Vec<Option<usize>> {
        let mut plan = Vec::new();
        if self.two_stage {
            for j in 0..d {
                plan.extend(std::iter::repeat_n(Some(j), self.trees_per_margin));
            }
        }
        plan.extend(std::iter::repeat_n(None, self.trees_copula));
        plan
    }
}

/// An additive ensemble `G_1 ⊕ ⋯ ⊕ G_K` with its fitting record.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    dim: usize,
    trees: Vec<TreeMeasure>,
    improvements: Vec<f64>,
    importance: Vec<f64>,
    preprocess: PreprocessRecord,
    config: FitConfig,
}

impl Ensemble {
    /// The zero element: the uniform distribution on the cube.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Ensemble {
            dim,
            trees: Vec::new(),
            improvements: Vec::new(),
            importance: vec![0.0; dim],
            preprocess: PreprocessRecord::identity(dim),
            config: FitConfig {
                trees_per_margin: 0,
                trees_copula: 0,
                ..FitConfig::default()
            },
        })
    }

    /// Assembles an ensemble from stored parts.
    pub fn from_parts(
        trees: Vec<TreeMeasure>,
        improvements: Vec<f64>,
        importance: Vec<f64>,
        preprocess: PreprocessRecord,
        config: FitConfig,
    ) -> Result<Self> {
        let dim = preprocess.dim();
        if importance.len() != dim {
            return Err(Error::invalid("importance length does not match dimension"));
        }
        if improvements.len() != trees.len() {
            return Err(Error::invalid("one improvement per tree is required"));
        }
        if let Some(t) = trees.iter().find(|t| t.dim() != dim) {
            return Err(Error::invalid(format!(
                "tree of dimension {} in a {}-dimensional ensemble",
                t.dim(),
                dim
            )));
        }
        Ok(Ensemble {
            dim,
            trees,
            improvements,
            importance,
            preprocess,
            config,
        })
    }

    /// Fits with the RNG taken from the configuration's seed.
    pub fn fit_seeded(data: &Points, config: &FitConfig) -> Result<Self> {
        let mut rng = substream(config.seed, Substream::TreeFit);
        Ensemble::fit(data, config, &mut rng)
    }

    /// Forward-stagewise fit on data already inside `(0,1]^d`.
    pub fn fit<R: Rng + ?Sized>(data: &Points, config: &FitConfig, rng: &mut R) -> Result<Self> {
        let d = data.dim();
        config.validate(d)?;
        if data.is_empty() {
            return Err(Error::data("cannot fit an empty data set"));
        }
        if let Some(v) = data.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite coordinate {v}")));
        }
        if !data.in_unit_cube() {
            return Err(Error::data("training points must lie in (0,1]^d"));
        }

        let n = data.len();
        let mut residuals = data.clone();
        let mut ensemble = Ensemble::uniform(d)?;
        ensemble.config = config.clone();
        let mut learner = config.learner.clone();
        let mut copula_trees = 0usize;

        for restriction in config.schedule(d) {
            learner.dim_restriction = restriction;
            let tree = fit_tree(&residuals, &learner, rng)?;
            let measure = apply_shrinkage(tree, config.c0, config.gamma, restriction)?;
            for (total, part) in ensemble
                .importance
                .iter_mut()
                .zip(importance_contribution(&measure, n))
            {
                *total += part;
            }
            let gain = push_residuals(&measure, &mut residuals);
            ensemble.trees.push(measure);
            ensemble.improvements.push(gain);

            if restriction.is_none() {
                copula_trees += 1;
                if config.early_stop_threshold > 0.0 && copula_trees >= config.early_stop_window {
                    let window = &ensemble.improvements[ensemble.improvements.len() - config.early_stop_window..];
                    let mean = window.iter().sum::<f64>() / window.len() as f64;
                    if mean < config.early_stop_threshold {
                        break;
                    }
                }
            }
        }
        Ok(ensemble)
    }

    pub fn with_preprocess(mut self, preprocess: PreprocessRecord) -> Result<Self> {
        if preprocess.dim() != self.dim {
            return Err(Error::invalid("preprocessing record dimension mismatch"));
        }
        self.preprocess = preprocess;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[TreeMeasure] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Per-tree improvements `D_k`, in fitting order.
    pub fn improvements(&self) -> &[f64] {
        &self.improvements
    }

    /// Per-dimension importance `I_j`.
    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn preprocess(&self) -> &PreprocessRecord {
        &self.preprocess
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// Mean training log-density, `Σ_k D_k` (cube scale).
    pub fn training_log_density(&self) -> f64 {
        self.improvements.iter().sum()
    }

    /// Number of marginal-stage trees (leading trees with a restriction).
    pub fn marginal_tree_count(&self) -> usize {
        self.trees
            .iter()
            .take_while(|t| t.restriction().is_some())
            .count()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, model has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Pushes `x` through the first `upto` tree-CDFs in fitting order.
    pub fn residualize(&self, x: &[f64], upto: usize) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if upto > self.trees.len() {
            return Err(Error::invalid(format!(
                "cannot residualize through {upto} trees; the ensemble has {}",
                self.trees.len()
            )));
        }
        if !x.iter().all(|&v| v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(format!("point {x:?} lies outside (0,1]^d")));
        }
        let mut r = x.to_vec();
        for tree in &self.trees[..upto] {
            tree.push(&mut r);
        }
        Ok(r)
    }

    /// Log-density at `x`. With `original_scale` the point is first mapped
    /// through the preprocessing record and its log-Jacobian is added.
    /// Points outside the support get `-inf` rather than an error.
    pub fn log_density(&self, x: &[f64], original_scale: bool) -> Result<f64> {
        self.check_dim(x)?;
        let mut r = if original_scale {
            match self.preprocess.scale_point(x) {
                Some(y) => y,
                None => return Ok(f64::NEG_INFINITY),
            }
        } else {
            if !x.iter().all(|&v| v > 0.0 && v <= 1.0) {
                return Ok(f64::NEG_INFINITY);
            }
            x.to_vec()
        };
        let mut total = if original_scale {
            self.preprocess.log_jacobian()
        } else {
            0.0
        };
        for tree in &self.trees {
            total += tree.push(&mut r);
        }
        Ok(total)
    }

    pub fn log_density_batch(&self, points: &Points, original_scale: bool) -> Result<Vec<f64>> {
        if points.dim() != self.dim {
            return Err(Error::invalid(format!(
                "data has {} columns, model has {}",
                points.dim(),
                self.dim
            )));
        }
        points
            .values()
            .par_chunks(self.dim)
            .map(|row| self.log_density(row, original_scale))
            .collect()
    }

    /// Maps a point of the cube to the model's sample space:
    /// `G_1^{-1} ∘ ⋯ ∘ G_K^{-1}`.
    pub fn generate(&self, u: &mut [f64]) {
        for tree in self.trees.iter().rev() {
            tree.pull(u);
        }
    }

    /// Draws `count` samples by inverse-CDF transformation of uniform draws.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R, original_scale: bool) -> Points {
        let values: Vec<f64> = (0..count * self.dim)
            .map(|_| 1.0 - rng.random::<f64>())
            .collect();
        let mut out = Points::new(self.dim, values).expect("dimension is positive");
        out.values_mut().par_chunks_mut(self.dim).for_each(|row| {
            self.generate(row);
            if original_scale {
                let x = self.preprocess.unscale_point(row);
                row.copy_from_slice(&x);
            }
        });
        out
    }
}

/// Pushes every residual through `tree` and returns the improvement, the mean
/// of the tree's log-density at the pre-update residuals.
fn push_residuals(tree: &TreeMeasure, residuals: &mut Points) -> f64 {
    let n = residuals.len();
    let d = residuals.dim();
    let logs: Vec<f64> = residuals
        .values_mut()
        .par_chunks_mut(d)
        .map(|row| tree.push(row))
        .collect();
    logs.iter().sum::<f64>() / n as f64
}

/// Improvement `D_k`: mean log-density of `tree` over `residuals`.
pub fn improvement(tree: &TreeMeasure, residuals: &Points) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    let logs: Vec<f64> = residuals
        .values()
        .par_chunks(residuals.dim())
        .map(|row| tree.log_density_unchecked(row))
        .collect();
    logs.iter().sum::<f64>() / residuals.len() as f64
}

/// Splits a tree's improvement over the dimensions its nodes split, using the
/// counts recorded while fitting on `total` residuals:
/// `Σ_{A split in j} F̃(A)·[F̃(A_l|A)·log(θ/μ_l) + F̃(A_r|A)·log((1−θ)/μ_r)]`.
pub fn importance_contribution(tree: &TreeMeasure, total: usize) -> Vec<f64> {
    let mut out = vec![0.0; tree.dim()];
    if total == 0 {
        return out;
    }
    let nodes = tree.tree().nodes();
    for (id, node) in nodes.iter().enumerate() {
        let Some(mv) = tree.local_move_at(id) else {
            continue;
        };
        if node.count == 0 {
            continue;
        }
        let n_left = nodes[mv.left].count as f64;
        let n_right = nodes[mv.right].count as f64;
        let mut term = 0.0;
        if n_left > 0.0 {
            term += n_left * mv.log_ratio(true);
        }
        if n_right > 0.0 {
            term += n_right * mv.log_ratio(false);
        }
        out[mv.dim] += term / total as f64;
    }
    out
}
