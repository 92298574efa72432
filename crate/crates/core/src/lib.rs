//! Unsupervised boosting of tree-based probability measures.
//!
//! A multivariate distribution on the unit cube is learned as an ordered
//! composition of conditionally uniform tree measures. Each fitted tree carries
//! a bijective "tree-CDF" on `(0,1]^d`; pushing observations through it removes
//! the structure the tree captured, and the next tree is fitted to what is left.
//! Densities are evaluated analytically and new samples are drawn by running
//! the inverse maps backwards over uniform draws.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: half-open boxes and recursive dyadic partition trees.
//! - [`tree_cdf`]: local moves, forward/inverse tree-CDFs and per-tree densities.
//! - [`weak_learner`]: the stochastic top-down tree fitter and node-wise shrinkage.
//! - [`boosting`]: the forward-stagewise loop, improvements and variable importance.
//! - [`pipeline`]: preprocessing, cross-validation, synthetic scenarios and metrics.
//! - [`model_file`] and [`csv_io`]: persistence and tabular IO.

pub mod boosting;
pub mod csv_io;
pub mod error;
pub mod geometry;
pub mod model_file;
pub mod pipeline;
pub mod points;
pub mod rng;
pub mod tree_cdf;
pub mod weak_learner;

pub use boosting::{Ensemble, FitConfig};
pub use error::{Error, Result};
pub use geometry::{PartitionTree, Rect};
pub use points::Points;
pub use tree_cdf::TreeMeasure;
pub use weak_learner::LearnerConfig;
