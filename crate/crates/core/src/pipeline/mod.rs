//! Data preparation, model selection, synthetic scenarios and evaluation.

pub mod cv;
pub mod metrics;
pub mod preprocess;
pub mod scenario;

pub use cv::{cross_validate, CvOutcome, CvRow};
pub use metrics::{estimate_kl, predictive_score, KlEstimate, PredictiveScore, TrueDistribution};
pub use preprocess::{jitter_ties, minmax_scale, PreprocessRecord};
pub use scenario::{Scenario, ScenarioSpec};
