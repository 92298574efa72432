//! Monte-Carlo KL divergence and held-out predictive scores.

use rand::Rng;
use rayon::prelude::*;

use crate::boosting::Ensemble;
use crate::error::{Error, Result};
use crate::pipeline::scenario::Scenario;
use crate::points::Points;

/// Smallest Monte-Carlo sample accepted by [`estimate_kl`].
pub const MIN_MC_COUNT: usize = 1000;

/// A distribution that can be sampled and whose log-density is known.
pub trait TrueDistribution: Sync {
    fn dim(&self) -> usize;
    fn draw(&self, count: usize, rng: &mut dyn rand::RngCore) -> Points;
    fn true_log_density(&self, x: &[f64]) -> f64;
}

impl TrueDistribution for Scenario {
    fn dim(&self) -> usize {
        Scenario::dim(*self)
    }

    fn draw(&self, count: usize, rng: &mut dyn rand::RngCore) -> Points {
        self.sample(count, rng)
    }

    fn true_log_density(&self, x: &[f64]) -> f64 {
        self.log_density(x)
    }
}

/// An ensemble as a reference distribution, on its original data scale.
impl TrueDistribution for Ensemble {
    fn dim(&self) -> usize {
        Ensemble::dim(self)
    }

    fn draw(&self, count: usize, rng: &mut dyn rand::RngCore) -> Points {
        self.sample(count, rng, true)
    }

    fn true_log_density(&self, x: &[f64]) -> f64 {
        self.log_density(x, true).unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlEstimate {
    pub kl: f64,
    pub std_error: f64,
    /// Draws that entered the average.
    pub used: usize,
    /// Draws where the model density vanished; left out of the average.
    pub excluded: usize,
}

/// Estimates `KL(truth || model)` by averaging `log f*(X) − log f(X)` over
/// draws from the truth. The model is evaluated on its original data scale.
pub fn estimate_kl<T: TrueDistribution + ?Sized, R: Rng>(
    truth: &T,
    model: &Ensemble,
    mc_count: usize,
    rng: &mut R,
) -> Result<KlEstimate> {
    if mc_count < MIN_MC_COUNT {
        return Err(Error::invalid(format!(
            "Monte-Carlo sample must have at least {MIN_MC_COUNT} points, got {mc_count}"
        )));
    }
    if truth.dim() != model.dim() {
        return Err(Error::invalid(format!(
            "truth has dimension {}, model has {}",
            truth.dim(),
            model.dim()
        )));
    }
    let draws = truth.draw(mc_count, rng);
    let model_logs = model.log_density_batch(&draws, true)?;
    let diffs: Vec<f64> = draws
        .values()
        .par_chunks(draws.dim())
        .zip(model_logs.par_iter())
        .map(|(x, &m)| {
            if m == f64::NEG_INFINITY {
                f64::NAN
            } else {
                truth.true_log_density(x) - m
            }
        })
        .collect();
    let kept: Vec<f64> = diffs.into_iter().filter(|v| !v.is_nan()).collect();
    let excluded = mc_count - kept.len();
    if kept.is_empty() {
        return Err(Error::data("model density vanishes at every Monte-Carlo draw"));
    }
    let (mean, sd) = mean_sd(&kept);
    Ok(KlEstimate {
        kl: mean,
        std_error: sd / (kept.len() as f64).sqrt(),
        used: kept.len(),
        excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictiveScore {
    /// Mean log-density over scorable rows (`-inf` if none are).
    pub mean: f64,
    pub sd: f64,
    pub scored: usize,
    /// Rows outside the model's support, left out of the mean.
    pub outside: usize,
}

/// Mean and standard deviation of the model's log-density over `test`.
pub fn predictive_score(model: &Ensemble, test: &Points, original_scale: bool) -> Result<PredictiveScore> {
    if test.is_empty() {
        return Err(Error::data("test set is empty"));
    }
    let logs = model.log_density_batch(test, original_scale)?;
    Ok(summarize_scores(&logs))
}

/// Summarises per-row log-densities, setting aside `-inf` rows.
pub fn summarize_scores(logs: &[f64]) -> PredictiveScore {
    let kept: Vec<f64> = logs.iter().copied().filter(|v| v.is_finite()).collect();
    let outside = logs.len() - kept.len();
    if kept.is_empty() {
        return PredictiveScore {
            mean: f64::NEG_INFINITY,
            sd: 0.0,
            scored: 0,
            outside,
        };
    }
    let (mean, sd) = mean_sd(&kept);
    PredictiveScore {
        mean,
        sd,
        scored: kept.len(),
        outside,
    }
}

/// Sample mean and (n−1)-normalised standard deviation.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
