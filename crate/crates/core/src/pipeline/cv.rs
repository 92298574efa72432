//! K-fold cross-validation over a grid of `(c0, γ)` pairs.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boosting::{Ensemble, FitConfig};
use crate::error::{Error, Result};
use crate::points::Points;
use crate::rng::{substream, Substream};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvRow {
    pub c0: f64,
    pub gamma: f64,
    /// Mean over folds of the held-out mean log-density.
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    pub c0: f64,
    pub gamma: f64,
    pub score: f64,
    /// One row per grid pair, `c0` outer and `γ` inner, in grid order.
    pub table: Vec<CvRow>,
}

/// Selects `(c0, γ)` by `folds`-fold cross-validation on cube-scale data.
///
/// Rows are shuffled once with `rng` and cut into contiguous folds. Every
/// fold model uses `config` with its tree counts multiplied by
/// `schedule_scale` (rounded) and the tree-fitting stream of `config.seed`.
/// Ties go to the smaller `c0`, then the smaller `γ`.
pub fn cross_validate<R: Rng + ?Sized>(
    data: &Points,
    c0_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    config: &FitConfig,
    schedule_scale: f64,
    rng: &mut R,
) -> Result<CvOutcome> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    if c0_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::invalid("parameter grids must be non-empty"));
    }
    if data.len() < folds {
        return Err(Error::data(format!(
            "{} rows cannot fill {folds} folds",
            data.len()
        )));
    }
    if !(schedule_scale.is_finite() && schedule_scale > 0.0) {
        return Err(Error::invalid("schedule scale must be positive"));
    }
    let mut base = config.clone();
    base.trees_per_margin = scale_count(config.trees_per_margin, schedule_scale);
    base.trees_copula = scale_count(config.trees_copula, schedule_scale);
    for &c0 in c0_grid {
        for &gamma in gamma_grid {
            FitConfig { c0, gamma, ..base.clone() }.validate(data.dim())?;
        }
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let splits: Vec<(Points, Points)> = (0..folds)
        .map(|f| {
            let (lo, hi) = fold_bounds(data.len(), folds, f);
            let held: Vec<usize> = order[lo..hi].to_vec();
            let kept: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            (data.select(&kept), data.select(&held))
        })
        .collect();

    let pairs: Vec<(f64, f64)> = c0_grid
        .iter()
        .flat_map(|&c0| gamma_grid.iter().map(move |&g| (c0, g)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..folds).map(move |f| (p, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let (c0, gamma) = pairs[p];
            let cfg = FitConfig { c0, gamma, ..base.clone() };
            let (train, test) = &splits[f];
            let mut fit_rng = substream(cfg.seed, Substream::TreeFit);
            let model = Ensemble::fit(train, &cfg, &mut fit_rng)?;
            let logs = model.log_density_batch(test, false)?;
            Ok(logs.iter().sum::<f64>() / logs.len() as f64)
        })
        .collect::<Result<_>>()?;

    let table: Vec<CvRow> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(c0, gamma))| {
            let fold_scores = scores[p * folds..(p + 1) * folds].to_vec();
            let mean_score = fold_scores.iter().sum::<f64>() / folds as f64;
            CvRow {
                c0,
                gamma,
                mean_score,
                fold_scores,
            }
        })
        .collect();

    let best = table
        .iter()
        .filter(|r| !r.mean_score.is_nan())
        .fold(None::<&CvRow>, |best, row| match best {
            None => Some(row),
            Some(b) => {
                let better = row.mean_score > b.mean_score
                    || (row.mean_score == b.mean_score
                        && (row.c0, row.gamma).partial_cmp(&(b.c0, b.gamma)) == Some(std::cmp::Ordering::Less));
                Some(if better { row } else { b })
            }
        })
        .ok_or_else(|| Error::data("every cross-validation score is undefined"))?;

    Ok(CvOutcome {
        c0: best.c0,
        gamma: best.gamma,
        score: best.mean_score,
        table,
    })
}

fn scale_count(count: usize, scale: f64) -> usize {
    (count as f64 * scale).round() as usize
}

/// Half-open row range of fold `f`; earlier folds take the remainder.
fn fold_bounds(n: usize, folds: usize, f: usize) -> (usize, usize) {
    let base = n / folds;
    let extra = n % folds;
    let lo = f * base + f.min(extra);
    let hi = lo + base + usize::from(f < extra);
    (lo, hi)
}
