//! Min-max scaling into the unit cube and tie jittering.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

/// Value a scaled coordinate of exactly 0 is moved to, so it lies in `(0,1]`.
pub const CUBE_FLOOR: f64 = f64::MIN_POSITIVE;

/// Slack on the upper face for rounding in `(x − lo) / width`.
const UPPER_SLACK: f64 = 4.0 * f64::EPSILON;

/// Affine map from the original coordinates into the unit cube.
///
/// Column `j` maps `x` to `(x − lo_j) / width_j` with
/// `lo_j = min_j − margin·range_j` and `width_j = (1 + 2·margin)·range_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessRecord {
    min: Vec<f64>,
    max: Vec<f64>,
    margin: f64,
    jitter_applied: Vec<bool>,
    log_jacobian: f64,
}

impl PreprocessRecord {
    /// Identity map for data already in the cube.
    pub fn identity(d: usize) -> Self {
        PreprocessRecord::new(vec![0.0; d], vec![1.0; d], 0.0, vec![false; d])
            .expect("unit ranges are valid")
    }

    pub fn new(min: Vec<f64>, max: Vec<f64>, margin: f64, jitter_applied: Vec<bool>) -> Result<Self> {
        if min.is_empty() || min.len() != max.len() || min.len() != jitter_applied.len() {
            return Err(Error::invalid("preprocessing vectors must be non-empty and equal length"));
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::invalid(format!("margin {margin} must be finite and non-negative")));
        }
        for (j, (&lo, &hi)) in min.iter().zip(&max).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::data(format!(
                    "column {j}: range [{lo}, {hi}] is empty or non-finite"
                )));
            }
        }
        let mut record = PreprocessRecord {
            min,
            max,
            margin,
            jitter_applied,
            log_jacobian: 0.0,
        };
        let log_width: f64 = (0..record.dim()).map(|j| record.width(j).ln()).sum();
        record.log_jacobian = 0.0 - log_width;
        Ok(record)
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn jitter_applied(&self) -> &[bool] {
        &self.jitter_applied
    }

    pub(crate) fn set_jitter_applied(&mut self, flags: Vec<bool>) {
        assert_eq!(flags.len(), self.dim());
        self.jitter_applied = flags;
    }

    /// `−Σ_j log width_j`, added to cube-scale log-densities.
    pub fn log_jacobian(&self) -> f64 {
        self.log_jacobian
    }

    fn range(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    fn lower(&self, j: usize) -> f64 {
        self.min[j] - self.margin * self.range(j)
    }

    fn width(&self, j: usize) -> f64 {
        (1.0 + 2.0 * self.margin) * self.range(j)
    }

    /// Scales one original-coordinate point into the cube, or `None` when it
    /// falls outside the expanded box.
    pub fn scale_point(&self, x: &[f64]) -> Option<Vec<f64>> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let y = (v - self.lower(j)) / self.width(j);
                if y == 0.0 {
                    Some(CUBE_FLOOR)
                } else if y > 0.0 && y <= 1.0 {
                    Some(y)
                } else if y > 1.0 && y <= 1.0 + UPPER_SLACK {
                    Some(1.0)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn unscale_point(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(j, &v)| self.lower(j) + v * self.width(j))
            .collect()
    }

    pub fn unscale(&self, points: &Points) -> Points {
        let mut out = points.clone();
        for row in out.rows_mut() {
            let x = self.unscale_point(row);
            row.copy_from_slice(&x);
        }
        out
    }

    /// Scales a batch; rows outside the expanded box are reported by index.
    pub fn scale(&self, points: &Points) -> Result<Points> {
        let mut out = points.clone();
        for (i, row) in out.rows_mut().enumerate() {
            let y = self.scale_point(row).ok_or_else(|| {
                Error::data(format!("row {i} lies outside the preprocessing box"))
            })?;
            row.copy_from_slice(&y);
        }
        Ok(out)
    }
}

fn check_finite(data: &Points) -> Result<()> {
    for (i, row) in data.rows().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("row {i}, column {j}: non-finite value {}", row[j])));
        }
    }
    Ok(())
}

/// Fits a min-max map with relative `margin` and applies it to `data`.
pub fn minmax_scale(data: &Points, margin: f64) -> Result<(Points, PreprocessRecord)> {
    if data.len() < 2 {
        return Err(Error::data("scaling needs at least two rows"));
    }
    check_finite(data)?;
    let d = data.dim();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in data.rows() {
        for j in 0..d {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    if let Some(j) = (0..d).find(|&j| max[j] <= min[j]) {
        return Err(Error::data(format!("column {j} is constant ({})", min[j])));
    }
    let record = PreprocessRecord::new(min, max, margin, vec![false; d])?;
    let mut scaled = data.clone();
    for row in scaled.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let y = (*v - record.lower(j)) / record.width(j);
            *v = if y <= 0.0 { CUBE_FLOOR } else { y.min(1.0) };
        }
    }
    Ok((scaled, record))
}

/// Spreads tied values over the gap to their neighbours.
///
/// A value `x` that occurs more than once, with distinct neighbours
/// `x₋ < x < x₊`, has each occurrence replaced by `x + e` with
/// `e ~ Unif(−(x − x₋)/2, (x₊ − x)/2)`. At the ends of the range the missing
/// side reuses the half-gap of the side that exists. Returns the new column
/// and whether any ties were found.
pub fn jitter_ties<R: Rng + ?Sized>(column: &[f64], rng: &mut R) -> Result<(Vec<f64>, bool)> {
    if let Some(v) = column.iter().find(|v| !v.is_finite()) {
        return Err(Error::data(format!("non-finite value {v}")));
    }
    // `+ 0.0` folds -0.0 into 0.0 so sorting and lookup agree.
    let column: Vec<f64> = column.iter().map(|&v| v + 0.0).collect();
    let mut unique = column.clone();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let has_ties = unique.len() < column.len();
    if !has_ties {
        return Ok((column, false));
    }
    if unique.len() < 2 {
        return Err(Error::data("all values are identical; ties cannot be jittered"));
    }
    let mut multiplicity = vec![0usize; unique.len()];
    let positions: Vec<usize> = column
        .iter()
        .map(|v| unique.binary_search_by(|u| u.total_cmp(v)).expect("value present"))
        .collect();
    for &k in &positions {
        multiplicity[k] += 1;
    }
    let out = column
        .iter()
        .zip(&positions)
        .map(|(&x, &k)| {
            if multiplicity[k] < 2 {
                return x;
            }
            let below = (k > 0).then(|| (x - unique[k - 1]) / 2.0);
            let above = unique.get(k + 1).map(|&up| (up - x) / 2.0);
            let (lo, hi) = match (below, above) {
                (Some(b), Some(a)) => (b, a),
                (Some(b), None) => (b, b),
                (None, Some(a)) => (a, a),
                (None, None) => unreachable!("at least two distinct values"),
            };
            let t = loop {
                let t = rng.random::<f64>();
                if t > 0.0 {
                    break t;
                }
            };
            x - lo + t * (lo + hi)
        })
        .collect();
    Ok((out, true))
}

/// Jitters every column of `data` in place; returns per-column tie flags.
pub fn jitter_columns<R: Rng + ?Sized>(data: &mut Points, rng: &mut R) -> Result<Vec<bool>> {
    let mut flags = Vec::with_capacity(data.dim());
    for j in 0..data.dim() {
        let (col, tied) =
            jitter_ties(&data.column(j), rng).map_err(|e| Error::data(format!("column {j}: {e}")))?;
        data.set_column(j, &col);
        flags.push(tied);
    }
    Ok(flags)
}

/// Jitter (optional) then scale: the preparation used for training.
pub fn prepare_training<R: Rng + ?Sized>(
    data: &Points,
    margin: f64,
    jitter: bool,
    rng: &mut R,
) -> Result<(Points, PreprocessRecord)> {
    check_finite(data)?;
    let mut work = data.clone();
    let flags = if jitter {
        jitter_columns(&mut work, rng)?
    } else {
        vec![false; data.dim()]
    };
    let (scaled, mut record) = minmax_scale(&work, margin)?;
    record.set_jitter_applied(flags);
    Ok((scaled, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_data_with_zero_margin_is_nearly_identity() {
        let data = Points::from_rows(&[[0.25, 0.5], [1.0, 1.0], [0.5, 0.75]]).unwrap();
        // Range [0.25, 1] on column 0 and [0.5, 1] on column 1; check affine values.
        let (scaled, rec) = minmax_scale(&data, 0.0).unwrap();
        assert_eq!(scaled.row(1), &[1.0, 1.0]);
        assert!((scaled.row(2)[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((scaled.row(2)[1] - 0.5).abs() < 1e-15);
        assert_eq!(scaled.row(0), &[CUBE_FLOOR, CUBE_FLOOR]);
        assert!((rec.log_jacobian() - (-(0.75f64.ln() + 0.5f64.ln()))).abs() < 1e-15);
        let full = Points::from_rows(&[[1e-300], [0.5], [1.0]]).unwrap();
        let (s, _) = minmax_scale(&full, 0.0).unwrap();
        assert!((s.row(1)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetric_column_example() {
        let data = Points::from_rows(&[[-1.0], [0.0], [1.0]]).unwrap();
        let (scaled, _) = minmax_scale(&data, 0.0).unwrap();
        assert_eq!(scaled.row(0)[0], CUBE_FLOOR);
        assert!(scaled.row(0)[0] > 0.0);
        assert_eq!(scaled.row(1)[0], 0.5);
        assert_eq!(scaled.row(2)[0], 1.0);
    }

    #[test]
    fn constant_column_is_named() {
        let data = Points::from_rows(&[[1.0, 2.0], [3.0, 2.0]]).unwrap();
        match minmax_scale(&data, 0.01) {
            Err(Error::Data(msg)) => assert!(msg.contains("column 1")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(minmax_scale(&Points::from_rows(&[[1.0]]).unwrap(), 0.0).is_err());
        let inf = Points::from_rows(&[[1.0], [f64::INFINITY]]).unwrap();
        assert!(minmax_scale(&inf, 0.0).is_err());
    }

    #[test]
    fn margin_keeps_nearby_points_scorable() {
        let data = Points::from_rows(&[[0.0], [10.0]]).unwrap();
        let (scaled, rec) = minmax_scale(&data, 0.01).unwrap();
        assert!(scaled.in_unit_cube());
        assert!(rec.scale_point(&[-0.05]).is_some());
        assert!(rec.scale_point(&[10.05]).is_some());
        assert!(rec.scale_point(&[-0.2]).is_none());
        assert!(rec.scale_point(&[10.2]).is_none());
        assert!((rec.log_jacobian() + (10.2f64).ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..40),
                            margin in 0.0f64..0.1) {
            let data = Points::from_rows(&rows).unwrap();
            let d = data.dim();
            let degenerate = (0..d).any(|j| {
                let c = data.column(j);
                c.iter().cloned().fold(f64::INFINITY, f64::min) == c.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            });
            prop_assume!(!degenerate);
            let (scaled, rec) = minmax_scale(&data, margin).unwrap();
            prop_assert!(scaled.in_unit_cube());
            let back = rec.unscale(&scaled);
            for (a, b) in back.values().iter().zip(data.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let again = rec.scale(&data).unwrap();
            for (a, b) in again.values().iter().zip(scaled.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn jitter_preserves_order_between_distinct_values(
            column in prop::collection::vec(0i32..8, 2..60),
            seed in 0u64..1000,
        ) {
            let column: Vec<f64> = column.into_iter().map(f64::from).collect();
            let distinct = { let mut u = column.clone(); u.sort_by(f64::total_cmp); u.dedup(); u.len() };
            prop_assume!(distinct >= 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (out, _) = jitter_ties(&column, &mut rng).unwrap();
            for i in 0..column.len() {
                for k in 0..column.len() {
                    if column[i] < column[k] {
                        prop_assert!(out[i] <= out[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn jitter_without_ties_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let col = [0.3, 0.1, 0.9];
        let (out, tied) = jitter_ties(&col, &mut rng).unwrap();
        assert_eq!(out, col);
        assert!(!tied);
    }

    #[test]
    fn jitter_support_for_interior_ties() {
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (out, tied) = jitter_ties(&[1.0, 2.0, 2.0, 3.0], &mut rng).unwrap();
            assert!(tied);
            assert_eq!(out[0], 1.0);
            assert_eq!(out[3], 3.0);
            for v in &out[1..3] {
                assert!(*v > 1.5 && *v < 2.5, "{v}");
            }
            assert_ne!(out[1], out[2]);
        }
    }

    #[test]
    fn jitter_boundary_ties_use_existing_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (out, _) = jitter_ties(&[0.0, 0.0, 1.0], &mut rng).unwrap();
            for v in &out[..2] {
                assert!(*v > -0.5 && *v < 0.5);
            }
        }
    }

    #[test]
    fn jitter_rejects_constant_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(jitter_ties(&[4.0, 4.0, 4.0], &mut rng).is_err());
    }

    #[test]
    fn jittered_values_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let col: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        let (out, _) = jitter_ties(&col, &mut rng).unwrap();
        let mut sorted = out.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), out.len());
    }

    #[test]
    fn prepare_training_records_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = Points::from_rows(&[[1.0, 0.5], [1.0, 0.7], [2.0, 0.9]]).unwrap();
        let (scaled, rec) = prepare_training(&data, 0.01, true, &mut rng).unwrap();
        assert_eq!(rec.jitter_applied(), &[true, false]);
        assert!(scaled.in_unit_cube());
    }
}
