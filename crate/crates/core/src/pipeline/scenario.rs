//! Two-dimensional synthetic scenarios with known densities.
//!
//! - A: correlated bivariate normal, mean (1/2, 1/2), σ = 1/8, ρ = 0.95,
//!   drawn by rejection into the cube. The density is reported without
//!   renormalising for the truncated mass (about 6e-5).
//! - B: four-component mixture of products of Beta densities.
//! - C: equal-weight mixture of uniforms on three boxes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::points::Points;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    A,
    B,
    C,
}

const NORMAL_MEAN: f64 = 0.5;
const NORMAL_SD: f64 = 1.0 / 8.0;
const NORMAL_RHO: f64 = 0.95;

/// (weight, (α1, β1), (α2, β2))
type BetaComponent = (f64, (f64, f64), (f64, f64));

const BETA_MIXTURE: [BetaComponent; 4] = [
    (0.1, (1.0, 1.0), (1.0, 1.0)),
    (0.3, (15.0, 45.0), (15.0, 45.0)),
    (0.3, (45.0, 15.0), (22.5, 37.5)),
    (0.3, (37.5, 22.5), (45.0, 15.0)),
];

/// Boxes `[lo1, hi1) × [lo2, hi2)`, each with weight 1/3.
pub const SCENARIO_C_BOXES: [([f64; 2], [f64; 2]); 3] = [
    ([0.1, 0.35], [0.45, 0.9]),
    ([0.2, 0.45], [0.8, 0.5]),
    ([0.7, 0.05], [0.9, 0.6]),
];

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::A, Scenario::B, Scenario::C];

    pub fn dim(self) -> usize {
        2
    }

    /// Sample size used by the reference simulation study.
    pub fn default_n(self) -> usize {
        match self {
            Scenario::A => 1000,
            Scenario::B => 5000,
            Scenario::C => 2000,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Points {
        let mut values = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let [x1, x2] = self.draw(rng);
            values.push(x1);
            values.push(x2);
        }
        Points::new(2, values).expect("two columns")
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> [f64; 2] {
        match self {
            Scenario::A => loop {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let x1 = NORMAL_MEAN + NORMAL_SD * z1;
                let x2 = NORMAL_MEAN
                    + NORMAL_SD * (NORMAL_RHO * z1 + (1.0 - NORMAL_RHO * NORMAL_RHO).sqrt() * z2);
                if in_cube(x1) && in_cube(x2) {
                    break [x1, x2];
                }
            },
            Scenario::B => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = BETA_MIXTURE.len() - 1;
                for (k, (w, _, _)) in BETA_MIXTURE.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                let (_, (a1, b1), (a2, b2)) = BETA_MIXTURE[pick];
                [beta_draw(a1, b1, rng), beta_draw(a2, b2, rng)]
            }
            Scenario::C => {
                let (lo, hi) = SCENARIO_C_BOXES[rng.random_range(0..3)];
                let x1 = lo[0] + (hi[0] - lo[0]) * rng.random::<f64>();
                let x2 = lo[1] + (hi[1] - lo[1]) * rng.random::<f64>();
                [x1, x2]
            }
        }
    }

    /// True log-density at `x` (`-inf` where the density vanishes).
    pub fn log_density(self, x: &[f64]) -> f64 {
        match self {
            Scenario::A => {
                let u1 = (x[0] - NORMAL_MEAN) / NORMAL_SD;
                let u2 = (x[1] - NORMAL_MEAN) / NORMAL_SD;
                let one_minus = 1.0 - NORMAL_RHO * NORMAL_RHO;
                let q = (u1 * u1 - 2.0 * NORMAL_RHO * u1 * u2 + u2 * u2) / one_minus;
                -(2.0 * std::f64::consts::PI * NORMAL_SD * NORMAL_SD * one_minus.sqrt()).ln()
                    - 0.5 * q
            }
            Scenario::B => {
                if !(x[0] > 0.0 && x[0] < 1.0 && x[1] > 0.0 && x[1] < 1.0) {
                    return f64::NEG_INFINITY;
                }
                let terms: Vec<f64> = BETA_MIXTURE
                    .iter()
                    .map(|&(w, (a1, b1), (a2, b2))| {
                        w.ln() + beta_log_pdf(x[0], a1, b1) + beta_log_pdf(x[1], a2, b2)
                    })
                    .collect();
                log_sum_exp(&terms)
            }
            Scenario::C => {
                let density: f64 = SCENARIO_C_BOXES
                    .iter()
                    .filter(|(lo, hi)| (0..2).all(|j| x[j] >= lo[j] && x[j] < hi[j]))
                    .map(|(lo, hi)| (1.0 / 3.0) / ((hi[0] - lo[0]) * (hi[1] - lo[1])))
                    .sum();
                density.ln()
            }
        }
    }

    pub fn mixture_weights(self) -> Vec<f64> {
        match self {
            Scenario::A => vec![1.0],
            Scenario::B => BETA_MIXTURE.iter().map(|c| c.0).collect(),
            Scenario::C => vec![1.0 / 3.0; 3],
        }
    }
}

fn in_cube(v: f64) -> bool {
    v > 0.0 && v <= 1.0
}

fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let dist = Beta::new(a, b).expect("valid beta parameters");
    loop {
        let v: f64 = dist.sample(rng);
        if in_cube(v) {
            return v;
        }
    }
}

fn beta_log_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
        };
        f.write_str(name)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            "C" | "c" => Ok(Scenario::C),
            other => Err(Error::invalid(format!("unknown scenario {other:?}; expected A, B or C"))),
        }
    }
}

/// A scenario together with a sample size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioSpec {
            scenario,
            n: scenario.default_n(),
        }
    }

    /// Draws the sample and the true log-density at every sampled point.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> (Points, Vec<f64>) {
        let pts = self.scenario.sample(self.n, rng);
        let logs = pts.rows().map(|r| self.scenario.log_density(r)).collect();
        (pts, logs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_names() {
        assert_eq!("B".parse::<Scenario>().unwrap(), Scenario::B);
        assert_eq!("c".parse::<Scenario>().unwrap(), Scenario::C);
        assert!("D".parse::<Scenario>().is_err());
        assert_eq!(Scenario::A.to_string(), "A");
    }

    #[test]
    fn scenario_c_density_inside_first_box() {
        let want = ((1.0f64 / 3.0) / ((0.45 - 0.1) * (0.9 - 0.35))).ln();
        assert!((Scenario::C.log_density(&[0.3, 0.5]) - want).abs() < 1e-12);
        assert!((Scenario::C.log_density(&[0.3, 0.6]) - want).abs() < 1e-12);
        assert_eq!(Scenario::C.log_density(&[0.05, 0.05]), f64::NEG_INFINITY);
        // Overlap of boxes 1 and 2 adds both components.
        let both: f64 = (1.0 / 3.0) / (0.35 * 0.55) + (1.0 / 3.0) / (0.6 * 0.05);
        assert!((Scenario::C.log_density(&[0.3, 0.47]) - both.ln()).abs() < 1e-12);
    }

    #[test]
    fn scenario_b_weights_sum_to_one() {
        let total: f64 = Scenario::B.mixture_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn densities_integrate_to_one() {
        let g = 1000;
        let h = 1.0 / g as f64;
        for s in Scenario::ALL {
            let mut total = 0.0;
            for i in 0..g {
                for k in 0..g {
                    let x = [(i as f64 + 0.5) * h, (k as f64 + 0.5) * h];
                    total += s.log_density(&x).exp() * h * h;
                }
            }
            assert!((total - 1.0).abs() < 2e-3, "{s}: {total}");
        }
    }

    #[test]
    fn scenario_a_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let pts = Scenario::A.sample(n, &mut rng);
        for j in 0..2 {
            let mean = pts.column(j).iter().sum::<f64>() / n as f64;
            assert!((mean - 0.5).abs() < 3.0 * NORMAL_SD / (n as f64).sqrt());
        }
    }

    #[test]
    fn samples_stay_in_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in Scenario::ALL {
            let spec = ScenarioSpec::new(s);
            let (pts, logs) = spec.generate(&mut rng);
            assert_eq!(pts.len(), s.default_n());
            assert!(pts.in_unit_cube());
            assert!(logs.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn scenario_c_box_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = Scenario::C.sample(30_000, &mut rng);
        let in_third = pts.rows().filter(|r| r[0] >= 0.7 && r[1] < 0.45).count();
        // Box 3 below x2 = 0.45 only overlaps no other box: mass (1/3)·(0.4/0.55).
        let p: f64 = (1.0 / 3.0) * (0.4 / 0.55);
        let se = (p * (1.0 - p) / 30_000.0).sqrt();
        assert!((in_third as f64 / 30_000.0 - p).abs() < 4.0 * se);
    }
}
