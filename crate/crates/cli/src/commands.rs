use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use boostpm::csv_io::{self, RowReader};
use boostpm::pipeline::preprocess::{jitter_columns, prepare_training};
use boostpm::pipeline::{cross_validate, estimate_kl, PreprocessRecord, Scenario, ScenarioSpec};
use boostpm::rng::{substream, Substream};
use boostpm::{model_file, Ensemble, Error, FitConfig, LearnerConfig, Points, Result};

use crate::{CvArgs, DensityArgs, EvaluateArgs, FitArgs, ImportanceArgs, SampleArgs, SimulateArgs, TrainArgs};

/// Rows scored per batch by `density`.
const DENSITY_CHUNK: usize = 1 << 16;

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fit_config(c0: f64, gamma: f64, fit: &FitArgs) -> FitConfig {
    FitConfig {
        c0,
        gamma,
        trees_per_margin: fit.trees_margin,
        trees_copula: fit.trees_copula,
        two_stage: !fit.no_two_stage,
        learner: LearnerConfig {
            grid_size: fit.grid,
            max_depth: fit.max_depth,
            min_count: fit.min_count,
            ..LearnerConfig::default()
        },
        seed: fit.seed,
        ..FitConfig::default()
    }
}

/// Reads training data and maps it into the cube.
fn prepare(path: &Path, fit: &FitArgs) -> Result<(Points, PreprocessRecord)> {
    let data = csv_io::read_points(path)?;
    if data.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }
    let mut rng = substream(fit.seed, Substream::Jitter);
    if fit.no_scale {
        let mut work = data;
        if fit.jitter_ties {
            jitter_columns(&mut work, &mut rng)?;
        }
        if !work.in_unit_cube() {
            return Err(Error::Data("with --no-scale every value must lie in (0, 1]".into()));
        }
        let record = PreprocessRecord::identity(work.dim());
        Ok((work, record))
    } else {
        prepare_training(&data, fit.margin, fit.jitter_ties, &mut rng)
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let (cube, record) = prepare(&a.data, &a.fit)?;
    let config = fit_config(a.c0, a.gamma, &a.fit);
    let model = Ensemble::fit_seeded(&cube, &config)?.with_preprocess(record)?;
    model_file::save(&model, &a.out)?;

    let split = model.marginal_tree_count();
    let (marginal, copula) = model.improvements().split_at(split);
    let total = model.training_log_density();
    println!("stage=marginal trees={} improvement={}", marginal.len(), marginal.iter().sum::<f64>());
    println!("stage=copula trees={} improvement={}", copula.len(), copula.iter().sum::<f64>());
    println!("training_mean_log_density={total}");
    println!(
        "training_mean_log_density_original_scale={}",
        total + model.preprocess().log_jacobian()
    );
    Ok(())
}

/// Running mean and variance of the finite scores.
#[derive(Default)]
struct Running {
    n: usize,
    mean: f64,
    m2: f64,
    outside: usize,
}

impl Running {
    fn push(&mut self, v: f64) {
        if !v.is_finite() {
            self.outside += 1;
            return;
        }
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn sd(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

pub fn density(a: DensityArgs) -> Result<()> {
    let model = model_file::load(&a.model)?;
    let d = model.dim();
    let mut reader = RowReader::open(&a.data)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "log_density")?;
    let mut stats = Running::default();
    loop {
        let mut chunk = Vec::with_capacity(DENSITY_CHUNK * d);
        for row in reader.by_ref().take(DENSITY_CHUNK) {
            let row = row?;
            if row.len() != d {
                return Err(Error::Data(format!("data has {} columns, model has {d}", row.len())));
            }
            chunk.extend(row);
        }
        if chunk.is_empty() {
            break;
        }
        let logs = model.log_density_batch(&Points::new(d, chunk)?, a.original_scale)?;
        for l in logs {
            writeln!(out, "{l}")?;
            stats.push(l);
        }
    }
    out.flush()?;
    if stats.n + stats.outside == 0 {
        return Err(Error::Data(format!("{} has no data rows", a.data.display())));
    }
    let mean = if stats.n == 0 { f64::NEG_INFINITY } else { stats.mean };
    eprintln!(
        "score: {mean} ± {} (scored={} outside={})",
        stats.sd(),
        stats.n,
        stats.outside
    );
    Ok(())
}

pub fn sample(a: SampleArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::InvalidArgument("--n must be at least 1".into()));
    }
    let model = model_file::load(&a.model)?;
    let mut rng = substream(a.seed, Substream::Sampling);
    let draws = model.sample(a.n, &mut rng, a.original_scale);
    csv_io::write_rows(output(a.out.as_deref())?, Some(&csv_io::default_header(model.dim())), &draws)
}

pub fn importance(a: ImportanceArgs) -> Result<()> {
    let model = model_file::load(&a.model)?;
    let total: f64 = model.importance().iter().sum();
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "dimension,importance,share")?;
    for (j, &v) in model.importance().iter().enumerate() {
        let share = if total != 0.0 { v / total } else { 0.0 };
        writeln!(out, "{},{v},{share}", j + 1)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_grid(text: &str, flag: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("{flag}: {s:?} is not a number")))
        })
        .collect()
}

pub fn cv(a: CvArgs) -> Result<()> {
    let c0_grid = parse_grid(&a.c0_grid, "--c0-grid")?;
    let gamma_grid = parse_grid(&a.gamma_grid, "--gamma-grid")?;
    let (cube, _) = prepare(&a.data, &a.fit)?;
    let config = fit_config(c0_grid[0], gamma_grid[0], &a.fit);
    let mut rng = substream(a.fit.seed, Substream::CvShuffle);
    let outcome = cross_validate(&cube, &c0_grid, &gamma_grid, a.folds, &config, a.schedule_scale, &mut rng)?;

    let mut table = String::from("c0,gamma,mean_score");
    for f in 1..=a.folds {
        table.push_str(&format!(",fold_{f}"));
    }
    table.push('\n');
    for row in &outcome.table {
        table.push_str(&format!("{},{},{}", row.c0, row.gamma, row.mean_score));
        for s in &row.fold_scores {
            table.push_str(&format!(",{s}"));
        }
        table.push('\n');
    }
    println!("c0={} gamma={} score={}", outcome.c0, outcome.gamma, outcome.score);
    print!("{table}");
    if let Some(path) = &a.out {
        std::fs::write(path, &table)?;
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let scenario: Scenario = a.scenario.parse()?;
    let spec = ScenarioSpec {
        scenario,
        n: a.n.unwrap_or(scenario.default_n()),
    };
    let mut rng = substream(a.seed, Substream::Scenario);
    let (points, logs) = spec.generate(&mut rng);
    csv_io::write_points(&a.out, Some(&csv_io::default_header(points.dim())), &points)?;
    let truth_path = a.truth.unwrap_or_else(|| a.out.with_extension("truth.csv"));
    let mut out = output(Some(&truth_path))?;
    writeln!(out, "log_density")?;
    for l in logs {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = model_file::load(&a.model)?;
    let scenario: Scenario = a.scenario.parse()?;
    let mut rng = substream(a.seed, Substream::MonteCarlo);
    let est = estimate_kl(&scenario, &model, a.mc, &mut rng)?;
    if est.excluded > 0 {
        eprintln!(
            "warning: model density is zero at {} of {} draws; they are left out",
            est.excluded, a.mc
        );
    }
    println!(
        "kl={} se={} used={} excluded={}",
        est.kl, est.std_error, est.used, est.excluded
    );
    Ok(())
}
