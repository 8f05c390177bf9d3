//! Outer-fold benchmark over datasets, seeds and models.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use renet_core::config::BenchConfig;
use renet_core::io::read_csv;
use renet_core::model::r_squared;
use renet_core::preprocess::shuffled_folds;
use renet_core::synthetic::{sample_scenario, ScenarioSpec};
use renet_core::{Dataset, RenetError, Result};

use crate::estimator::{FitContext, Registry};

pub const STATUS_OK: &str = "ok";
pub const STATUS_NOT_CONVERGED: &str = "not_converged";

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Csv(PathBuf),
    Scenario(ScenarioSpec),
}

impl Source {
    /// Scenario names resolve to presets (shrunk under the desk preset);
    /// anything else is a CSV path.
    pub fn resolve(name: &str, desk: bool) -> Source {
        match ScenarioSpec::preset(name) {
            Some(s) if desk => Source::Scenario(s.desk()),
            Some(s) => Source::Scenario(s),
            None => Source::Csv(PathBuf::from(name)),
        }
    }

    /// Synthetic data is redrawn per seed; CSV data is fixed.
    pub fn load(&self, target_col: Option<&str>, seed: u64) -> Result<Dataset> {
        match self {
            Source::Csv(p) => read_csv(p, target_col),
            Source::Scenario(s) => Ok(sample_scenario(s, seed)?.data),
        }
    }
}

/// One (dataset, model, seed, fold) result. Dataset-level failures carry
/// no model or fold.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub fold: Option<usize>,
    pub r2: Option<f64>,
    pub n_coef: Option<usize>,
    pub theta: Option<f64>,
    pub time_s: Option<f64>,
    pub status: String,
}

impl BenchRow {
    fn error(dataset: &str, model: &str, seed: u64, fold: Option<usize>, e: &RenetError) -> Self {
        BenchRow {
            dataset: dataset.to_string(),
            model: model.to_string(),
            seed,
            fold,
            r2: None,
            n_coef: None,
            theta: None,
            time_s: None,
            status: format!("error: {e}"),
        }
    }

    pub fn is_error(&self) -> bool {
        self.status.starts_with("error")
    }

    fn key(&self) -> (&str, &str, u64, Option<usize>) {
        (&self.dataset, &self.model, self.seed, self.fold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub dataset_errors: usize,
}

/// Worker count from `RENET_THREADS`, defaulting to the available
/// parallelism.
pub fn worker_threads() -> usize {
    std::env::var("RENET_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

struct Unit<'a> {
    dataset: &'a str,
    data: &'a Dataset,
    seed: u64,
    fold: usize,
    train: Vec<usize>,
    test: &'a [usize],
    model: &'a str,
}

fn run_unit(u: &Unit, reg: &Registry, cfg: &BenchConfig) -> BenchRow {
    let est = match reg.get(u.model) {
        Ok(e) => e,
        Err(e) => return BenchRow::error(u.dataset, u.model, u.seed, Some(u.fold), &e),
    };
    let train = u.data.select_rows(&u.train);
    let test = u.data.select_rows(u.test);
    let ctx = FitContext::from_config(cfg, u.seed);
    let start = Instant::now();
    let fit = est.fit(&train, &ctx);
    let time_s = start.elapsed().as_secs_f64();
    let scored = fit.and_then(|f| {
        let pred = f.predict(&test)?;
        Ok((f, r_squared(&test.y, &pred)?))
    });
    match scored {
        Ok((f, r2)) => BenchRow {
            dataset: u.dataset.to_string(),
            model: u.model.to_string(),
            seed: u.seed,
            fold: Some(u.fold),
            r2: Some(r2),
            n_coef: Some(f.n_coef()),
            theta: f.theta,
            time_s: Some(time_s),
            status: if f.converged { STATUS_OK } else { STATUS_NOT_CONVERGED }.to_string(),
        },
        Err(e) => BenchRow::error(u.dataset, u.model, u.seed, Some(u.fold), &e),
    }
}

/// Runs every requested model on every outer fold of every
/// (dataset, seed). Rows come back sorted by (dataset, model, seed, fold).
pub fn run_benchmark(cfg: &BenchConfig, reg: &Registry) -> Result<BenchOutcome> {
    cfg.validate()?;
    for m in &cfg.models {
        reg.get(m)?;
    }
    let desk = cfg.preset.as_deref() == Some("desk");
    let mut rows = Vec::new();
    let mut loaded = Vec::new();
    for name in &cfg.datasets {
        let src = Source::resolve(name, desk);
        for &seed in &cfg.seeds {
            match src.load(cfg.target_col.as_deref(), seed) {
                Ok(d) if d.n() >= cfg.folds => {
                    let folds = shuffled_folds(d.n(), cfg.folds, seed);
                    loaded.push((name.as_str(), seed, d, folds));
                }
                Ok(d) => rows.push(BenchRow::error(
                    name,
                    "",
                    seed,
                    None,
                    &RenetError::TooFewRows {
                        got: d.n(),
                        min: cfg.folds,
                    },
                )),
                Err(e) => rows.push(BenchRow::error(name, "", seed, None, &e)),
            }
        }
    }

    let mut units = Vec::new();
    for (name, seed, d, folds) in &loaded {
        for (f, test) in folds.iter().enumerate() {
            let mut in_test = vec![false; d.n()];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..d.n()).filter(|&i| !in_test[i]).collect();
            for m in &cfg.models {
                units.push(Unit {
                    dataset: name,
                    data: d,
                    seed: *seed,
                    fold: f,
                    train: train.clone(),
                    test,
                    model: m,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| RenetError::Config(e.to_string()))?;
    let scored: Vec<BenchRow> = pool.install(|| units.par_iter().map(|u| run_unit(u, reg, cfg)).collect());
    rows.extend(scored);
    rows.sort_by(|a, b| a.key().cmp(&b.key()));

    let mut failed: Vec<&str> = rows.iter().filter(|r| r.is_error()).map(|r| r.dataset.as_str()).collect();
    failed.dedup();
    Ok(BenchOutcome {
        dataset_errors: failed.len(),
        rows,
    })
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// `rows.csv` without wall-clock columns, so reruns are byte-identical.
pub fn write_rows(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "model", "seed", "fold", "r2", "n_coef", "theta", "status"])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.model.clone(),
            r.seed.to_string(),
            opt(&r.fold),
            opt(&r.r2),
            opt(&r.n_coef),
            opt(&r.theta),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fit times per row.
pub fn write_timings(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "model", "seed", "fold", "time_s"])?;
    for r in rows.iter().filter(|r| r.time_s.is_some()) {
        w.write_record([
            r.dataset.clone(),
            r.model.clone(),
            r.seed.to_string(),
            opt(&r.fold),
            opt(&r.time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}
