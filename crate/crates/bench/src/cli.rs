//! `renet` command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use renet_core::config::{validate_config, BenchConfig};
use renet_core::cv::{build_grid, run_cv_with, CvOptions};
use renet_core::preprocess::PreprocessMode;
use renet_core::synthetic::{dump_scenario, sample_scenario, ScenarioSpec, DESK_P_CAP, DESK_S1_N};
use renet_core::{RenetError, Result};

use crate::bench::{run_benchmark, write_rows, write_timings, Source};
use crate::estimator::{FitContext, Registry};
use crate::report::aggregate_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "renet", version, about = "Relaxed Elastic Net benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every model over every dataset, seed and outer fold.
    Bench(Common),
    /// Fit one model on a whole dataset and print its coefficients.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "renet")]
        model: String,
    },
    /// Write synthetic scenarios as CSV plus JSON metadata.
    Gen(Common),
    /// Dump the mean and standard-error CV grids.
    CvSurface(Common),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// CSV dataset path; repeatable.
    #[arg(long)]
    pub data: Vec<String>,
    /// Scenario name S1 to S10; repeatable.
    #[arg(long)]
    pub scenario: Vec<String>,
    #[arg(long)]
    pub target_col: Option<String>,
    /// Comma-separated model names; an empty string selects none.
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub theta_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub one_se_multiplier: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
}

impl Common {
    pub fn resolve(&self) -> Result<BenchConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| RenetError::Config(format!("{}: {e}", p.display())))?;
                validate_config(&text)?
            }
            None => BenchConfig::default(),
        };
        if !self.data.is_empty() || !self.scenario.is_empty() {
            cfg.datasets = self.data.iter().chain(&self.scenario).cloned().collect();
        }
        if let Some(t) = &self.target_col {
            cfg.target_col = Some(t.clone());
        }
        if let Some(m) = &self.models {
            cfg.models = m.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(k) = self.folds {
            cfg.folds = k;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(t) = &self.theta_grid {
            cfg.theta_grid = t.clone();
        }
        if let Some(m) = self.one_se_multiplier {
            cfg.se_multiplier = m;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.display().to_string();
        }
        if let Some(p) = &self.preset {
            cfg.preset = Some(p.clone());
        }
        for s in &self.scenario {
            if ScenarioSpec::preset(s).is_none() {
                return Err(RenetError::Config(format!("unknown scenario `{s}`")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &RenetError) -> i32 {
    match e {
        RenetError::Config(_) | RenetError::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

pub fn report_header(cfg: &BenchConfig) -> String {
    let mut h = format!(
        "models: {}; seeds: {:?}; folds: {}; alpha: {}; theta grid: {:?}; 1-SE multiplier: {}",
        cfg.models.join(","),
        cfg.seeds,
        cfg.folds,
        cfg.alpha,
        cfg.theta_grid,
        cfg.se_multiplier
    );
    if cfg.preset.as_deref() == Some("desk") {
        h.push_str(&format!(
            "\ndesk preset: S1 at n = {DESK_S1_N}; S8 and S10 capped at p = {DESK_P_CAP}"
        ));
    }
    h
}

/// Runs the benchmark and writes `rows.csv`, `timings.csv`,
/// `summary.csv` and `summary.txt` into `cfg.output_dir`.
pub fn bench(cfg: &BenchConfig) -> Result<i32> {
    let reg = Registry::builtin();
    let outcome = run_benchmark(cfg, &reg)?;
    let dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(dir)?;
    write_rows(&dir.join("rows.csv"), &outcome.rows)?;
    write_timings(&dir.join("timings.csv"), &outcome.rows)?;
    aggregate_report(&outcome.rows).write(dir, &report_header(cfg))?;
    for r in outcome.rows.iter().filter(|r| r.is_error()) {
        log::error!("{} {} seed {}: {}", r.dataset, r.model, r.seed, r.status);
    }
    Ok(if outcome.dataset_errors > 0 { EXIT_DATA } else { EXIT_OK })
}

fn single_dataset(cfg: &BenchConfig) -> Result<(String, Source, u64)> {
    let name = match cfg.datasets.as_slice() {
        [one] => one.clone(),
        _ => return Err(RenetError::Config("expected exactly one --data or --scenario".into())),
    };
    let desk = cfg.preset.as_deref() == Some("desk");
    let seed = *cfg.seeds.first().ok_or_else(|| RenetError::Config("no seed given".into()))?;
    let src = Source::resolve(&name, desk);
    Ok((name, src, seed))
}

fn fit(cfg: &BenchConfig, model: &str) -> Result<i32> {
    let (_, src, seed) = single_dataset(cfg)?;
    let reg = Registry::builtin();
    let est = reg.get(model)?;
    let d = src.load(cfg.target_col.as_deref(), seed)?;
    let f = est.fit(&d, &FitContext::from_config(cfg, seed))?;
    let (beta, b0) = f.model.original_coefficients();
    println!("model\t{model}");
    match f.theta {
        Some(t) => println!("theta\t{t}"),
        None => println!("theta\t-"),
    }
    println!("intercept\t{b0}");
    for (name, b) in d.feature_names.iter().zip(&beta) {
        if *b != 0.0 {
            println!("{name}\t{b}");
        }
    }
    Ok(EXIT_OK)
}

fn generate(cfg: &BenchConfig) -> Result<i32> {
    if cfg.datasets.is_empty() {
        return Err(RenetError::Config("gen needs at least one --scenario".into()));
    }
    let dir = Path::new(&cfg.output_dir);
    let desk = cfg.preset.as_deref() == Some("desk");
    for name in &cfg.datasets {
        let Source::Scenario(spec) = Source::resolve(name, desk) else {
            return Err(RenetError::Config(format!("`{name}` is not a scenario")));
        };
        for &seed in &cfg.seeds {
            dump_scenario(&sample_scenario(&spec, seed)?, dir, &format!("{name}_seed{seed}"))?;
        }
    }
    Ok(EXIT_OK)
}

fn write_grid(path: &Path, lambdas: &[f64], thetas: &[f64], v: &nalgebra::DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = std::iter::once("lambda".to_string()).chain(thetas.iter().map(|t| t.to_string())).collect();
    w.write_record(&header)?;
    for (i, l) in lambdas.iter().enumerate() {
        let rec: Vec<String> = std::iter::once(l.to_string()).chain(v.row(i).iter().map(|x| x.to_string())).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn cv_surface(cfg: &BenchConfig) -> Result<i32> {
    let (_, src, seed) = single_dataset(cfg)?;
    let d = src.load(cfg.target_col.as_deref(), seed)?;
    let mode = PreprocessMode::Standardize {
        k_inner: cfg.inner_folds,
        seed,
    };
    let grid = build_grid(&d, cfg.alpha, cfg.theta_grid.clone(), cfg.n_lambda, mode)?;
    let opts = CvOptions {
        folds: cfg.folds.min(d.n()),
        seed,
        mode,
        solver: cfg.solver,
    };
    let s = run_cv_with(&d, &grid, &opts)?;
    let dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(dir)?;
    write_grid(&dir.join("cv_mean.csv"), &s.lambda_grid, &s.theta_grid, &s.mean_mse)?;
    write_grid(&dir.join("cv_se.csv"), &s.lambda_grid, &s.theta_grid, &s.se_mse)?;
    Ok(EXIT_OK)
}

/// Executes a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let common = match &cli.command {
        Command::Bench(c) | Command::Gen(c) | Command::CvSurface(c) => c,
        Command::Fit { common, .. } => common,
    };
    let cfg = match common.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match &cli.command {
        Command::Bench(_) => bench(&cfg),
        Command::Fit { model, .. } => fit(&cfg, model),
        Command::Gen(_) => generate(&cfg),
        Command::CvSurface(_) => cv_surface(&cfg),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
