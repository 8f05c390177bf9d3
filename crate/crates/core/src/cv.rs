//! Joint K-fold cross-validation over the (λ, θ) grid, CV-min and 1-SE
//! selection, pooled standard errors and the final full-data refit.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RenetError, Result};
use crate::model::{linear_predict, mean_squared_error, r_squared, CoefVector, Dataset, FitMetrics};
use crate::preprocess::{shuffled_folds, PreprocessMode, Preprocessor, DEFAULT_INNER_FOLDS};
use crate::relax::{theta_floor, NormalEquations, RelaxProblem, RelaxedFit};
use crate::solver::{
    default_min_ratio, enet_path, enet_path_prefix, lambda_grid, lambda_max, validate_lambda_grid,
    EnetPath, SolverConfig,
};

/// `{0.0, 0.1, …, 1.0}`.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

pub const DEFAULT_N_LAMBDA: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub alpha: f64,
}

impl GridSpec {
    pub fn new(lambda_grid: Vec<f64>, theta_grid: Vec<f64>, alpha: f64) -> Result<Self> {
        let g = GridSpec {
            lambda_grid,
            theta_grid,
            alpha,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        validate_lambda_grid(&self.lambda_grid)?;
        validate_theta_grid(&self.theta_grid)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(RenetError::InvalidArgument(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Same λ grid with θ fixed at 1.
    pub fn enet_only(&self) -> GridSpec {
        GridSpec {
            lambda_grid: self.lambda_grid.clone(),
            theta_grid: vec![1.0],
            alpha: self.alpha,
        }
    }
}

pub fn validate_theta_grid(theta_grid: &[f64]) -> Result<()> {
    if theta_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(RenetError::InvalidArgument(
            "theta grid entries must lie in [0, 1]".into(),
        ));
    }
    if theta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RenetError::InvalidArgument(
            "theta grid must be strictly increasing".into(),
        ));
    }
    if !theta_grid.contains(&1.0) {
        return Err(RenetError::InvalidArgument(
            "theta grid must contain 1.0".into(),
        ));
    }
    Ok(())
}

/// λ grid computed once on the full preprocessed dataset: `n_lambda`
/// log-spaced values from λ_max to λ_max·r.
pub fn build_grid(
    d: &Dataset,
    alpha: f64,
    theta_grid: Vec<f64>,
    n_lambda: usize,
    mode: PreprocessMode,
) -> Result<GridSpec> {
    let (std, _) = Preprocessor::fit(d, mode)?;
    let lmax = lambda_max(&std.x, &std.y, alpha)?;
    let lambdas = lambda_grid(lmax, n_lambda, default_min_ratio(std.n(), std.p()))?;
    GridSpec::new(lambdas, theta_grid, alpha)
}

/// Held-out MSE for every (λ, θ) cell and fold.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSurface {
    pub lambda_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub n_folds: usize,
    /// Flattened `[L × T × K]`, fold index fastest.
    pub mse: Vec<f64>,
    pub mean_mse: DMatrix<f64>,
    pub se_mse: DMatrix<f64>,
    /// Folds whose training split was degenerate (all their cells are +∞).
    pub flagged_folds: Vec<usize>,
}

impl CvSurface {
    pub fn n_lambda(&self) -> usize {
        self.lambda_grid.len()
    }

    pub fn n_theta(&self) -> usize {
        self.theta_grid.len()
    }

    pub fn fold_mse(&self, i: usize, j: usize, k: usize) -> f64 {
        self.mse[(i * self.n_theta() + j) * self.n_folds + k]
    }

    fn from_folds(
        lambda_grid: &[f64],
        theta_grid: &[f64],
        per_fold: Vec<Option<Vec<f64>>>,
    ) -> CvSurface {
        let (l, t, k) = (lambda_grid.len(), theta_grid.len(), per_fold.len());
        let mut mse = vec![f64::INFINITY; l * t * k];
        let mut flagged = Vec::new();
        for (f, cells) in per_fold.iter().enumerate() {
            match cells {
                Some(c) => {
                    for (cell, &v) in c.iter().enumerate() {
                        mse[cell * k + f] = v;
                    }
                }
                None => flagged.push(f),
            }
        }
        let mut mean_mse = DMatrix::zeros(l, t);
        let mut se_mse = DMatrix::zeros(l, t);
        for i in 0..l {
            for j in 0..t {
                let s = &mse[(i * t + j) * k..(i * t + j + 1) * k];
                if s.iter().any(|v| !v.is_finite()) {
                    mean_mse[(i, j)] = f64::INFINITY;
                    se_mse[(i, j)] = f64::INFINITY;
                } else {
                    let (m, se) = fold_mean_se(s);
                    mean_mse[(i, j)] = m;
                    se_mse[(i, j)] = se;
                }
            }
        }
        CvSurface {
            lambda_grid: lambda_grid.to_vec(),
            theta_grid: theta_grid.to_vec(),
            n_folds: k,
            mse,
            mean_mse,
            se_mse,
            flagged_folds: flagged,
        }
    }

    /// Smallest mean MSE within the θ = 1 column.
    pub fn enet_column_min(&self) -> Option<f64> {
        let j = self.theta_grid.iter().position(|&t| t == 1.0)?;
        Some(self.mean_mse.column(j).iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn global_min(&self) -> f64 {
        self.mean_mse.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The single-θ surface of column `j`, as if only `theta_grid[j]` had
    /// been cross-validated.
    pub fn theta_column(&self, j: usize) -> Result<CvSurface> {
        let (l, t, k) = (self.n_lambda(), self.n_theta(), self.n_folds);
        if j >= t {
            return Err(RenetError::InvalidArgument(format!("θ column {j} out of {t}")));
        }
        let mut mse = Vec::with_capacity(l * k);
        for i in 0..l {
            mse.extend_from_slice(&self.mse[(i * t + j) * k..(i * t + j + 1) * k]);
        }
        Ok(CvSurface {
            lambda_grid: self.lambda_grid.clone(),
            theta_grid: vec![self.theta_grid[j]],
            n_folds: k,
            mse,
            mean_mse: self.mean_mse.columns(j, 1).into_owned(),
            se_mse: self.se_mse.columns(j, 1).into_owned(),
            flagged_folds: self.flagged_folds.clone(),
        })
    }
}

/// Mean and `sd/√K` over fold scores.
fn fold_mean_se(scores: &[f64]) -> (f64, f64) {
    let k = scores.len() as f64;
    let m = scores.iter().sum::<f64>() / k;
    if scores.len() < 2 {
        return (m, 0.0);
    }
    let var = scores.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

/// Grand mean and pooled standard error over a seeds × folds score matrix.
///
/// `se² = mean_s(var_s) / (S·K) + var(seed means) / S`, where `var_s` is the
/// sample variance across folds of seed `s`; the second term vanishes when
/// `S = 1`.
pub fn pooled_se(scores: &[Vec<f64>]) -> Result<(f64, f64)> {
    let s = scores.len();
    if s == 0 {
        return Err(RenetError::InvalidArgument("no seeds".into()));
    }
    let k = scores[0].len();
    if k < 2 || scores.iter().any(|r| r.len() != k) {
        return Err(RenetError::InvalidArgument(
            "pooled_se needs a rectangular matrix with at least two folds".into(),
        ));
    }
    let (sf, kf) = (s as f64, k as f64);
    let seed_means: Vec<f64> = scores.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let grand = seed_means.iter().sum::<f64>() / sf;
    let within = scores
        .iter()
        .zip(&seed_means)
        .map(|(r, m)| r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (kf - 1.0))
        .sum::<f64>()
        / sf;
    let between = if s > 1 {
        seed_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (sf - 1.0)
    } else {
        0.0
    };
    Ok((grand, (within / (sf * kf) + between / sf).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    CvMin,
    OneSe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub lambda_star: f64,
    pub theta_star: f64,
    pub lambda_index: usize,
    pub theta_index: usize,
    pub rule: SelectionRule,
}

/// Cell minimizing the mean CV error, ties broken toward larger λ and then
/// larger θ.
pub fn select_cv_min(s: &CvSurface) -> Result<Selection> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..s.n_lambda() {
        for j in (0..s.n_theta()).rev() {
            let v = s.mean_mse[(i, j)];
            if !v.is_finite() {
                continue;
            }
            if best.is_none_or(|(_, _, b)| v < b) {
                best = Some((i, j, v));
            }
        }
    }
    let (i, j, _) = best.ok_or_else(|| RenetError::Selection("every CV cell is infinite".into()))?;
    Ok(Selection {
        lambda_star: s.lambda_grid[i],
        theta_star: s.theta_grid[j],
        lambda_index: i,
        theta_index: j,
        rule: SelectionRule::CvMin,
    })
}

/// Largest λ with a cell inside `min + multiplier·se(min)`; among that
/// row's cells inside the band, the lowest mean error (ties → smaller θ).
pub fn select_one_se(s: &CvSurface, multiplier: f64) -> Result<Selection> {
    let min = select_cv_min(s)?;
    let m = s.mean_mse[(min.lambda_index, min.theta_index)];
    let band = m + multiplier * s.se_mse[(min.lambda_index, min.theta_index)];
    for i in 0..s.n_lambda() {
        let mut pick: Option<(usize, f64)> = None;
        for j in 0..s.n_theta() {
            let v = s.mean_mse[(i, j)];
            if v.is_finite() && v <= band && pick.is_none_or(|(_, b)| v < b) {
                pick = Some((j, v));
            }
        }
        if let Some((j, _)) = pick {
            return Ok(Selection {
                lambda_star: s.lambda_grid[i],
                theta_star: s.theta_grid[j],
                lambda_index: i,
                theta_index: j,
                rule: SelectionRule::OneSe,
            });
        }
    }
    Err(RenetError::Invariant("1-SE band excludes the minimum".into()))
}

pub fn select(s: &CvSurface, rule: SelectionRule, multiplier: f64) -> Result<Selection> {
    match rule {
        SelectionRule::CvMin => select_cv_min(s),
        SelectionRule::OneSe => select_one_se(s, multiplier),
    }
}

/// Options shared by the cross-validation entry points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub mode: PreprocessMode,
    pub solver: SolverConfig,
}

impl CvOptions {
    /// Standardizing pipeline with the default inner encoding folds.
    pub fn new(folds: usize, seed: u64, solver: SolverConfig) -> Self {
        CvOptions {
            folds,
            seed,
            mode: PreprocessMode::Standardize {
                k_inner: DEFAULT_INNER_FOLDS,
                seed,
            },
            solver,
        }
    }
}

struct FoldData {
    x_train: DMatrix<f64>,
    y_train: DVector<f64>,
    x_test: DMatrix<f64>,
    y_test_raw: DVector<f64>,
    y_mean: f64,
}

fn is_constant(y: &DVector<f64>) -> bool {
    y.iter().all(|&v| v == y[0])
}

/// `None` when the training split is degenerate.
fn prepare_fold(d: &Dataset, train: &[usize], test: &[usize], mode: PreprocessMode) -> Result<Option<FoldData>> {
    let tr = d.select_rows(train);
    if is_constant(&tr.y) {
        return Ok(None);
    }
    let (std, pre) = match Preprocessor::fit(&tr, mode) {
        Ok(v) => v,
        Err(RenetError::Degenerate(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let te = d.select_rows(test);
    let te_std = pre.transform(&te)?;
    Ok(Some(FoldData {
        x_train: std.x,
        y_train: std.y,
        x_test: te_std.x,
        y_test_raw: te.y,
        y_mean: pre.y_mean(),
    }))
}

fn fold_splits(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > n {
        return Err(RenetError::InvalidArgument(format!(
            "fold count {k} must lie in [2, {n}]"
        )));
    }
    let folds = shuffled_folds(n, k, seed);
    Ok((0..k)
        .map(|f| {
            let train: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| folds[g].iter().copied())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            (train, folds[f].clone())
        })
        .collect())
}

fn predict_mse(fd: &FoldData, coef: &CoefVector) -> f64 {
    let pred = linear_predict(
        &fd.x_test,
        &coef.support,
        coef.values.as_slice(),
        fd.y_mean + coef.intercept,
    );
    mean_squared_error(&fd.y_test_raw, &pred)
}

/// Relaxed fits for every (λ, θ) cell of a solved path.
///
/// The restricted design and OLS solution are reused for consecutive
/// λ values that share an active set, and θ values mapping to the same
/// effective relaxation are solved once.
pub fn relax_path<F>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    path: &EnetPath,
    theta_grid: &[f64],
    cfg: &SolverConfig,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, usize, &RelaxedFit),
{
    let floor = theta_floor(x.nrows(), x.ncols());
    let mut cached: Option<(Vec<usize>, DMatrix<f64>, Option<NormalEquations>)> = None;
    for i in 0..path.len() {
        let active = &path.active_sets[i];
        if cached.as_ref().is_none_or(|(a, _, _)| a != active) {
            cached = Some((active.clone(), x.select_columns(active), None));
        }
        let (_, x_a, normal_cache) = cached.as_mut().expect("cache populated");
        let beta_en = path.active_coef(i);
        let prob = RelaxProblem::new(x_a, y, &beta_en, path.lambda_grid[i], path.alpha, cfg)?;
        if let Some(ne) = normal_cache.take() {
            prob.set_normal(ne);
        }
        let mut by_eff: HashMap<u64, RelaxedFit> = HashMap::new();
        for (j, &theta) in theta_grid.iter().enumerate() {
            let eff = crate::relax::effective_theta(theta, active.len(), x.nrows(), floor);
            let fit = match by_eff.get(&eff.to_bits()) {
                Some(f) => {
                    let mut f = f.clone();
                    f.theta_requested = theta;
                    f
                }
                None => {
                    let f = prob.solve_requested(theta, floor)?;
                    by_eff.insert(eff.to_bits(), f.clone());
                    f
                }
            };
            visit(i, j, &fit);
        }
        *normal_cache = prob.take_normal();
    }
    Ok(())
}

fn renet_fold(fd: &FoldData, grid: &GridSpec, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let path = enet_path(&fd.x_train, &fd.y_train, grid.alpha, &grid.lambda_grid, cfg)?;
    let t = grid.theta_grid.len();
    let mut cells = vec![f64::INFINITY; path.len() * t];
    relax_path(&fd.x_train, &fd.y_train, &path, &grid.theta_grid, cfg, |i, j, fit| {
        cells[i * t + j] = predict_mse(fd, &fit.coef);
    })?;
    Ok(cells)
}

fn run_folds<F>(d: &Dataset, opts: &CvOptions, per_fold: F) -> Result<Vec<Option<Vec<f64>>>>
where
    F: Fn(&FoldData) -> Result<Vec<f64>> + Sync,
{
    let splits = fold_splits(d.n(), opts.folds, opts.seed)?;
    splits
        .par_iter()
        .map(|(train, test)| match prepare_fold(d, train, test, opts.mode)? {
            Some(fd) => per_fold(&fd).map(Some),
            None => Ok(None),
        })
        .collect()
}

/// Joint cross-validation over the (λ, θ) grid with per-fold
/// preprocessing.
pub fn run_cv_with(d: &Dataset, grid: &GridSpec, opts: &CvOptions) -> Result<CvSurface> {
    grid.validate()?;
    let per_fold = run_folds(d, opts, |fd| renet_fold(fd, grid, &opts.solver))?;
    Ok(CvSurface::from_folds(&grid.lambda_grid, &grid.theta_grid, per_fold))
}

/// [`run_cv_with`] using the standardizing pipeline.
pub fn run_cv(d: &Dataset, grid: &GridSpec, k: usize, seed: u64, cfg: &SolverConfig) -> Result<CvSurface> {
    run_cv_with(d, grid, &CvOptions::new(k, seed, *cfg))
}

/// Plain Elastic Net CV surface (single θ = 1 column) computed straight
/// from the path, without the relaxation stage.
pub fn enet_cv_surface(d: &Dataset, lambda_grid: &[f64], alpha: f64, opts: &CvOptions) -> Result<CvSurface> {
    validate_lambda_grid(lambda_grid)?;
    let per_fold = run_folds(d, opts, |fd| {
        let path = enet_path(&fd.x_train, &fd.y_train, alpha, lambda_grid, &opts.solver)?;
        Ok((0..path.len()).map(|i| predict_mse(fd, &path.active_coef(i))).collect())
    })?;
    Ok(CvSurface::from_folds(lambda_grid, &[1.0], per_fold))
}

/// Preprocessing plus coefficients on the retained standardized columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub preprocessor: Preprocessor,
    /// Support indexes the retained columns; the intercept includes the
    /// training response mean.
    pub coef: CoefVector,
}

impl FittedModel {
    pub fn predict(&self, d: &Dataset) -> Result<DVector<f64>> {
        let t = self.preprocessor.transform(d)?;
        Ok(self.coef.predict(&t.x))
    }

    pub fn n_nonzero(&self) -> usize {
        self.coef.n_nonzero()
    }

    /// One coefficient per input column (after target encoding) and the
    /// intercept, on the input scale.
    pub fn original_coefficients(&self) -> (Vec<f64>, f64) {
        let params = &self.preprocessor.params;
        let dense = self.coef.to_dense();
        let (beta, b0) = params.to_original(dense.as_slice());
        (beta, b0 + self.coef.intercept - params.y_mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalFit {
    pub model: FittedModel,
    pub relaxed: RelaxedFit,
    pub metrics: FitMetrics,
    /// Every path point and the relaxation converged.
    pub converged: bool,
}

/// Full-data path up to λ*, relaxation at the effective θ with the floor
/// computed from the full `n` and `p`.
pub fn fit_final_with(
    d: &Dataset,
    sel: &Selection,
    grid: &GridSpec,
    mode: PreprocessMode,
    cfg: &SolverConfig,
) -> Result<FinalFit> {
    let start = Instant::now();
    grid.validate()?;
    if sel.lambda_index >= grid.lambda_grid.len() || grid.lambda_grid[sel.lambda_index] != sel.lambda_star {
        return Err(RenetError::InvalidArgument(
            "selection does not belong to this grid".into(),
        ));
    }
    let (std, pre) = Preprocessor::fit(d, mode)?;
    let path = enet_path_prefix(&std.x, &std.y, grid.alpha, &grid.lambda_grid, sel.lambda_index + 1, cfg)?;
    let i = sel.lambda_index;
    let active = &path.active_sets[i];
    let x_a = std.x.select_columns(active);
    let beta_en = path.active_coef(i);
    let floor = theta_floor(std.n(), std.p());
    let prob = RelaxProblem::new(&x_a, &std.y, &beta_en, sel.lambda_star, grid.alpha, cfg)?;
    let relaxed = prob.solve_requested(sel.theta_star, floor)?;

    let mut coef = relaxed.coef.clone();
    coef.intercept += pre.y_mean();
    let model = FittedModel {
        preprocessor: pre,
        coef,
    };
    let fitted = model.coef.predict(&std.x);
    let r2 = r_squared(&d.y, &fitted).unwrap_or(f64::NAN);
    let metrics = FitMetrics {
        r2,
        n_nonzero: model.n_nonzero(),
        theta_selected: relaxed.theta_effective,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let converged = relaxed.converged && path.converged.iter().all(|&c| c);
    Ok(FinalFit {
        model,
        relaxed,
        metrics,
        converged,
    })
}

pub fn fit_final(d: &Dataset, sel: &Selection, grid: &GridSpec, cfg: &SolverConfig) -> Result<FinalFit> {
    fit_final_with(
        d,
        sel,
        grid,
        PreprocessMode::Standardize {
            k_inner: DEFAULT_INNER_FOLDS,
            seed: 0,
        },
        cfg,
    )
}

/// Everything needed to run the full cross-validated estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RenetOptions {
    pub alpha: f64,
    pub theta_grid: Vec<f64>,
    pub n_lambda: usize,
    pub folds: usize,
    pub seed: u64,
    pub rule: SelectionRule,
    pub se_multiplier: f64,
    pub k_inner: usize,
    pub solver: SolverConfig,
}

impl Default for RenetOptions {
    fn default() -> Self {
        RenetOptions {
            alpha: 0.95,
            theta_grid: default_theta_grid(),
            n_lambda: DEFAULT_N_LAMBDA,
            folds: 10,
            seed: 42,
            rule: SelectionRule::CvMin,
            se_multiplier: 1.0,
            k_inner: DEFAULT_INNER_FOLDS,
            solver: SolverConfig::default(),
        }
    }
}

impl RenetOptions {
    pub fn mode(&self) -> PreprocessMode {
        PreprocessMode::Standardize {
            k_inner: self.k_inner,
            seed: self.seed,
        }
    }

    pub fn cv_options(&self) -> CvOptions {
        CvOptions {
            folds: self.folds,
            seed: self.seed,
            mode: self.mode(),
            solver: self.solver,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvFit {
    pub grid: GridSpec,
    pub surface: CvSurface,
    pub selection: Selection,
    pub fit: FinalFit,
}

/// Grid construction, joint CV, selection and final refit in one call.
/// A θ grid of `{1}` gives the plain cross-validated Elastic Net.
pub fn fit_renet_cv(d: &Dataset, opts: &RenetOptions) -> Result<CvFit> {
    let start = Instant::now();
    let grid = build_grid(d, opts.alpha, opts.theta_grid.clone(), opts.n_lambda, opts.mode())?;
    let folds = opts.folds.min(d.n());
    let cv = CvOptions {
        folds,
        ..opts.cv_options()
    };
    let surface = run_cv_with(d, &grid, &cv)?;
    let selection = select(&surface, opts.rule, opts.se_multiplier)?;
    let mut fit = fit_final_with(d, &selection, &grid, opts.mode(), &opts.solver)?;
    fit.metrics.wall_time_s = start.elapsed().as_secs_f64();
    Ok(CvFit {
        grid,
        surface,
        selection,
        fit,
    })
}
