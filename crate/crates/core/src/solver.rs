//! Cyclic coordinate descent for the Elastic Net objective
//!
//! `(1/2n)‖y − Xβ‖² + λ(α‖β‖₁ + (1−α)/2 ‖β‖²)`
//!
//! on centered, standardized inputs (no intercept is fitted), together with
//! warm-started regularization paths and a KKT residual checker.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RenetError, Result};
use crate::linalg::{dot, gram_needs_jitter, spd_solve_with_jitter};
use crate::model::{CoefVector, Hyperparams};
use crate::preprocess::col;

/// Coordinate visiting order within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    #[default]
    Cyclic,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Convergence threshold on the largest coordinate update, relative to
    /// `max(1, ‖β‖∞)`.
    pub tol: f64,
    /// Maximum number of coordinate sweeps.
    pub max_iter: usize,
    /// Ridge jitter for unpenalized (λ = 0) solves on ill-conditioned data.
    pub min_ridge: f64,
    #[serde(skip)]
    pub order: SweepOrder,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            max_iter: 10_000,
            min_ridge: 1e-8,
            order: SweepOrder::Cyclic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(RenetError::InvalidArgument(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iter < 1 {
            return Err(RenetError::InvalidArgument("max_iter must be >= 1".into()));
        }
        if !(self.min_ridge >= 0.0) {
            return Err(RenetError::InvalidArgument(format!(
                "min_ridge must be >= 0, got {}",
                self.min_ridge
            )));
        }
        Ok(())
    }
}

/// `sign(z)·max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn max_abs_corr(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    (0..x.ncols())
        .map(|j| dot(col(x, j), y.as_slice()).abs())
        .fold(0.0, f64::max)
}

/// Smallest λ at which the Elastic Net solution is identically zero:
/// `max_j |x_jᵀy| / (n·α)`.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<f64> {
    if x.nrows() != y.len() {
        return Err(RenetError::DimensionMismatch(format!(
            "x has {} rows, y has {}",
            x.nrows(),
            y.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(RenetError::InvalidArgument(format!(
            "lambda_max needs alpha in (0, 1], got {alpha}"
        )));
    }
    Ok(max_abs_corr(x, y) / (x.nrows() as f64 * alpha))
}

/// Ratio `λ_min / λ_max` of the default grid.
pub fn default_min_ratio(n: usize, p: usize) -> f64 {
    if n > p {
        1e-3
    } else {
        1e-2
    }
}

/// Log-spaced, strictly decreasing grid from `lambda_max` down to
/// `lambda_max · min_ratio`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(RenetError::Degenerate(format!(
            "lambda_max must be positive and finite, got {lambda_max}"
        )));
    }
    if n_lambda == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(RenetError::InvalidArgument(format!(
            "invalid grid request: n_lambda = {n_lambda}, min_ratio = {min_ratio}"
        )));
    }
    if n_lambda == 1 {
        return Ok(vec![lambda_max]);
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * min_ratio).ln());
    let step = (hi - lo) / (n_lambda - 1) as f64;
    let mut grid: Vec<f64> = (0..n_lambda).map(|i| (hi - step * i as f64).exp()).collect();
    grid[0] = lambda_max;
    Ok(grid)
}

/// Value of the Elastic Net objective at a dense `beta`.
pub fn enet_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &[f64],
    lambda: f64,
    alpha: f64,
) -> f64 {
    let n = x.nrows() as f64;
    let r = y - x * DVector::from_column_slice(beta);
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    r.norm_squared() / (2.0 * n) + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
}

/// Coordinate-descent state for one design and response.
///
/// Holds the coefficients and the residual `y − Xβ`, which is updated
/// incrementally after every coordinate move.
pub struct CdState<'a> {
    x: &'a DMatrix<f64>,
    n: f64,
    col_sq: &'a [f64],
    pub beta: Vec<f64>,
    pub resid: Vec<f64>,
}

impl<'a> CdState<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        y: &DVector<f64>,
        col_sq: &'a [f64],
        beta: Vec<f64>,
    ) -> Self {
        let mut resid = y.as_slice().to_vec();
        let n = x.nrows();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (r, &v) in resid.iter_mut().zip(col(x, j)) {
                    *r -= v * b;
                }
            }
        }
        CdState {
            x,
            n: n as f64,
            col_sq,
            beta,
            resid,
        }
    }

    /// One coordinate update; returns `|Δβ_j|`.
    #[inline]
    fn update(&mut self, j: usize, l1: f64, l2: f64) -> f64 {
        let cj = self.col_sq[j];
        let denom = cj + l2;
        let old = self.beta[j];
        let xj = col(self.x, j);
        let new = if denom <= 0.0 {
            0.0
        } else {
            let rho = dot(xj, &self.resid) / self.n + cj * old;
            soft_threshold(rho, l1) / denom
        };
        let delta = new - old;
        if delta != 0.0 {
            for (r, &v) in self.resid.iter_mut().zip(xj) {
                *r -= v * delta;
            }
            self.beta[j] = new;
        }
        delta.abs()
    }

    /// One sweep over `coords` in order; returns the largest `|Δβ_j|`.
    pub fn sweep(&mut self, coords: &[usize], l1: f64, l2: f64) -> f64 {
        sweep(self, coords, l1, l2)
    }

    /// Alternates full sweeps with sweeps over the nonzero coordinates until
    /// a full sweep moves no coefficient by more than the tolerance.
    /// Returns `(converged, sweeps)`.
    pub fn solve(&mut self, l1: f64, l2: f64, cfg: &SolverConfig) -> (bool, usize) {
        run_cd(self, l1, l2, cfg)
    }
}

/// A coordinate-descent state that can update one coordinate at a time.
trait Coordinates {
    fn beta(&self) -> &[f64];
    /// Updates coordinate `j` and returns `|Δβ_j|`.
    fn update(&mut self, j: usize, l1: f64, l2: f64) -> f64;
}

impl Coordinates for CdState<'_> {
    fn beta(&self) -> &[f64] {
        &self.beta
    }

    fn update(&mut self, j: usize, l1: f64, l2: f64) -> f64 {
        CdState::update(self, j, l1, l2)
    }
}

fn sweep<S: Coordinates>(s: &mut S, coords: &[usize], l1: f64, l2: f64) -> f64 {
    let mut max_delta = 0.0f64;
    for &j in coords {
        max_delta = max_delta.max(s.update(j, l1, l2));
    }
    max_delta
}

fn threshold(beta: &[f64], tol: f64) -> f64 {
    tol * beta.iter().fold(1.0f64, |m, b| m.max(b.abs()))
}

fn run_cd<S: Coordinates>(s: &mut S, l1: f64, l2: f64, cfg: &SolverConfig) -> (bool, usize) {
    let p = s.beta().len();
    let all: Vec<usize> = match cfg.order {
        SweepOrder::Cyclic => (0..p).collect(),
        SweepOrder::Reverse => (0..p).rev().collect(),
    };
    let mut sweeps = 0;
    loop {
        let d = sweep(s, &all, l1, l2);
        sweeps += 1;
        if d <= threshold(s.beta(), cfg.tol) {
            return (true, sweeps);
        }
        if sweeps >= cfg.max_iter {
            return (false, sweeps);
        }
        let active: Vec<usize> = all.iter().copied().filter(|&j| s.beta()[j] != 0.0).collect();
        loop {
            let d = sweep(s, &active, l1, l2);
            sweeps += 1;
            if d <= threshold(s.beta(), cfg.tol) {
                break;
            }
            if sweeps >= cfg.max_iter {
                return (false, sweeps);
            }
        }
    }
}

/// Coordinate descent on `(1/2)βᵀGβ − cᵀβ + l1‖β‖₁ + (l2/2)‖β‖²` with
/// `G = XᵀX/n` and `c = Xᵀy/n`, which has the same minimizer as the
/// Elastic Net objective on `(X, y)`. Each update costs `O(p)`, which pays
/// off for small active sets.
pub struct GramCd<'a> {
    g: &'a DMatrix<f64>,
    c: &'a DVector<f64>,
    pub beta: Vec<f64>,
    /// `Gβ`, maintained incrementally.
    g_beta: Vec<f64>,
}

impl<'a> GramCd<'a> {
    pub fn new(g: &'a DMatrix<f64>, c: &'a DVector<f64>, beta: Vec<f64>) -> Self {
        let b = DVector::from_column_slice(&beta);
        let g_beta = (g * b).as_slice().to_vec();
        GramCd { g, c, beta, g_beta }
    }

    pub fn solve(&mut self, l1: f64, l2: f64, cfg: &SolverConfig) -> (bool, usize) {
        if self.c.amax() <= l1 * (1.0 + 4.0 * f64::EPSILON) {
            self.beta.iter_mut().for_each(|b| *b = 0.0);
            self.g_beta.iter_mut().for_each(|v| *v = 0.0);
            return (true, 0);
        }
        run_cd(self, l1, l2, cfg)
    }

    /// Replaces the iterate by the exact solution of the stationarity
    /// equations on its support with its signs held fixed, provided that
    /// solution keeps the signs and satisfies the optimality conditions off
    /// the support. Removes the slow-mode error coordinate descent leaves
    /// along near-flat directions such as duplicated columns.
    pub fn polish(&mut self, l1: f64, l2: f64) -> bool {
        let s: Vec<usize> = (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect();
        if s.is_empty() {
            return false;
        }
        let mut g_ss = self.g.select_rows(&s).select_columns(&s);
        for i in 0..s.len() {
            g_ss[(i, i)] += l2;
        }
        let rhs = DVector::from_iterator(s.len(), s.iter().map(|&j| self.c[j] - l1 * self.beta[j].signum()));
        let Some((b, _)) = spd_solve_with_jitter(&g_ss, &rhs, 0.0) else {
            return false;
        };
        if s.iter().zip(b.iter()).any(|(&j, &v)| v == 0.0 || v.signum() != self.beta[j].signum()) {
            return false;
        }
        let mut beta = vec![0.0; self.beta.len()];
        for (&j, &v) in s.iter().zip(b.iter()) {
            beta[j] = v;
        }
        let g_beta = (self.g * DVector::from_column_slice(&beta)).as_slice().to_vec();
        let off_ok = (0..beta.len())
            .filter(|&j| beta[j] == 0.0)
            .all(|j| (self.c[j] - g_beta[j]).abs() <= l1);
        if off_ok {
            self.beta = beta;
            self.g_beta = g_beta;
        }
        off_ok
    }
}

impl Coordinates for GramCd<'_> {
    fn beta(&self) -> &[f64] {
        &self.beta
    }

    fn update(&mut self, j: usize, l1: f64, l2: f64) -> f64 {
        let gjj = self.g[(j, j)];
        let denom = gjj + l2;
        let old = self.beta[j];
        let new = if denom <= 0.0 {
            0.0
        } else {
            soft_threshold(self.c[j] - self.g_beta[j] + gjj * old, l1) / denom
        };
        let delta = new - old;
        if delta != 0.0 {
            for (v, &gij) in self.g_beta.iter_mut().zip(self.g.column(j).iter()) {
                *v += gij * delta;
            }
            self.beta[j] = new;
        }
        delta.abs()
    }
}

/// `x_jᵀx_j / n` for every column.
pub fn column_sq_norms(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| {
            let c = col(x, j);
            dot(c, c) / n
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnetFit {
    pub coef: CoefVector,
    pub converged: bool,
    pub sweeps: usize,
    /// Whether ridge jitter replaced a zero ℓ2 penalty.
    pub jittered: bool,
}

fn check_dims(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(RenetError::DimensionMismatch(format!(
            "x has {} rows, y has {}",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

fn intercept_for(x: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let mut b0 = y.sum() / n;
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            b0 -= b * col(x, j).iter().sum::<f64>() / n;
        }
    }
    b0
}

fn penalties(x: &DMatrix<f64>, hp: &Hyperparams, cfg: &SolverConfig) -> (f64, f64, bool) {
    let l1 = hp.l1();
    let mut l2 = hp.l2();
    let mut jittered = false;
    if hp.lambda == 0.0 && cfg.min_ridge > 0.0 && gram_needs_jitter(x) {
        l2 = cfg.min_ridge;
        jittered = true;
    }
    (l1, l2, jittered)
}

/// Minimizes the Elastic Net objective by coordinate descent.
///
/// `theta` in `hp` is ignored. Non-convergence is reported through
/// [`EnetFit::converged`], not as an error.
pub fn fit_enet(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    hp: &Hyperparams,
    warm: Option<&CoefVector>,
    cfg: &SolverConfig,
) -> Result<EnetFit> {
    check_dims(x, y)?;
    hp.validate()?;
    cfg.validate()?;
    let p = x.ncols();
    let init = match warm {
        Some(w) if w.n_features != p => {
            return Err(RenetError::DimensionMismatch(format!(
                "warm start has {} features, design has {p}",
                w.n_features
            )))
        }
        Some(w) => w.to_dense().as_slice().to_vec(),
        None => vec![0.0; p],
    };
    let col_sq = column_sq_norms(x);
    let (l1, l2, jittered) = penalties(x, hp, cfg);
    let zero_at = max_abs_corr(x, y) / x.nrows() as f64;
    let (beta, converged, sweeps) = if all_zero(l1, zero_at) {
        (vec![0.0; p], true, 0)
    } else {
        let mut st = CdState::new(x, y, &col_sq, init);
        let (conv, sweeps) = st.solve(l1, l2, cfg);
        (st.beta, conv, sweeps)
    };
    let b0 = intercept_for(x, y, &beta);
    Ok(EnetFit {
        coef: CoefVector::dense(DVector::from_vec(beta), b0),
        converged,
        sweeps,
        jittered,
    })
}

/// Whether the ℓ1 weight annihilates every coordinate, with slack for the
/// rounding in `λ_max·α`.
fn all_zero(l1: f64, zero_at: f64) -> bool {
    l1 >= zero_at * (1.0 - 4.0 * f64::EPSILON)
}

/// Solutions along a decreasing λ grid for a fixed α.
#[derive(Debug, Clone, PartialEq)]
pub struct EnetPath {
    pub alpha: f64,
    pub lambda_grid: Vec<f64>,
    /// Row `i` holds the coefficients at `lambda_grid[i]`.
    pub coefs: DMatrix<f64>,
    pub intercepts: Vec<f64>,
    pub active_sets: Vec<Vec<usize>>,
    pub converged: Vec<bool>,
    pub sweeps: Vec<usize>,
}

impl EnetPath {
    pub fn len(&self) -> usize {
        self.lambda_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_grid.is_empty()
    }

    /// Coefficients at grid point `i` as a dense vector.
    pub fn coef(&self, i: usize) -> CoefVector {
        let p = self.coefs.ncols();
        CoefVector::dense(
            DVector::from_iterator(p, (0..p).map(|j| self.coefs[(i, j)])),
            self.intercepts[i],
        )
    }

    /// Coefficients at grid point `i` restricted to its active set.
    pub fn active_coef(&self, i: usize) -> CoefVector {
        let a = &self.active_sets[i];
        CoefVector {
            values: DVector::from_iterator(a.len(), a.iter().map(|&j| self.coefs[(i, j)])),
            intercept: self.intercepts[i],
            support: a.clone(),
            n_features: self.coefs.ncols(),
        }
    }
}

pub fn validate_lambda_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(RenetError::InvalidArgument("empty lambda grid".into()));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(RenetError::InvalidArgument(
            "lambda grid entries must be finite and nonnegative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(RenetError::InvalidArgument(
            "lambda grid must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Path over the first `count` grid points, each warm-started from the
/// previous solution.
pub fn enet_path_prefix(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    grid: &[f64],
    count: usize,
    cfg: &SolverConfig,
) -> Result<EnetPath> {
    check_dims(x, y)?;
    validate_lambda_grid(grid)?;
    cfg.validate()?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(RenetError::InvalidArgument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let count = count.min(grid.len());
    let p = x.ncols();
    let col_sq = column_sq_norms(x);
    let zero_at = max_abs_corr(x, y) / x.nrows() as f64;
    let mut coefs = DMatrix::zeros(count, p);
    let mut intercepts = Vec::with_capacity(count);
    let mut active_sets = Vec::with_capacity(count);
    let mut converged = Vec::with_capacity(count);
    let mut sweeps = Vec::with_capacity(count);

    let mut st = CdState::new(x, y, &col_sq, vec![0.0; p]);
    for (i, &lam) in grid.iter().take(count).enumerate() {
        let hp = Hyperparams {
            lambda: lam,
            alpha,
            theta: 1.0,
        };
        let (l1, l2, _) = penalties(x, &hp, cfg);
        let (conv, nsw) = if all_zero(l1, zero_at) {
            st = CdState::new(x, y, &col_sq, vec![0.0; p]);
            (true, 0)
        } else {
            st.solve(l1, l2, cfg)
        };
        for j in 0..p {
            coefs[(i, j)] = st.beta[j];
        }
        intercepts.push(intercept_for(x, y, &st.beta));
        active_sets.push((0..p).filter(|&j| st.beta[j] != 0.0).collect());
        converged.push(conv);
        sweeps.push(nsw);
    }
    Ok(EnetPath {
        alpha,
        lambda_grid: grid[..count].to_vec(),
        coefs,
        intercepts,
        active_sets,
        converged,
        sweeps,
    })
}

/// Solves the whole grid from largest to smallest λ.
pub fn enet_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<EnetPath> {
    enet_path_prefix(x, y, alpha, grid, grid.len(), cfg)
}

/// Largest violation of the Elastic Net stationarity conditions.
///
/// With `g_j = (1/n)x_jᵀ(y − Xβ)`: active coordinates contribute
/// `|g_j − λα·sgn(β_j) − λ(1−α)β_j|`, inactive ones `max(0, |g_j| − λα)`.
pub fn check_kkt(x: &DMatrix<f64>, y: &DVector<f64>, beta: &CoefVector, hp: &Hyperparams) -> f64 {
    let n = x.nrows() as f64;
    let dense = beta.to_dense();
    let r = y - x * &dense;
    let (l1, l2) = (hp.l1(), hp.l2());
    (0..x.ncols())
        .map(|j| {
            let g = dot(col(x, j), r.as_slice()) / n;
            let b = dense[j];
            if b != 0.0 {
                (g - l1 * b.signum() - l2 * b).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
