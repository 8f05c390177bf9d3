//! Adaptive Elastic Net baseline: ridge pilot, inverse-power weights and a
//! cross-validated Elastic Net on the reweighted design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cv::{
    build_grid, run_cv_with, select_cv_min, fit_final_with, CvOptions, CvSurface, FittedModel, GridSpec,
    Selection, DEFAULT_N_LAMBDA,
};
use crate::error::{RenetError, Result};
use crate::model::{mean_squared_error, CoefVector, Dataset, FitMetrics};
use crate::preprocess::{shuffled_folds, PreprocessMode};
use crate::solver::SolverConfig;

pub const RIDGE_GRID_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AenConfig {
    pub gamma: f64,
    pub eps_tol: f64,
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
    pub n_lambda: usize,
}

impl Default for AenConfig {
    fn default() -> Self {
        AenConfig {
            gamma: 1.0,
            eps_tol: 1e-12,
            alpha: 0.95,
            k: 10,
            seed: 42,
            n_lambda: DEFAULT_N_LAMBDA,
        }
    }
}

impl AenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(RenetError::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.eps_tol > 0.0 && self.eps_tol.is_finite()) {
            return Err(RenetError::InvalidArgument(format!(
                "eps_tol must be positive, got {}",
                self.eps_tol
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(RenetError::InvalidArgument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.k < 2 {
            return Err(RenetError::InvalidArgument("need at least two folds".into()));
        }
        Ok(())
    }
}

/// Ridge penalties `[1e-4, 1e4]·tr(XᵀX)/(n·p)`, log-spaced, descending.
pub fn ridge_grid(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = (x.nrows() as f64, x.ncols() as f64);
    let scale = (x.norm_squared() / (n * p)).max(f64::MIN_POSITIVE);
    let (hi, lo) = (4.0f64, -4.0f64);
    (0..RIDGE_GRID_SIZE)
        .map(|i| {
            let e = hi - (hi - lo) * i as f64 / (RIDGE_GRID_SIZE - 1) as f64;
            scale * 10f64.powf(e)
        })
        .collect()
}

/// Thin SVD of a centered design, reused across ridge penalties.
struct RidgeSvd {
    u_t_y: DVector<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    n: f64,
}

impl RidgeSvd {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let svd = x.clone().svd(true, true);
        let u = svd.u.ok_or_else(|| RenetError::Invariant("svd without U".into()))?;
        let v_t = svd.v_t.ok_or_else(|| RenetError::Invariant("svd without V".into()))?;
        Ok(RidgeSvd {
            u_t_y: u.tr_mul(y),
            s: svd.singular_values,
            v: v_t.transpose(),
            n: x.nrows() as f64,
        })
    }

    /// Minimizer of `(1/2n)‖y − Xβ‖² + (μ/2)‖β‖²`.
    fn solve(&self, mu: f64) -> DVector<f64> {
        let d = DVector::from_fn(self.s.len(), |i, _| {
            let s = self.s[i];
            s * self.u_t_y[i] / (s * s + self.n * mu)
        });
        &self.v * d
    }
}

fn centered(x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
    let means = DVector::from_fn(x.ncols(), |j, _| x.column(j).mean());
    let mut xc = x.clone();
    for j in 0..x.ncols() {
        xc.column_mut(j).add_scalar_mut(-means[j]);
    }
    let ym = y.mean();
    (xc, y.add_scalar(-ym), means, ym)
}

/// Ridge fit at a fixed penalty `μ` with intercept.
pub fn ridge_fixed(x: &DMatrix<f64>, y: &DVector<f64>, mu: f64) -> Result<CoefVector> {
    let (xc, yc, means, ym) = centered(x, y);
    let beta = RidgeSvd::new(&xc, &yc)?.solve(mu);
    let b0 = ym - means.dot(&beta);
    Ok(CoefVector::dense(beta, b0))
}

/// Ridge solution at the penalty with the lowest K-fold CV error (ties go
/// to the larger penalty). Returns the pilot and the chosen penalty.
pub fn ridge_pilot_cv(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, seed: u64) -> Result<(CoefVector, f64)> {
    let n = x.nrows();
    if y.len() != n {
        return Err(RenetError::DimensionMismatch(format!("x has {n} rows, y has {}", y.len())));
    }
    if k < 2 || k > n {
        return Err(RenetError::InvalidArgument(format!("fold count {k} must lie in [2, {n}]")));
    }
    let grid = ridge_grid(x);
    let folds = shuffled_folds(n, k, seed);
    let mut total = vec![0.0; grid.len()];
    for test in &folds {
        let mut in_test = vec![false; n];
        for &i in test {
            in_test[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let (xc, yc, means, ym) = centered(&x.select_rows(&train), &y.select_rows(&train));
        let svd = RidgeSvd::new(&xc, &yc)?;
        let x_te = x.select_rows(test);
        let y_te = y.select_rows(test);
        for (t, &mu) in total.iter_mut().zip(&grid) {
            let beta = svd.solve(mu);
            let pred = (&x_te * &beta).add_scalar(ym - means.dot(&beta));
            *t += mean_squared_error(&y_te, &pred);
        }
    }
    let mut best = 0;
    for (i, &v) in total.iter().enumerate() {
        if v < total[best] {
            best = i;
        }
    }
    let mu = grid[best];
    Ok((ridge_fixed(x, y, mu)?, mu))
}

/// `w_j = 1 / (|β_j|^γ + ε)`.
pub fn adaptive_weights(pilot: &CoefVector, gamma: f64, eps_tol: f64) -> Vec<f64> {
    pilot
        .to_dense()
        .iter()
        .map(|b| 1.0 / (b.abs().powf(gamma) + eps_tol))
        .collect()
}

/// Columns divided by their weights.
pub fn reweight_design(x: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut xt = x.clone();
    for (j, &w) in weights.iter().enumerate() {
        xt.column_mut(j).unscale_mut(w);
    }
    xt
}

#[derive(Debug, Clone, PartialEq)]
pub struct AenFit {
    /// Coefficients on the input (standardized) columns.
    pub coef: CoefVector,
    /// Coefficients on the reweighted columns.
    pub raw_coef: CoefVector,
    pub weights: Vec<f64>,
    pub pilot: Option<CoefVector>,
    pub grid: GridSpec,
    pub surface: CvSurface,
    pub selection: Selection,
    pub raw_model: FittedModel,
    pub metrics: FitMetrics,
    pub converged: bool,
}

impl AenFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.coef.predict(x)
    }
}

/// Adaptive Elastic Net with externally supplied weights.
pub fn aen_fit_with_weights(
    d: &Dataset,
    weights: Vec<f64>,
    cfg: &AenConfig,
    solver_cfg: &SolverConfig,
) -> Result<AenFit> {
    let start = std::time::Instant::now();
    cfg.validate()?;
    if weights.len() != d.p() {
        return Err(RenetError::DimensionMismatch(format!(
            "{} weights for {} columns",
            weights.len(),
            d.p()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(RenetError::InvalidArgument("weights must be finite and positive".into()));
    }
    let xt = Dataset::new(reweight_design(&d.x, &weights), d.y.clone());
    let mode = PreprocessMode::CenterOnly;
    let grid = build_grid(&xt, cfg.alpha, vec![1.0], cfg.n_lambda, mode)?;
    let opts = CvOptions {
        folds: cfg.k.min(d.n()),
        seed: cfg.seed,
        mode,
        solver: *solver_cfg,
    };
    let surface = run_cv_with(&xt, &grid, &opts)?;
    let selection = select_cv_min(&surface)?;
    let fin = fit_final_with(&xt, &selection, &grid, mode, solver_cfg)?;

    let (raw, b0) = fin.model.original_coefficients();
    let beta: Vec<f64> = raw.iter().zip(&weights).map(|(b, w)| b / w).collect();
    let coef = CoefVector::dense(DVector::from_vec(beta), b0);
    let raw_coef = CoefVector::dense(DVector::from_vec(raw), b0);
    let fitted = coef.predict(&d.x);
    let metrics = FitMetrics {
        r2: crate::model::r_squared(&d.y, &fitted).unwrap_or(f64::NAN),
        n_nonzero: coef.n_nonzero(),
        theta_selected: 1.0,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(AenFit {
        coef,
        raw_coef,
        weights,
        pilot: None,
        grid,
        surface,
        selection,
        raw_model: fin.model,
        metrics,
        converged: fin.converged,
    })
}

/// Ridge pilot, adaptive weights, weighted Elastic Net CV and
/// back-transform. Expects standardized numeric columns.
pub fn aen_fit(d: &Dataset, cfg: &AenConfig, solver_cfg: &SolverConfig) -> Result<AenFit> {
    let start = std::time::Instant::now();
    cfg.validate()?;
    let (pilot, _) = ridge_pilot_cv(&d.x, &d.y, cfg.k.min(d.n()), cfg.seed)?;
    let weights = adaptive_weights(&pilot, cfg.gamma, cfg.eps_tol);
    let mut fit = aen_fit_with_weights(d, weights, cfg, solver_cfg)?;
    fit.pilot = Some(pilot);
    fit.metrics.wall_time_s = start.elapsed().as_secs_f64();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::OrthogonalFixture;
    use crate::preprocess::standardize_fit_transform;
    use proptest::prelude::*;

    #[test]
    fn ridge_on_orthogonal_design_shrinks_ols() {
        let f = OrthogonalFixture::generate(60, DVector::from_column_slice(&[2.0, -1.0, 0.5]), 0.4, 9);
        let ols = f.beta_ols();
        for mu in [0.0, 0.3, 2.0] {
            let r = ridge_fixed(&f.q, &f.y, mu).unwrap();
            for j in 0..3 {
                assert!((r.values[j] - ols[j] / (1.0 + mu)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_response_gives_zero_pilot() {
        let f = OrthogonalFixture::generate(30, DVector::from_column_slice(&[1.0, 1.0]), 0.1, 1);
        let (pilot, _) = ridge_pilot_cv(&f.q, &DVector::zeros(30), 5, 0).unwrap();
        assert!(pilot.values.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn duplicated_columns_share_pilot() {
        let f = OrthogonalFixture::generate(40, DVector::from_column_slice(&[1.5, -0.5]), 0.3, 2);
        let x = DMatrix::from_fn(40, 3, |i, j| f.q[(i, if j == 2 { 0 } else { j })]);
        let (pilot, _) = ridge_pilot_cv(&x, &f.y, 5, 0).unwrap();
        assert!((pilot.values[0] - pilot.values[2]).abs() < 1e-10);
    }

    #[test]
    fn weight_examples() {
        let unit = CoefVector::dense(DVector::from_column_slice(&[1.0, 1.0]), 0.0);
        for w in adaptive_weights(&unit, 1.0, 1e-12) {
            assert!((w - 1.0).abs() < 1e-11);
        }
        let zero = CoefVector::dense(DVector::from_column_slice(&[0.0]), 0.0);
        assert_eq!(adaptive_weights(&zero, 1.0, 1e-12)[0], 1e12);
        let two = CoefVector::dense(DVector::from_column_slice(&[2.0]), 0.0);
        assert!((adaptive_weights(&two, 2.0, 1e-300)[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(AenConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(AenConfig { eps_tol: 0.0, ..Default::default() }.validate().is_err());
        AenConfig::default().validate().unwrap();
    }

    fn toy(seed: u64) -> Dataset {
        let f = OrthogonalFixture::generate(80, DVector::from_column_slice(&[2.0, 0.0, -1.0, 0.0, 0.5]), 0.5, seed);
        let (d, _) = standardize_fit_transform(&Dataset::new(f.q, f.y)).unwrap();
        d
    }

    #[test]
    fn zero_weight_column_never_enters() {
        let d = toy(4);
        let cfg = AenConfig { k: 5, n_lambda: 30, ..Default::default() };
        let mut w = vec![1.0; 5];
        w[0] = 1e12;
        let fit = aen_fit_with_weights(&d, w, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(fit.coef.values[0], 0.0);
        assert!(fit.coef.values[2] != 0.0);
    }

    #[test]
    fn back_transform_consistency() {
        let d = toy(6);
        let cfg = AenConfig { k: 5, n_lambda: 30, ..Default::default() };
        let fit = aen_fit(&d, &cfg, &SolverConfig::default()).unwrap();
        let xt = reweight_design(&d.x, &fit.weights);
        let a = fit.raw_coef.predict(&xt);
        let b = fit.coef.predict(&d.x);
        assert!((a - b).amax() < 1e-10);
        assert!(fit.weights.iter().all(|w| w.is_finite() && *w > 0.0));
    }

    proptest! {
        #[test]
        fn weights_positive_and_finite(
            b in prop::collection::vec(-1e6f64..1e6, 1..8), gamma in 0.1f64..4.0, eps in 1e-12f64..1.0,
        ) {
            let pilot = CoefVector::dense(DVector::from_vec(b), 0.0);
            for w in adaptive_weights(&pilot, gamma, eps) {
                prop_assert!(w.is_finite() && w > 0.0);
            }
        }
    }
}
