//! Relaxation of an Elastic Net fit on its active set.
//!
//! Given the active set `A` and the Elastic Net coefficients on it, the
//! relaxed estimate at `θ` either blends the penalized and restricted OLS
//! solutions (when their signs agree on every coordinate) or re-solves the
//! penalized problem on `A` at penalty `θλ`, warm-started from the Elastic
//! Net coefficients. Relaxation is disabled once `|A| ≥ n`.

use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RenetError, Result};
use crate::linalg::{scaled_gram, spd_solve_with_jitter};
use crate::model::{CoefVector, Hyperparams};
use crate::solver::{GramCd, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    PassThrough,
    Blend,
    Refit,
    Saturated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedFit {
    /// Coefficients on the active set, indexed by original column.
    pub coef: CoefVector,
    pub theta_requested: f64,
    pub theta_effective: f64,
    pub branch: Branch,
    pub converged: bool,
}

/// `min(1, ln p / (2√n))` when `p > n`, otherwise 0.
pub fn theta_floor(n: usize, p: usize) -> f64 {
    if p <= n || n == 0 {
        return 0.0;
    }
    ((p as f64).ln() / (2.0 * (n as f64).sqrt())).min(1.0)
}

/// 1 under saturation (`p_active ≥ n_train`), else `max(theta, floor)`.
pub fn effective_theta(theta: f64, p_active: usize, n_train: usize, floor: f64) -> f64 {
    if p_active >= n_train {
        1.0
    } else {
        theta.max(floor)
    }
}

/// Least squares on the restricted columns, solved through the normal
/// equations with ridge jitter `cfg.min_ridge` if the Gram matrix is
/// ill-conditioned.
pub fn restricted_ols(x_a: &DMatrix<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<DVector<f64>> {
    NormalEquations::new(x_a, y, cfg).ols
}

/// `G = X_AᵀX_A/n`, `c = X_Aᵀy/n` and the restricted OLS solution.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub g: DMatrix<f64>,
    pub c: DVector<f64>,
    pub ols: Result<DVector<f64>>,
}

impl NormalEquations {
    pub fn new(x_a: &DMatrix<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Self {
        let (n, k) = x_a.shape();
        let g = scaled_gram(x_a);
        let c = x_a.tr_mul(y) / n as f64;
        let ols = if k >= n {
            Err(RenetError::Invariant(format!(
                "restricted OLS reached with {k} active columns and {n} rows"
            )))
        } else if k == 0 {
            Ok(DVector::zeros(0))
        } else {
            spd_solve_with_jitter(&g, &c, cfg.min_ridge)
                .map(|(beta, _)| beta)
                .ok_or_else(|| RenetError::Degenerate("restricted Gram matrix is singular".into()))
        };
        NormalEquations { g, c, ols }
    }
}

/// Relaxation problem for one active set and one λ; the normal equations
/// and OLS solution are computed on first use and shared across θ values.
pub struct RelaxProblem<'a> {
    x_a: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    beta_en: &'a CoefVector,
    lambda: f64,
    alpha: f64,
    cfg: SolverConfig,
    normal: OnceCell<NormalEquations>,
}

impl<'a> RelaxProblem<'a> {
    /// `x_a` holds the active columns in the order of `beta_en.support`.
    pub fn new(
        x_a: &'a DMatrix<f64>,
        y: &'a DVector<f64>,
        beta_en: &'a CoefVector,
        lambda: f64,
        alpha: f64,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        if x_a.ncols() != beta_en.values.len() {
            return Err(RenetError::DimensionMismatch(format!(
                "{} active columns for {} coefficients",
                x_a.ncols(),
                beta_en.values.len()
            )));
        }
        if x_a.nrows() != y.len() {
            return Err(RenetError::DimensionMismatch(format!(
                "x_a has {} rows, y has {}",
                x_a.nrows(),
                y.len()
            )));
        }
        Ok(RelaxProblem {
            x_a,
            y,
            beta_en,
            lambda,
            alpha,
            cfg: *cfg,
            normal: OnceCell::new(),
        })
    }

    pub fn is_saturated(&self) -> bool {
        self.x_a.ncols() >= self.x_a.nrows()
    }

    pub fn normal(&self) -> &NormalEquations {
        self.normal
            .get_or_init(|| NormalEquations::new(self.x_a, self.y, &self.cfg))
    }

    /// Seeds the normal equations computed for an identical active set.
    pub fn set_normal(&self, normal: NormalEquations) {
        let _ = self.normal.set(normal);
    }

    pub fn cached_normal(&self) -> Option<&NormalEquations> {
        self.normal.get()
    }

    pub fn take_normal(self) -> Option<NormalEquations> {
        self.normal.into_inner()
    }

    pub fn ols(&self) -> Result<&DVector<f64>> {
        self.normal().ols.as_ref().map_err(Clone::clone)
    }

    /// Strict sign agreement; an exactly zero OLS coordinate is a mismatch.
    pub fn sign_consistent(&self) -> Result<bool> {
        let ols = self.ols()?;
        Ok(self
            .beta_en
            .values
            .iter()
            .zip(ols.iter())
            .all(|(e, o)| *o != 0.0 && e.signum() == o.signum()))
    }

    fn with_values(&self, values: DVector<f64>) -> CoefVector {
        CoefVector {
            values,
            intercept: self.beta_en.intercept,
            support: self.beta_en.support.clone(),
            n_features: self.beta_en.n_features,
        }
    }

    fn fit(&self, coef: CoefVector, theta_eff: f64, branch: Branch, converged: bool) -> RelaxedFit {
        RelaxedFit {
            coef,
            theta_requested: theta_eff,
            theta_effective: theta_eff,
            branch,
            converged,
        }
    }

    /// `θ·β_EN + (1−θ)·β_OLS`.
    pub fn blend(&self, theta: f64) -> Result<RelaxedFit> {
        let ols = self.ols()?;
        let v = self.beta_en.values.map(|b| theta * b) + ols.map(|b| (1.0 - theta) * b);
        Ok(self.fit(self.with_values(v), theta, Branch::Blend, true))
    }

    /// Penalized re-solve on the active columns at penalty `θλ`,
    /// warm-started from the Elastic Net coefficients. At `θ = 0` this is
    /// the restricted OLS solution.
    pub fn refit(&self, theta: f64) -> Result<RelaxedFit> {
        if theta == 0.0 {
            let ols = self.ols()?.clone();
            return Ok(self.fit(self.with_values(ols), theta, Branch::Refit, true));
        }
        let hp = Hyperparams::enet(theta * self.lambda, self.alpha)?;
        let ne = self.normal();
        let mut cd = GramCd::new(&ne.g, &ne.c, self.beta_en.values.as_slice().to_vec());
        let (converged, _) = cd.solve(hp.l1(), hp.l2(), &self.cfg);
        if converged {
            cd.polish(hp.l1(), hp.l2());
        }
        Ok(self.fit(
            self.with_values(DVector::from_vec(cd.beta)),
            theta,
            Branch::Refit,
            converged,
        ))
    }

    /// Dispatches on saturation, `θ = 1`, and sign consistency.
    pub fn solve(&self, theta_eff: f64) -> Result<RelaxedFit> {
        if !(0.0..=1.0).contains(&theta_eff) {
            return Err(RenetError::InvalidArgument(format!(
                "theta must lie in [0, 1], got {theta_eff}"
            )));
        }
        if self.is_saturated() {
            return Ok(self.fit(self.beta_en.clone(), 1.0, Branch::Saturated, true));
        }
        if theta_eff == 1.0 {
            return Ok(self.fit(self.beta_en.clone(), 1.0, Branch::PassThrough, true));
        }
        if self.beta_en.values.is_empty() {
            return Ok(self.fit(self.beta_en.clone(), theta_eff, Branch::Blend, true));
        }
        if self.sign_consistent()? {
            self.blend(theta_eff)
        } else {
            self.refit(theta_eff)
        }
    }

    /// Applies [`effective_theta`] to `theta` and solves, recording both
    /// the requested and the effective relaxation.
    pub fn solve_requested(&self, theta: f64, floor: f64) -> Result<RelaxedFit> {
        let eff = effective_theta(theta, self.x_a.ncols(), self.x_a.nrows(), floor);
        let mut fit = self.solve(eff)?;
        fit.theta_requested = theta;
        Ok(fit)
    }
}

/// One-shot relaxation of `beta_en` (restricted to its support, with `x_a`
/// the matching columns) at an already-effective `theta_eff`.
pub fn relax_solve(
    x_a: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    theta_eff: f64,
    beta_en: &CoefVector,
    cfg: &SolverConfig,
) -> Result<RelaxedFit> {
    RelaxProblem::new(x_a, y, beta_en, lambda, alpha, cfg)?.solve(theta_eff)
}
