//! Estimators behind a common trait, looked up by name.

use std::collections::BTreeMap;

use nalgebra::DVector;
use renet_core::adaptive::{aen_fit, AenConfig};
use renet_core::config::BenchConfig;
use renet_core::cv::{fit_renet_cv, FittedModel, RenetOptions, SelectionRule};
use renet_core::preprocess::{PreprocessMode, Preprocessor};
use renet_core::{Dataset, RenetError, Result, SolverConfig};

/// Settings shared by every estimator for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitContext {
    pub alpha: f64,
    pub theta_grid: Vec<f64>,
    pub n_lambda: usize,
    pub folds: usize,
    pub se_multiplier: f64,
    pub inner_folds: usize,
    pub aen_gamma: f64,
    pub aen_eps_tol: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl FitContext {
    pub fn from_config(cfg: &BenchConfig, seed: u64) -> Self {
        FitContext {
            alpha: cfg.alpha,
            theta_grid: cfg.theta_grid.clone(),
            n_lambda: cfg.n_lambda,
            folds: cfg.folds,
            se_multiplier: cfg.se_multiplier,
            inner_folds: cfg.inner_folds,
            aen_gamma: cfg.aen_gamma,
            aen_eps_tol: cfg.aen_eps_tol,
            seed,
            solver: cfg.solver,
        }
    }
}

/// A fitted linear model as seen by the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub model: FittedModel,
    /// Selected relaxation; `None` for estimators without one.
    pub theta: Option<f64>,
    pub converged: bool,
}

impl ModelFit {
    pub fn predict(&self, d: &Dataset) -> Result<DVector<f64>> {
        self.model.predict(d)
    }

    pub fn n_coef(&self) -> usize {
        self.model.n_nonzero()
    }

    /// Input columns with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        let (beta, _) = self.model.original_coefficients();
        (0..beta.len()).filter(|&j| beta[j] != 0.0).collect()
    }
}

pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, train: &Dataset, ctx: &FitContext) -> Result<ModelFit>;
}

/// Cross-validated Elastic Net, optionally relaxed.
pub struct CvEstimator {
    name: &'static str,
    relax: bool,
    rule: SelectionRule,
}

impl CvEstimator {
    pub fn new(name: &'static str, relax: bool, rule: SelectionRule) -> Self {
        CvEstimator { name, relax, rule }
    }
}

impl Estimator for CvEstimator {
    fn name(&self) -> &'static str {
        self.name
    }

    fn fit(&self, train: &Dataset, ctx: &FitContext) -> Result<ModelFit> {
        let opts = RenetOptions {
            alpha: ctx.alpha,
            theta_grid: if self.relax { ctx.theta_grid.clone() } else { vec![1.0] },
            n_lambda: ctx.n_lambda,
            folds: ctx.folds,
            seed: ctx.seed,
            rule: self.rule,
            se_multiplier: ctx.se_multiplier,
            k_inner: ctx.inner_folds,
            solver: ctx.solver,
        };
        let cv = fit_renet_cv(train, &opts)?;
        Ok(ModelFit {
            theta: Some(cv.fit.relaxed.theta_effective),
            converged: cv.fit.converged,
            model: cv.fit.model,
        })
    }
}

pub struct AenEstimator;

impl Estimator for AenEstimator {
    fn name(&self) -> &'static str {
        "aen"
    }

    fn fit(&self, train: &Dataset, ctx: &FitContext) -> Result<ModelFit> {
        let mode = PreprocessMode::Standardize {
            k_inner: ctx.inner_folds,
            seed: ctx.seed,
        };
        let (std, pre) = Preprocessor::fit(train, mode)?;
        let cfg = AenConfig {
            gamma: ctx.aen_gamma,
            eps_tol: ctx.aen_eps_tol,
            alpha: ctx.alpha,
            k: ctx.folds,
            seed: ctx.seed,
            n_lambda: ctx.n_lambda,
        };
        let fit = aen_fit(&std, &cfg, &ctx.solver)?;
        let mut coef = fit.coef;
        coef.intercept += pre.y_mean();
        Ok(ModelFit {
            model: FittedModel {
                preprocessor: pre,
                coef,
            },
            theta: None,
            converged: fit.converged,
        })
    }
}

#[derive(Default)]
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Estimator>>,
}

impl Registry {
    pub fn register(&mut self, e: Box<dyn Estimator>) {
        self.entries.insert(e.name(), e);
    }

    /// `en`, `en1se`, `aen`, `renet` and `renet1se`.
    pub fn builtin() -> Self {
        let mut r = Registry::default();
        r.register(Box::new(CvEstimator::new("en", false, SelectionRule::CvMin)));
        r.register(Box::new(CvEstimator::new("en1se", false, SelectionRule::OneSe)));
        r.register(Box::new(AenEstimator));
        r.register(Box::new(CvEstimator::new("renet", true, SelectionRule::CvMin)));
        r.register(Box::new(CvEstimator::new("renet1se", true, SelectionRule::OneSe)));
        r
    }

    pub fn get(&self, name: &str) -> Result<&dyn Estimator> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| RenetError::Config(format!("unknown model `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}
