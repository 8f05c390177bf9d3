//! Shared domain types and metric primitives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RenetError, Result};

/// Minimum number of rows a dataset must carry to be fitted.
pub const MIN_ROWS: usize = 3;

/// Design matrix, response and column metadata.
///
/// Categorical columns hold integer level codes (stored as `f64`) until they
/// are replaced by target encoding; `levels[j]` names the codes of column `j`
/// and is empty for numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub categorical_mask: Vec<bool>,
    pub levels: Vec<Vec<String>>,
}

impl Dataset {
    /// Numeric-only dataset with generated feature names `x0..x{p-1}`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Self {
        let p = x.ncols();
        Dataset {
            x,
            y,
            feature_names: (0..p).map(|j| format!("x{j}")).collect(),
            categorical_mask: vec![false; p],
            levels: vec![Vec::new(); p],
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }

    pub fn with_categorical(mut self, mask: Vec<bool>) -> Self {
        self.levels = mask
            .iter()
            .zip(&self.levels)
            .map(|(&c, l)| if c { l.clone() } else { Vec::new() })
            .collect();
        self.categorical_mask = mask;
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_categorical(&self) -> bool {
        self.categorical_mask.iter().any(|&c| c)
    }

    /// Rows in the given order; metadata is carried over unchanged.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            feature_names: self.feature_names.clone(),
            categorical_mask: self.categorical_mask.clone(),
            levels: self.levels.clone(),
        }
    }
}

/// Penalty strength, l1 ratio and relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl Hyperparams {
    pub fn new(lambda: f64, alpha: f64, theta: f64) -> Result<Self> {
        let hp = Hyperparams {
            lambda,
            alpha,
            theta,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Elastic Net hyperparameters; relaxation is fixed at 1.
    pub fn enet(lambda: f64, alpha: f64) -> Result<Self> {
        Self::new(lambda, alpha, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(RenetError::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RenetError::InvalidArgument(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(RenetError::InvalidArgument(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn l1(&self) -> f64 {
        self.lambda * self.alpha
    }

    pub fn l2(&self) -> f64 {
        self.lambda * (1.0 - self.alpha)
    }
}

/// Coefficients on an ordered support of the original `n_features` columns.
///
/// A dense vector has `support == 0..n_features`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVector {
    pub values: DVector<f64>,
    pub intercept: f64,
    pub support: Vec<usize>,
    pub n_features: usize,
}

impl CoefVector {
    pub fn dense(values: DVector<f64>, intercept: f64) -> Self {
        let p = values.len();
        CoefVector {
            values,
            intercept,
            support: (0..p).collect(),
            n_features: p,
        }
    }

    pub fn zeros(p: usize) -> Self {
        Self::dense(DVector::zeros(p), 0.0)
    }

    pub fn restricted(
        values: DVector<f64>,
        intercept: f64,
        support: Vec<usize>,
        n_features: usize,
    ) -> Result<Self> {
        if values.len() != support.len() {
            return Err(RenetError::DimensionMismatch(format!(
                "{} values for a support of {}",
                values.len(),
                support.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RenetError::InvalidArgument(
                "support indices must be strictly increasing".into(),
            ));
        }
        if support.last().is_some_and(|&j| j >= n_features) {
            return Err(RenetError::InvalidArgument(format!(
                "support index out of range for {n_features} features"
            )));
        }
        Ok(CoefVector {
            values,
            intercept,
            support,
            n_features,
        })
    }

    pub fn is_dense(&self) -> bool {
        self.support.len() == self.n_features
    }

    pub fn to_dense(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_features);
        for (&j, &v) in self.support.iter().zip(self.values.iter()) {
            out[j] = v;
        }
        out
    }

    /// Original indices whose coefficient is nonzero.
    pub fn nonzero_support(&self) -> Vec<usize> {
        self.support
            .iter()
            .zip(self.values.iter())
            .filter(|(_, v)| **v != 0.0)
            .map(|(&j, _)| j)
            .collect()
    }

    pub fn n_nonzero(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// `intercept + x[:, support] · values`, accumulated in support order.
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        linear_predict(x, &self.support, self.values.as_slice(), self.intercept)
    }
}

/// Per-model summary metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub r2: f64,
    pub n_nonzero: usize,
    pub theta_selected: f64,
    pub wall_time_s: f64,
}

/// Column-wise accumulation of `intercept + Σ_k x[:, cols[k]]·values[k]`.
///
/// Every prediction in the crate goes through this routine so that two
/// fits with identical coefficients produce bit-identical predictions.
pub fn linear_predict(
    x: &DMatrix<f64>,
    cols: &[usize],
    values: &[f64],
    intercept: f64,
) -> DVector<f64> {
    let n = x.nrows();
    let mut out = vec![0.0; n];
    let data = x.as_slice();
    for (&j, &b) in cols.iter().zip(values) {
        if b == 0.0 {
            continue;
        }
        let col = &data[j * n..(j + 1) * n];
        for (o, &v) in out.iter_mut().zip(col) {
            *o += v * b;
        }
    }
    DVector::from_iterator(n, out.into_iter().map(|s| intercept + s))
}

pub fn mean_squared_error(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> f64 {
    let n = y_true.len();
    y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r_squared(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(RenetError::DimensionMismatch(format!(
            "y_true has {} entries, y_pred has {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(RenetError::InvalidArgument(
            "r_squared needs at least two observations".into(),
        ));
    }
    let mean = y_true.mean();
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(RenetError::Degenerate("y_true is constant".into()));
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Shape and finiteness checks; returns the dataset unchanged.
pub fn validate_dataset(raw: Dataset) -> Result<Dataset> {
    let (n, p) = raw.x.shape();
    if raw.y.len() != n {
        return Err(RenetError::DimensionMismatch(format!(
            "x has {n} rows but y has {} entries",
            raw.y.len()
        )));
    }
    if raw.feature_names.len() != p
        || raw.categorical_mask.len() != p
        || raw.levels.len() != p
    {
        return Err(RenetError::DimensionMismatch(format!(
            "column metadata does not match {p} columns"
        )));
    }
    if p == 0 {
        return Err(RenetError::DimensionMismatch("no feature columns".into()));
    }
    if n < MIN_ROWS {
        return Err(RenetError::TooFewRows {
            got: n,
            min: MIN_ROWS,
        });
    }
    for j in 0..p {
        for i in 0..n {
            if !raw.x[(i, j)].is_finite() {
                return Err(RenetError::NonFinite { row: i, col: j });
            }
        }
    }
    if let Some(i) = raw.y.iter().position(|v| !v.is_finite()) {
        return Err(RenetError::NonFinite { row: i, col: p });
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r_squared(&v(&[1., 2., 3.]), &v(&[1., 2., 3.])).unwrap(), 1.0);
        assert_eq!(r_squared(&v(&[1., 2., 3.]), &v(&[2., 2., 2.])).unwrap(), 0.0);
        let r = r_squared(&v(&[0., 0., 1., 1.]), &v(&[0.25, 0.25, 0.75, 0.75])).unwrap();
        assert!((r - 0.75).abs() < 1e-15);
    }

    #[test]
    fn r2_errors() {
        assert!(matches!(
            r_squared(&v(&[1., 2.]), &v(&[1.])),
            Err(RenetError::DimensionMismatch(_))
        ));
        assert!(matches!(
            r_squared(&v(&[2., 2., 2.]), &v(&[1., 2., 3.])),
            Err(RenetError::Degenerate(_))
        ));
    }

    #[test]
    fn validate_examples() {
        let x = DMatrix::from_row_slice(3, 2, &[1., 2., 3., 4., 5., 6.]);
        let d = Dataset::new(x.clone(), v(&[1., 2., 3.]));
        assert_eq!(validate_dataset(d.clone()).unwrap(), d);

        let mut bad = x.clone();
        bad[(1, 1)] = f64::NAN;
        assert_eq!(
            validate_dataset(Dataset::new(bad, v(&[1., 2., 3.]))),
            Err(RenetError::NonFinite { row: 1, col: 1 })
        );

        let short = Dataset::new(DMatrix::from_row_slice(2, 1, &[1., 2.]), v(&[1., 2.]));
        assert!(matches!(
            validate_dataset(short),
            Err(RenetError::TooFewRows { got: 2, .. })
        ));

        let mismatched = Dataset::new(x, v(&[1., 2.]));
        assert!(matches!(
            validate_dataset(mismatched),
            Err(RenetError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn restricted_support_must_increase() {
        assert!(CoefVector::restricted(v(&[1., 2.]), 0.0, vec![2, 1], 4).is_err());
        assert!(CoefVector::restricted(v(&[1., 2.]), 0.0, vec![1, 4], 4).is_err());
        let c = CoefVector::restricted(v(&[1., 0.]), 0.5, vec![1, 3], 4).unwrap();
        assert_eq!(c.to_dense().as_slice(), &[0., 1., 0., 0.]);
        assert_eq!(c.nonzero_support(), vec![1]);
    }

    proptest! {
        #[test]
        fn r2_affine_invariant(
            ys in proptest::collection::vec(-10.0f64..10.0, 4..20),
            noise in proptest::collection::vec(-1.0f64..1.0, 20),
            a in 0.1f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let n = ys.len();
            let y = v(&ys);
            prop_assume!(y.variance() > 1e-6);
            let yhat = DVector::from_iterator(n, ys.iter().zip(&noise).map(|(y, e)| y + e));
            let r1 = r_squared(&y, &yhat).unwrap();
            let r2 = r_squared(&y.map(|t| a * t + b), &yhat.map(|t| a * t + b)).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-9);
            prop_assert!(r1 <= 1.0);
        }

        #[test]
        fn r2_of_mean_is_zero(ys in proptest::collection::vec(-10.0f64..10.0, 3..20)) {
            let y = v(&ys);
            prop_assume!(y.variance() > 1e-6);
            let m = DVector::from_element(ys.len(), y.mean());
            prop_assert_eq!(r_squared(&y, &m).unwrap(), 0.0);
        }
    }
}
