//! Standardization and cross-fitted target encoding.
//!
//! Standardization uses the population standard deviation so that every
//! retained column satisfies `x_jᵀx_j = n`. Categorical columns are replaced
//! by a single numeric column holding an empirical-Bayes smoothed category
//! mean of the response; rows of the fitting data are encoded out-of-fold.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RenetError, Result};
use crate::model::Dataset;

/// Default number of inner folds for cross-fitted target encoding.
pub const DEFAULT_INNER_FOLDS: usize = 5;

/// Pseudo-count used when the variance decomposition is degenerate.
pub const FALLBACK_PSEUDO_COUNT: f64 = 10.0;

/// Columns whose population std falls below this (relative to the column
/// magnitude) are treated as constant.
const ZERO_VARIANCE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// Number of input columns the params were fitted on.
    pub n_input_cols: usize,
    /// Input column index of every retained column, increasing.
    pub kept: Vec<usize>,
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
    pub y_mean: f64,
    pub dropped: Vec<usize>,
    pub warnings: Vec<String>,
}

impl StandardizationParams {
    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }

    /// Applies the fitted centering and scaling to a matrix with the
    /// original column layout, returning only the retained columns.
    pub fn transform_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_input_cols {
            return Err(RenetError::DimensionMismatch(format!(
                "expected {} columns, got {}",
                self.n_input_cols,
                x.ncols()
            )));
        }
        let n = x.nrows();
        let mut out = DMatrix::zeros(n, self.kept.len());
        for (k, &j) in self.kept.iter().enumerate() {
            let (m, s) = (self.col_means[k], self.col_scales[k]);
            for i in 0..n {
                out[(i, k)] = (x[(i, j)] - m) / s;
            }
        }
        Ok(out)
    }

    /// Maps coefficients fitted on the retained standardized columns back
    /// to the input scale. Returns one coefficient per input column (zero
    /// for dropped columns) and the intercept.
    pub fn to_original(&self, beta_std: &[f64]) -> (Vec<f64>, f64) {
        let mut beta = vec![0.0; self.n_input_cols];
        let mut intercept = self.y_mean;
        for (k, &j) in self.kept.iter().enumerate() {
            let b = beta_std[k] / self.col_scales[k];
            beta[j] = b;
            intercept -= b * self.col_means[k];
        }
        (beta, intercept)
    }
}

fn column_stats(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fit_params(d: &Dataset, scale: bool) -> StandardizationParams {
    let (n, p) = d.x.shape();
    let data = d.x.as_slice();
    let mut params = StandardizationParams {
        n_input_cols: p,
        kept: Vec::with_capacity(p),
        col_means: Vec::with_capacity(p),
        col_scales: Vec::with_capacity(p),
        y_mean: d.y.mean(),
        dropped: Vec::new(),
        warnings: Vec::new(),
    };
    for j in 0..p {
        let (mean, sd) = column_stats(&data[j * n..(j + 1) * n]);
        if scale {
            if sd <= ZERO_VARIANCE_RTOL * mean.abs().max(1.0) {
                params.dropped.push(j);
                params.warnings.push(format!(
                    "column '{}' has zero variance and was dropped",
                    d.feature_names[j]
                ));
                continue;
            }
            params.col_scales.push(sd);
        } else {
            params.col_scales.push(1.0);
        }
        params.kept.push(j);
        params.col_means.push(mean);
    }
    params
}

fn apply_params(d: &Dataset, params: &StandardizationParams) -> Result<Dataset> {
    let x = params.transform_x(&d.x)?;
    let y = d.y.map(|v| v - params.y_mean);
    let keep = |v: &Vec<String>| -> Vec<String> { params.kept.iter().map(|&j| v[j].clone()).collect() };
    Ok(Dataset {
        x,
        y,
        feature_names: keep(&d.feature_names),
        categorical_mask: params.kept.iter().map(|&j| d.categorical_mask[j]).collect(),
        levels: params.kept.iter().map(|&j| d.levels[j].clone()).collect(),
    })
}

/// Centers and scales every column to mean 0 and `x_jᵀx_j = n`, centers
/// `y`, and drops zero-variance columns (recorded in `warnings`).
pub fn standardize_fit_transform(d: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let params = fit_params(d, true);
    if params.kept.is_empty() {
        return Err(RenetError::Degenerate(
            "every column has zero variance".into(),
        ));
    }
    for w in &params.warnings {
        log::warn!("{w}");
    }
    let out = apply_params(d, &params)?;
    Ok((out, params))
}

/// Centering without scaling; no columns are dropped.
pub fn center_fit_transform(d: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let params = fit_params(d, false);
    let out = apply_params(d, &params)?;
    Ok((out, params))
}

/// Smoothed encoding of one categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub column: usize,
    /// Category code → encoded value.
    pub values: BTreeMap<i64, f64>,
    /// Category code → shrinkage weight toward the global mean.
    pub weights: BTreeMap<i64, f64>,
    pub category_means: BTreeMap<i64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEncoder {
    pub columns: Vec<ColumnEncoding>,
    pub global_mean: f64,
}

fn code(v: f64) -> i64 {
    v.round() as i64
}

/// Empirical-Bayes smoothed category means for one column.
///
/// `encoded_c = (1 − B_c)·mean_c + B_c·global_mean` with
/// `B_c = σ²_within / (σ²_within + n_c·σ²_between)`. If either variance is
/// degenerate, `B_c = k / (n_c + k)` with pseudo-count `k`.
pub fn smoothed_encoding(codes: &[f64], y: &[f64], column: usize) -> ColumnEncoding {
    let global_mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut groups: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for (&c, &v) in codes.iter().zip(y) {
        let e = groups.entry(code(c)).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += v;
    }
    let means: BTreeMap<i64, f64> = groups
        .iter()
        .map(|(&c, &(cnt, sum))| (c, sum / cnt as f64))
        .collect();

    let n_total = y.len();
    let n_cats = groups.len();
    let ss_within: f64 = codes
        .iter()
        .zip(y)
        .map(|(&c, &v)| {
            let m = means[&code(c)];
            (v - m) * (v - m)
        })
        .sum();
    let var_within = if n_total > n_cats {
        ss_within / (n_total - n_cats) as f64
    } else {
        0.0
    };
    let var_between = if n_cats >= 2 {
        let mm = means.values().sum::<f64>() / n_cats as f64;
        means.values().map(|m| (m - mm) * (m - mm)).sum::<f64>() / (n_cats - 1) as f64
    } else {
        0.0
    };
    let degenerate = !(var_within > 0.0 && var_between > 0.0);

    let mut values = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for (&c, &(cnt, _)) in &groups {
        let nc = cnt as f64;
        let b = if degenerate {
            FALLBACK_PSEUDO_COUNT / (nc + FALLBACK_PSEUDO_COUNT)
        } else {
            var_within / (var_within + nc * var_between)
        };
        weights.insert(c, b);
        values.insert(c, (1.0 - b) * means[&c] + b * global_mean);
    }
    ColumnEncoding {
        column,
        values,
        weights,
        category_means: means,
    }
}

impl TargetEncoder {
    fn fit(d: &Dataset, rows: &[usize]) -> TargetEncoder {
        let y: Vec<f64> = rows.iter().map(|&i| d.y[i]).collect();
        let global_mean = y.iter().sum::<f64>() / y.len() as f64;
        let columns = (0..d.p())
            .filter(|&j| d.categorical_mask[j])
            .map(|j| {
                let codes: Vec<f64> = rows.iter().map(|&i| d.x[(i, j)]).collect();
                smoothed_encoding(&codes, &y, j)
            })
            .collect();
        TargetEncoder {
            columns,
            global_mean,
        }
    }

    pub fn encode_value(&self, col: &ColumnEncoding, raw: f64) -> f64 {
        col.values
            .get(&code(raw))
            .copied()
            .unwrap_or(self.global_mean)
    }

    /// Replaces categorical columns of `d` with their full-data encodings.
    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        let mut out = d.clone();
        for col in &self.columns {
            let j = col.column;
            if j >= d.p() || !d.categorical_mask[j] {
                return Err(RenetError::DimensionMismatch(format!(
                    "column {j} is not categorical in the supplied data"
                )));
            }
            for i in 0..d.n() {
                out.x[(i, j)] = self.encode_value(col, d.x[(i, j)]);
            }
            out.categorical_mask[j] = false;
            out.levels[j].clear();
        }
        Ok(out)
    }
}

/// Shuffled assignment of `n` rows into `k` folds; fold `f` receives the
/// shuffled positions `f, f+k, f+2k, …`. Depends only on `(n, k, seed)`.
pub fn shuffled_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, &i) in idx.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Cross-fitted target encoding: each row is encoded with statistics from
/// the other `k_inner − 1` folds. The returned encoder holds full-data
/// statistics for transforming held-out rows.
pub fn target_encode_cross_fit(
    d: &Dataset,
    k_inner: usize,
    seed: u64,
) -> Result<(Dataset, TargetEncoder)> {
    if !d.has_categorical() {
        return Err(RenetError::InvalidArgument(
            "no categorical columns to encode".into(),
        ));
    }
    if k_inner < 2 {
        return Err(RenetError::InvalidArgument(format!(
            "k_inner must be >= 2, got {k_inner}"
        )));
    }
    if k_inner > d.n() {
        return Err(RenetError::InvalidArgument(format!(
            "k_inner = {k_inner} exceeds the {} available rows",
            d.n()
        )));
    }
    let n = d.n();
    let folds = shuffled_folds(n, k_inner, seed);
    let mut out = d.clone();
    for (f, held) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let enc = TargetEncoder::fit(d, &train);
        for col in &enc.columns {
            for &i in held {
                out.x[(i, col.column)] = enc.encode_value(col, d.x[(i, col.column)]);
            }
        }
    }
    let full = TargetEncoder::fit(d, &(0..n).collect::<Vec<_>>());
    for col in &full.columns {
        out.categorical_mask[col.column] = false;
        out.levels[col.column].clear();
    }
    Ok((out, full))
}

/// Applies training-split encodings and standardization to held-out rows.
pub fn transform_holdout(
    encoder: Option<&TargetEncoder>,
    params: &StandardizationParams,
    d: &Dataset,
) -> Result<Dataset> {
    if d.p() != params.n_input_cols {
        return Err(RenetError::DimensionMismatch(format!(
            "holdout has {} columns, training had {}",
            d.p(),
            params.n_input_cols
        )));
    }
    let encoded = match encoder {
        Some(e) => e.transform(d)?,
        None => {
            if d.has_categorical() {
                return Err(RenetError::DimensionMismatch(
                    "holdout has categorical columns but no encoder was fitted".into(),
                ));
            }
            d.clone()
        }
    };
    apply_params(&encoded, params)
}

/// How a training split is turned into solver-ready data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreprocessMode {
    /// Target-encode categoricals (cross-fitted) then standardize.
    Standardize { k_inner: usize, seed: u64 },
    /// Subtract column and response means only.
    CenterOnly,
}

/// Fitted preprocessing pipeline for one training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub encoder: Option<TargetEncoder>,
    pub params: StandardizationParams,
}

impl Preprocessor {
    pub fn fit(d: &Dataset, mode: PreprocessMode) -> Result<(Dataset, Preprocessor)> {
        match mode {
            PreprocessMode::Standardize { k_inner, seed } => {
                let (encoded, encoder) = if d.has_categorical() {
                    let k = k_inner.min(d.n());
                    let (e, enc) = target_encode_cross_fit(d, k, seed)?;
                    (e, Some(enc))
                } else {
                    (d.clone(), None)
                };
                let (std, params) = standardize_fit_transform(&encoded)?;
                Ok((std, Preprocessor { encoder, params }))
            }
            PreprocessMode::CenterOnly => {
                if d.has_categorical() {
                    return Err(RenetError::InvalidArgument(
                        "center-only preprocessing expects numeric columns".into(),
                    ));
                }
                let (c, params) = center_fit_transform(d)?;
                Ok((
                    c,
                    Preprocessor {
                        encoder: None,
                        params,
                    },
                ))
            }
        }
    }

    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        transform_holdout(self.encoder.as_ref(), &self.params, d)
    }

    pub fn y_mean(&self) -> f64 {
        self.params.y_mean
    }
}

/// Column `j` as a slice of a column-major matrix.
pub(crate) fn col(x: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = x.nrows();
    &x.as_slice()[j * n..(j + 1) * n]
}
