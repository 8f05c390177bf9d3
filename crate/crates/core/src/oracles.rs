//! Analytical ground truths for the relaxed estimator.
//!
//! Everything here is closed-form and independent of the coordinate-descent
//! code path, so it can be used to check the solver and relaxation stages.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{RenetError, Result};
use crate::solver::soft_threshold;

/// Coordinate `j` of the relaxed estimate under `XᵀX = nI`:
/// `sgn(b)·(|b| − θλα)₊ / (1 + θλ(1−α))` with `b` the OLS coefficient.
pub fn closed_form_renet(beta_ols: f64, lambda: f64, alpha: f64, theta: f64) -> f64 {
    let t = theta * lambda;
    soft_threshold(beta_ols, t * alpha) / (1.0 + t * (1.0 - alpha))
}

/// Fraction of the OLS magnitude retained by a surviving coordinate,
/// `(1 − θλα/|b|) / (1 + θλ(1−α))`.
pub fn recovery_ratio(theta: f64, lambda: f64, alpha: f64, abs_beta_ols: f64) -> Result<f64> {
    let t = theta * lambda;
    if !(abs_beta_ols > t * alpha) {
        return Err(RenetError::Domain(format!(
            "coordinate does not survive: |b| = {abs_beta_ols} <= θλα = {}",
            t * alpha
        )));
    }
    Ok((1.0 - t * alpha / abs_beta_ols) / (1.0 + t * (1.0 - alpha)))
}

/// Upper bound on `|β̂_i − β̂_j|` for standardized columns with sample
/// correlation `rho`: `‖y‖₂·√(2(1−ρ)) / (θλ(1−α))`.
pub fn grouping_bound(theta: f64, lambda: f64, alpha: f64, y_norm: f64, rho: f64) -> Result<f64> {
    let ridge = theta * lambda * (1.0 - alpha);
    if !(ridge > 0.0) {
        return Err(RenetError::Domain(
            "grouping bound needs θλ(1−α) > 0".into(),
        ));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(RenetError::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(y_norm * (2.0 * (1.0 - rho)).max(0.0).sqrt() / ridge)
}

/// Penalty weights of the stabilized-Lasso form on the `n`-scaled
/// objective: `(ridge, lasso) = (nθλ(1−α), 2nθλα)`.
///
/// These are the weights obtained by multiplying the relaxed objective
/// `(1/2n)‖y − Xβ‖² + θλ(α‖β‖₁ + (1−α)/2‖β‖²)` by `2n`.
pub fn stabilized_weights(n: usize, lambda: f64, alpha: f64, theta: f64) -> (f64, f64) {
    let nl = n as f64 * theta * lambda;
    (nl * (1.0 - alpha), 2.0 * nl * alpha)
}

/// Factor relating the two minimizers: `argmin J = (1 + nθλ(1−α))·β̂`.
pub fn stabilized_rescale(n: usize, lambda: f64, alpha: f64, theta: f64) -> f64 {
    1.0 + stabilized_weights(n, lambda, alpha, theta).0
}

/// Stabilized-Lasso objective
///
/// `J(β) = βᵀ((XᵀX + λ₂I)/(1 + λ₂))β − 2yᵀXβ + λ₁‖β‖₁`
///
/// with `(λ₂, λ₁)` from [`stabilized_weights`]. Under this convention the
/// minimizer of `J` is the relaxed estimate scaled by
/// [`stabilized_rescale`]; at `θ = 0` the quadratic form is `XᵀX` and the
/// minimizer is OLS.
pub fn stabilized_objective(
    beta: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    theta: f64,
) -> f64 {
    let (ridge, lasso) = stabilized_weights(x.nrows(), lambda, alpha, theta);
    let xb = x * beta;
    let quad = (xb.norm_squared() + ridge * beta.norm_squared()) / (1.0 + ridge);
    quad - 2.0 * y.dot(&xb) + lasso * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// `n × p` design with centered columns and `QᵀQ = nI`, built by
/// orthonormalizing a centered Gaussian matrix and scaling by `√n`.
/// Also returns the generator for drawing noise from the same stream.
pub fn orthogonal_design(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, ChaCha20Rng) {
    assert!(p < n, "orthogonal design needs p < n");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut g: DMatrix<f64> = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    for j in 0..p {
        let m = g.column(j).mean();
        g.column_mut(j).add_scalar_mut(-m);
    }
    let q = g.qr().q() * (n as f64).sqrt();
    (q, rng)
}

#[derive(Debug, Clone)]
pub struct OrthogonalFixture {
    pub n: usize,
    pub p: usize,
    pub q: DMatrix<f64>,
    pub beta_true: DVector<f64>,
    pub sigma: f64,
    pub y: DVector<f64>,
}

impl OrthogonalFixture {
    /// `y = Qβ + σε`, centered.
    pub fn generate(n: usize, beta_true: DVector<f64>, sigma: f64, seed: u64) -> Self {
        let p = beta_true.len();
        let (q, mut rng) = orthogonal_design(n, p, seed);
        let mut y = &q * &beta_true;
        for v in y.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * e;
        }
        let m = y.mean();
        y.add_scalar_mut(-m);
        OrthogonalFixture {
            n,
            p,
            q,
            beta_true,
            sigma,
            y,
        }
    }

    /// `(1/n)Qᵀy`.
    pub fn beta_ols(&self) -> DVector<f64> {
        self.q.tr_mul(&self.y) / self.n as f64
    }

    /// `‖(1/n)QᵀQ − I‖∞`.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.q.tr_mul(&self.q) / self.n as f64;
        (g - DMatrix::identity(self.p, self.p)).amax()
    }
}
