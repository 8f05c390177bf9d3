//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Condition number above which a Gram matrix receives ridge jitter.
pub const JITTER_CONDITION: f64 = 1e10;

/// Scaled Gram matrix `XᵀX / n`.
pub fn scaled_gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    x.tr_mul(x) / n
}

/// Cheap condition estimate from a Cholesky factor: `(max Lᵢᵢ / min Lᵢᵢ)²`.
///
/// This is a lower bound on the true 2-norm condition number and is exact
/// for diagonal matrices.
pub fn cholesky_condition_estimate(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let d = l.diagonal();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in d.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo) * (hi / lo)
    }
}

/// Solution of `(G + jitter·I) β = b` for symmetric positive semi-definite
/// `G`. Jitter is added only when `G` fails to factor or its condition
/// estimate exceeds [`JITTER_CONDITION`]. Returns the solution and whether
/// jitter was applied.
pub fn spd_solve_with_jitter(
    g: &DMatrix<f64>,
    b: &DVector<f64>,
    jitter: f64,
) -> Option<(DVector<f64>, bool)> {
    if let Some(chol) = Cholesky::new(g.clone()) {
        if cholesky_condition_estimate(&chol) <= JITTER_CONDITION {
            return Some((chol.solve(b), false));
        }
    }
    if jitter <= 0.0 {
        return None;
    }
    let mut gj = g.clone();
    for i in 0..gj.nrows() {
        gj[(i, i)] += jitter;
    }
    Cholesky::new(gj).map(|c| (c.solve(b), true))
}

/// Whether `XᵀX / n` would need jitter to be solved reliably.
pub fn gram_needs_jitter(x: &DMatrix<f64>) -> bool {
    if x.ncols() >= x.nrows() {
        return true;
    }
    match Cholesky::new(scaled_gram(x)) {
        Some(c) => cholesky_condition_estimate(&c) > JITTER_CONDITION,
        None => true,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}
