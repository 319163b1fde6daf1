use crate::error::{Error, Result};
use crate::numerics::{cholesky, cholesky_inverse, equilibrated_rcond, Matrix};

use super::design::Design;

/// Reciprocal condition number below which a design counts as collinear.
pub const RCOND_THRESHOLD: f64 = 1e-10;

/// Weighted least-squares solution.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    pub coefficients: Vec<f64>,
    /// `sqrt(s² · [(XᵀWX)⁻¹]_jj)`.
    pub std_errors: Vec<f64>,
    /// `(XᵀWX)⁻¹`, not yet scaled by `s²`.
    pub cov_unscaled: Matrix,
    pub residuals: Vec<f64>,
    /// Weighted residual mean square `Σ wᵢ rᵢ² / df`.
    pub sigma2: f64,
    pub df: usize,
    pub rcond: f64,
}

/// `β̂ = (XᵀWX)⁻¹XᵀWy` for a dense design.
pub fn wls_fit(x: &Matrix, y: &[f64], weights: &[f64]) -> Result<WlsFit> {
    wls_fit_design(&Design::from_matrix(x), y, weights)
}

pub fn wls_fit_design(design: &Design, y: &[f64], weights: &[f64]) -> Result<WlsFit> {
    let n = design.rows();
    let p = design.cols();
    if y.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows, y has {}, weights have {}",
            y.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Domain("weights must be positive and finite".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    if n <= p {
        return Err(Error::Domain(format!(
            "{n} rows leave no residual degrees of freedom for {p} columns"
        )));
    }
    let (xtx, xty) = design.cross_products(y, weights);
    let (inv, rcond) = scaled_inverse(&xtx)?;
    let coefficients = inv.mul_vec(&xty)?;

    let mut residuals = Vec::with_capacity(n);
    let mut ssr = 0.0;
    for i in 0..n {
        let r = y[i] - design.dot_row(i, &coefficients);
        ssr += weights[i] * r * r;
        residuals.push(r);
    }
    let df = n - p;
    let sigma2 = ssr / df as f64;
    let std_errors = inv.diagonal().iter().map(|v| (sigma2 * v).sqrt()).collect();
    Ok(WlsFit {
        coefficients,
        std_errors,
        cov_unscaled: inv,
        residuals,
        sigma2,
        df,
        rcond,
    })
}

/// Inverse of an SPD cross-product matrix through its unit-diagonal scaling,
/// so the pivot floor and condition test are independent of column units.
fn scaled_inverse(a: &Matrix) -> Result<(Matrix, f64)> {
    let p = a.rows();
    let diag = a.diagonal();
    if diag.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::CollinearDesign { rcond: 0.0 });
    }
    let s: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut scaled = a.clone();
    for i in 0..p {
        for j in 0..p {
            scaled[(i, j)] *= s[i] * s[j];
        }
    }
    let l = match cholesky(&scaled) {
        Ok(l) => l,
        Err(Error::NotPositiveDefinite { .. }) => return Err(Error::CollinearDesign { rcond: 0.0 }),
        Err(e) => return Err(e),
    };
    let mut inv = cholesky_inverse(&l);
    let rcond = equilibrated_rcond(&scaled, &inv);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::CollinearDesign { rcond });
    }
    for i in 0..p {
        for j in 0..p {
            inv[(i, j)] *= s[i] * s[j];
        }
    }
    Ok((inv, rcond))
}
