//! Heteroskedastic linear models: the Eicker (HC0) sandwich and POSI
//! intervals with the conservative constant B_α(min(k, p), k).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ci::{ConfidenceSet, ConstantKind};
use crate::constants::{b_alpha, PosiConstant, DEFAULT_B_TOL};
use crate::design::{submatrix, CandidateModel, CandidateSet, DesignMatrix};
use crate::error::{check_alpha, PosiError, Result};
use crate::linalg::PivotedQr;

#[derive(Debug, Clone, Serialize)]
pub struct EickerFit {
    pub model: CandidateModel,
    pub beta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    /// (X'X)⁻¹X' diag(û²) X(X'X)⁻¹ over the columns of M.
    pub sandwich: DMatrix<f64>,
    pub sigma2_diag: DVector<f64>,
}

/// The rows of A = diag(û) X[M] (X[M]'X[M])⁻¹, so that the sandwich is A'A.
pub fn eicker_factor(xm: &DMatrix<f64>, gram_inverse: &DMatrix<f64>, residuals: &DVector<f64>) -> DMatrix<f64> {
    let mut a = xm * gram_inverse;
    for (i, &u) in residuals.iter().enumerate() {
        a.row_mut(i).scale_mut(u);
    }
    a
}

pub fn eicker_sandwich(x: &DesignMatrix, model: &CandidateModel, y: &DVector<f64>) -> Result<EickerFit> {
    if y.len() != x.n() {
        return Err(PosiError::DimensionMismatch(format!("{} rows but {} responses", x.n(), y.len())));
    }
    let xm = submatrix(x, model)?;
    let qr = PivotedQr::new(&xm);
    qr.require_full_rank()?;
    let beta_hat = qr.solve(y);
    let residuals = y - &xm * &beta_hat;
    let a = eicker_factor(&xm, &qr.gram_inverse(), &residuals);
    let sandwich = a.tr_mul(&a);
    let sigma2_diag = sandwich.diagonal();
    Ok(EickerFit { model: model.clone(), beta_hat, residuals, sandwich, sigma2_diag })
}

/// B_α(min(k, p), k).
pub fn posi_constant_hlm(x: &DesignMatrix, candidates: &CandidateSet, alpha: f64) -> Result<PosiConstant> {
    let k = candidates.k();
    b_alpha(k.min(x.p()), k, alpha, DEFAULT_B_TOL)
}

pub fn ci_hlm(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    alpha: f64,
    selected: &CandidateModel,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    candidates.check_bounds(x.p())?;
    let pos = candidates.locate(selected)?;
    let constant = posi_constant_hlm(x, candidates, alpha)?;
    let fit = eicker_sandwich(x, &candidates.models()[pos], y)?;
    ci_hlm_from_fit(&fit, x, &constant)
}

pub fn ci_hlm_from_fit(fit: &EickerFit, x: &DesignMatrix, constant: &PosiConstant) -> Result<ConfidenceSet> {
    ConfidenceSet::from_parts(
        &fit.model,
        fit.beta_hat.as_slice(),
        fit.sigma2_diag.as_slice(),
        constant,
        ConstantKind::Bound,
        Some(x.column_names()),
    )
}
