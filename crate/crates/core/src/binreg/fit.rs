//! Quasi-log-likelihood, damped Newton fitting, and the pseudo-target.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Link;
use crate::design::{submatrix, CandidateModel, DesignMatrix};
use crate::error::{PosiError, Result};
use crate::linalg::PivotedQr;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TAU: f64 = 0.01;

/// Linear predictors beyond this size before convergence signal separation.
pub const SEPARATION_ETA: f64 = 30.0;
pub const SEPARATION_BETA_NORM: f64 = 1e6;

const MAX_HALVINGS: usize = 60;

pub fn check_binary(y: &DVector<f64>) -> Result<()> {
    match y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(&v) => Err(PosiError::NonBinaryResponse(v)),
        None => Ok(()),
    }
}

fn check_rows(xm: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if xm.nrows() != y.len() {
        return Err(PosiError::DimensionMismatch(format!("{} rows but {} responses", xm.nrows(), y.len())));
    }
    Ok(())
}

/// ℓ(β) = Σ yᵢφ₁(γᵢ) + (1 − yᵢ)φ₂(γᵢ) with γ = X[M]β.
pub fn loglik(y: &DVector<f64>, x: &DesignMatrix, model: &CandidateModel, link: Link, beta: &DVector<f64>) -> Result<f64> {
    check_binary(y)?;
    let xm = submatrix(x, model)?;
    check_rows(&xm, y)?;
    Ok(loglik_at(&xm, y, link, beta))
}

/// X[M]'c with cᵢ = yᵢφ̇₁(γᵢ) + (1 − yᵢ)φ̇₂(γᵢ).
pub fn score(y: &DVector<f64>, x: &DesignMatrix, model: &CandidateModel, link: Link, beta: &DVector<f64>) -> Result<DVector<f64>> {
    check_binary(y)?;
    let xm = submatrix(x, model)?;
    check_rows(&xm, y)?;
    Ok(score_at(&xm, y, link, &(&xm * beta)))
}

/// H = X[M]'DX[M] with Dᵢᵢ = −yᵢφ̈₁ − (1 − yᵢ)φ̈₂; this is −∇²ℓ.
pub fn hessian(y: &DVector<f64>, x: &DesignMatrix, model: &CandidateModel, link: Link, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_binary(y)?;
    let xm = submatrix(x, model)?;
    check_rows(&xm, y)?;
    Ok(hessian_at(&xm, y, link, &(&xm * beta)))
}

pub(crate) fn loglik_at(xm: &DMatrix<f64>, y: &DVector<f64>, link: Link, beta: &DVector<f64>) -> f64 {
    let eta = xm * beta;
    y.iter().zip(eta.iter()).map(|(&yi, &g)| link.loglik_term(yi, g)).sum()
}

pub(crate) fn score_at(xm: &DMatrix<f64>, y: &DVector<f64>, link: Link, eta: &DVector<f64>) -> DVector<f64> {
    let c = DVector::from_iterator(y.len(), y.iter().zip(eta.iter()).map(|(&yi, &g)| link.working_residual(yi, g)));
    xm.tr_mul(&c)
}

pub(crate) fn hessian_at(xm: &DMatrix<f64>, y: &DVector<f64>, link: Link, eta: &DVector<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = y.iter().zip(eta.iter()).map(|(&yi, &g)| link.curvature(yi, g)).collect();
    weighted_gram(xm, &d)
}

/// X' diag(w) X
pub(crate) fn weighted_gram(xm: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut xw = xm.clone();
    for (i, &wi) in w.iter().enumerate() {
        xw.row_mut(i).scale_mut(wi);
    }
    xm.tr_mul(&xw)
}

#[derive(Debug, Clone, Serialize)]
pub struct BinFit {
    pub model: CandidateModel,
    pub link: Link,
    pub beta_hat: DVector<f64>,
    pub converged: bool,
    /// False when the iterates ran off to infinity (separation).
    pub exists: bool,
    pub loglik: f64,
    /// Ĥ = X[M]'D X[M] at β̂.
    pub hessian_hat: DMatrix<f64>,
    pub iterations: usize,
    pub score_norm: f64,
}

impl BinFit {
    pub fn usable(&self) -> bool {
        self.exists && self.converged
    }
}

/// Damped Newton from β = 0 for the binary quasi-MLE.
pub fn fit_mle(
    y: &DVector<f64>,
    x: &DesignMatrix,
    model: &CandidateModel,
    link: Link,
    tol: f64,
    max_iter: usize,
) -> Result<BinFit> {
    check_binary(y)?;
    let xm = submatrix(x, model)?;
    check_rows(&xm, y)?;
    PivotedQr::new(&xm).require_full_rank()?;
    let out = newton(&xm, y, link, tol, max_iter, true)?;
    Ok(BinFit {
        model: model.clone().with_link(link),
        link,
        beta_hat: out.beta,
        converged: out.converged,
        exists: out.exists,
        loglik: out.loglik,
        hessian_hat: out.hessian,
        iterations: out.iterations,
        score_norm: out.score_norm,
    })
}

pub(crate) struct NewtonOutput {
    pub beta: DVector<f64>,
    pub converged: bool,
    pub exists: bool,
    pub loglik: f64,
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
    pub score_norm: f64,
}

/// Maximizes Σ yᵢφ₁ + (1 − yᵢ)φ₂ for yᵢ ∈ [0, 1]. With `detect_separation`
/// the run stops as soon as the iterates look unbounded.
pub(crate) fn newton(
    xm: &DMatrix<f64>,
    y: &DVector<f64>,
    link: Link,
    tol: f64,
    max_iter: usize,
    detect_separation: bool,
) -> Result<NewtonOutput> {
    let m = xm.ncols();
    let threshold = tol * (1.0 + xm.norm());
    let mut beta = DVector::zeros(m);
    let mut eta = DVector::zeros(xm.nrows());
    let mut ll = loglik_at(xm, y, link, &beta);
    let mut exists = true;
    let mut converged = false;
    let mut iterations = 0;
    let mut score = score_at(xm, y, link, &eta);
    let mut hess = hessian_at(xm, y, link, &eta);
    loop {
        if score.norm() <= threshold {
            converged = true;
            break;
        }
        if detect_separation && (eta.amax() > SEPARATION_ETA || beta.norm() > SEPARATION_BETA_NORM) {
            exists = false;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&score),
            None => {
                if detect_separation {
                    exists = false;
                    break;
                }
                return Err(PosiError::SingularHessian);
            }
        };
        // Allow for rounding in ℓ once the iterates are at the optimum.
        let slack = 1e-13 * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + &step * t;
            let cand_ll = loglik_at(xm, y, link, &cand);
            if cand_ll.is_finite() && cand_ll >= ll - slack {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        eta = xm * &beta;
        score = score_at(xm, y, link, &eta);
        hess = hessian_at(xm, y, link, &eta);
    }
    if detect_separation && !converged && beta.norm() > SEPARATION_BETA_NORM {
        exists = false;
    }
    Ok(NewtonOutput { score_norm: score.norm(), beta, converged, exists, loglik: ll, hessian: hess, iterations })
}

/// The Kullback–Leibler projection β*: maximizer of Σ pᵢφ₁(γᵢ) + (1 − pᵢ)φ₂(γᵢ).
///
/// Probabilities must satisfy pᵢ(1 − pᵢ) ≥ τ; pass τ = 0 to only require pᵢ ∈ (0, 1).
pub fn pseudo_target(
    p: &DVector<f64>,
    x: &DesignMatrix,
    model: &CandidateModel,
    link: Link,
    tau: f64,
) -> Result<DVector<f64>> {
    for &v in p.iter() {
        if !(v > 0.0 && v < 1.0) || v * (1.0 - v) < tau {
            return Err(PosiError::ProbOutOfRange { value: v, tau });
        }
    }
    let xm = submatrix(x, model)?;
    check_rows(&xm, p)?;
    PivotedQr::new(&xm).require_full_rank()?;
    let out = newton(&xm, p, link, 1e-12, 200, false)?;
    if !out.converged {
        return Err(PosiError::NoConvergence(format!("pseudo-target for {model} (score norm {:.2e})", out.score_norm)));
    }
    Ok(out.beta)
}
