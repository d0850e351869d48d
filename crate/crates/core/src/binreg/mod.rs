//! Binary regression with a choice of link: quasi-MLE, sandwich variance,
//! and POSI intervals.

mod fit;
mod link;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use fit::{
    check_binary, fit_mle, hessian, loglik, pseudo_target, score, BinFit, DEFAULT_MAX_ITER, DEFAULT_TAU, DEFAULT_TOL,
    SEPARATION_BETA_NORM, SEPARATION_ETA,
};
pub use link::Link;

use crate::ci::{ConfidenceSet, ConstantKind};
use crate::constants::{b_alpha, PosiConstant, DEFAULT_B_TOL};
use crate::design::{submatrix, CandidateModel, CandidateSet, DesignMatrix};
use crate::error::{check_alpha, PosiError, Result};
use crate::linalg::spd_inverse;

/// S̃ = Ĥ⁻¹ X[M]' diag(û²) X[M] Ĥ⁻¹ and its diagonal.
#[derive(Debug, Clone, Serialize)]
pub struct BinSandwich {
    pub matrix: DMatrix<f64>,
    pub sigma2_diag: DVector<f64>,
}

impl BinSandwich {
    /// Assembled as A'A with A = diag(r) X[M] Ĥ⁻¹.
    fn from_weights(xm: &DMatrix<f64>, hinv: &DMatrix<f64>, r: &[f64]) -> Self {
        let mut a = xm * hinv;
        for (i, &ri) in r.iter().enumerate() {
            a.row_mut(i).scale_mut(ri);
        }
        let matrix = a.tr_mul(&a);
        let sigma2_diag = matrix.diagonal();
        Self { matrix, sigma2_diag }
    }
}

fn fitted_eta(fit: &BinFit, x: &DesignMatrix) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let xm = submatrix(x, &fit.model)?;
    let eta = &xm * &fit.beta_hat;
    Ok((xm, eta))
}

fn hessian_inverse(fit: &BinFit) -> Result<DMatrix<f64>> {
    spd_inverse(&fit.hessian_hat).ok_or(PosiError::SingularHessian)
}

/// Working residuals ûᵢ = ḣ(γ̂ᵢ)/(h(γ̂ᵢ)(1 − h(γ̂ᵢ)))·(yᵢ − h(γ̂ᵢ)).
pub fn working_residuals(fit: &BinFit, y: &DVector<f64>, x: &DesignMatrix) -> Result<DVector<f64>> {
    let (_, eta) = fitted_eta(fit, x)?;
    Ok(DVector::from_iterator(y.len(), y.iter().zip(eta.iter()).map(|(&yi, &g)| fit.link.working_residual(yi, g))))
}

/// Misspecification-robust sandwich estimator.
pub fn sandwich_bin(fit: &BinFit, y: &DVector<f64>, x: &DesignMatrix) -> Result<BinSandwich> {
    if !fit.exists {
        return Err(PosiError::MleNonexistent(fit.model.to_string()));
    }
    let (xm, _) = fitted_eta(fit, x)?;
    let hinv = hessian_inverse(fit)?;
    let r = working_residuals(fit, y, x)?;
    Ok(BinSandwich::from_weights(&xm, &hinv, r.as_slice()))
}

/// Model-based variance S̄: the sandwich with û² replaced by its model
/// expectation (h(1 − h) for the logit link).
pub fn model_based_bin(fit: &BinFit, x: &DesignMatrix) -> Result<BinSandwich> {
    if !fit.exists {
        return Err(PosiError::MleNonexistent(fit.model.to_string()));
    }
    let (xm, eta) = fitted_eta(fit, x)?;
    let hinv = hessian_inverse(fit)?;
    let r: Vec<f64> = eta.iter().map(|&g| fit.link.model_variance(g).sqrt()).collect();
    Ok(BinSandwich::from_weights(&xm, &hinv, &r))
}

/// B_α(min(k, n), k), reduced to B_α(min(k, p), k) when every candidate uses the logit link.
pub fn posi_constant_bin(x: &DesignMatrix, candidates: &CandidateSet, alpha: f64) -> Result<PosiConstant> {
    posi_constant_bin_dims(x.n(), x.p(), candidates, alpha)
}

/// [`posi_constant_bin`] from the design dimensions alone.
pub fn posi_constant_bin_dims(n: usize, p: usize, candidates: &CandidateSet, alpha: f64) -> Result<PosiConstant> {
    let k = candidates.k();
    let rank_cap = if candidates.all_logit() { p } else { n };
    b_alpha(k.min(rank_cap), k, alpha, DEFAULT_B_TOL)
}

fn fit_selected(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    selected: &CandidateModel,
) -> Result<BinFit> {
    let pos = candidates.locate(selected)?;
    let model = &candidates.models()[pos];
    let fit = fit_mle(y, x, model, model.link_or_default(), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    if !fit.exists {
        return Err(PosiError::MleNonexistent(model.to_string()));
    }
    if !fit.converged {
        return Err(PosiError::NoConvergence(format!("MLE for {model} (score norm {:.2e})", fit.score_norm)));
    }
    Ok(fit)
}

/// POSI intervals β̂ⱼ ± √σ̂²ⱼ · B for the selected model.
pub fn ci_bin(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    alpha: f64,
    selected: &CandidateModel,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    candidates.check_bounds(x.p())?;
    let constant = posi_constant_bin(x, candidates, alpha)?;
    let fit = fit_selected(x, y, candidates, selected)?;
    ci_bin_from_fit(&fit, x, y, &constant)
}

pub fn ci_bin_from_fit(fit: &BinFit, x: &DesignMatrix, y: &DVector<f64>, constant: &PosiConstant) -> Result<ConfidenceSet> {
    let sw = sandwich_bin(fit, y, x)?;
    ConfidenceSet::from_parts(
        &fit.model,
        fit.beta_hat.as_slice(),
        sw.sigma2_diag.as_slice(),
        constant,
        ConstantKind::Bound,
        Some(x.column_names()),
    )
}

/// The naive interval: normal quantile and the model-based variance.
pub fn naive_ci_bin(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    alpha: f64,
    selected: &CandidateModel,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    candidates.check_bounds(x.p())?;
    let fit = fit_selected(x, y, candidates, selected)?;
    naive_ci_bin_from_fit(&fit, x, alpha)
}

pub fn naive_ci_bin_from_fit(fit: &BinFit, x: &DesignMatrix, alpha: f64) -> Result<ConfidenceSet> {
    let sb = model_based_bin(fit, x)?;
    ConfidenceSet::from_parts(
        &fit.model,
        fit.beta_hat.as_slice(),
        sb.sigma2_diag.as_slice(),
        &PosiConstant::naive(alpha)?,
        ConstantKind::Naive,
        Some(x.column_names()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ConstantMethod;
    use crate::design::enumerate_subsets;
    use crate::special::two_sided_z;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn logit_data(n: usize, p: usize, seed: u64) -> (DesignMatrix, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DesignMatrix::from_matrix(DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap();
        let beta = DVector::from_fn(p, |i, _| if i == 0 { 0.8 } else { -0.4 });
        let y = (x.values() * beta).map(|g| (rng.random::<f64>() < Link::Logit.h(g)) as u8 as f64);
        (x, y)
    }

    #[test]
    fn sandwich_matches_triple_product() {
        let (x, y) = logit_data(30, 2, 5);
        let m = CandidateModel::new(vec![0, 1]).unwrap();
        let fit = fit_mle(&y, &x, &m, Link::Logit, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let sw = sandwich_bin(&fit, &y, &x).unwrap();
        let xm = x.values();
        let hinv = fit.hessian_hat.clone().try_inverse().unwrap();
        let u = working_residuals(&fit, &y, &x).unwrap();
        let meat = xm.transpose() * DMatrix::from_diagonal(&u.map(|v| v * v)) * xm;
        let oracle = &hinv * meat * &hinv;
        assert_relative_eq!(sw.matrix, oracle, max_relative = 1e-10);
        assert_eq!(sw.sigma2_diag, sw.matrix.diagonal());
    }

    #[test]
    fn canonical_residual_identity_is_exact() {
        let (x, y) = logit_data(40, 3, 8);
        let m = CandidateModel::new(vec![0, 1, 2]).unwrap();
        let fit = fit_mle(&y, &x, &m, Link::Logit, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let u = working_residuals(&fit, &y, &x).unwrap();
        let eta = x.values() * &fit.beta_hat;
        for i in 0..40 {
            assert_eq!(u[i], y[i] - Link::Logit.h(eta[i]));
        }
    }

    #[test]
    fn residuals_finite_on_all_links() {
        let (x, y) = logit_data(50, 2, 13);
        let m = CandidateModel::new(vec![0, 1]).unwrap();
        for link in Link::ALL {
            let fit = fit_mle(&y, &x, &m, link, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(fit.usable());
            assert!(working_residuals(&fit, &y, &x).unwrap().iter().all(|v| v.is_finite()));
        }
        for link in Link::ALL {
            for i in 0..=600 {
                let g = -30.0 + 0.1 * i as f64;
                assert!(link.working_residual(1.0, g).is_finite() && link.working_residual(0.0, g).is_finite());
            }
        }
    }

    #[test]
    fn single_model_posi_and_naive_share_constant() {
        let (x, y) = logit_data(20, 1, 21);
        let m = CandidateModel::new(vec![0]).unwrap();
        let c = CandidateSet::new(vec![m.clone()]).unwrap();
        let posi = ci_bin(&x, &y, &c, 0.1, &m).unwrap();
        let naive = naive_ci_bin(&x, &y, &c, 0.1, &m).unwrap();
        assert_eq!(posi.intervals[0].constant, two_sided_z(0.1));
        assert_eq!(naive.intervals[0].constant, two_sided_z(0.1));
        assert_eq!(posi.intervals[0].estimate, naive.intervals[0].estimate);
        assert_ne!(posi.intervals[0].stderr, naive.intervals[0].stderr);
        assert_eq!(posi.constant_kind, ConstantKind::Bound);
    }

    #[test]
    fn logit_reduction_lowers_the_constant() {
        let (x, _) = logit_data(100, 3, 1);
        let all = enumerate_subsets(3, 1, 3, &[]).unwrap();
        assert!(all.k() > 3);
        let logit = posi_constant_bin(&x, &all.clone().with_link(Link::Logit), 0.1).unwrap();
        let mut mixed_models = all.models().to_vec();
        mixed_models[0] = mixed_models[0].clone().with_link(Link::Probit);
        let mixed = posi_constant_bin(&x, &CandidateSet::new(mixed_models).unwrap(), 0.1).unwrap();
        assert!(logit.value < mixed.value);
        assert_eq!(logit.method, ConstantMethod::Bound);
        // A model without a link is treated as logit.
        assert_eq!(posi_constant_bin(&x, &all, 0.1).unwrap().value, logit.value);
    }

    #[test]
    fn nonexistent_mle_is_reported() {
        let xs = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let x = DesignMatrix::from_matrix(DMatrix::from_column_slice(6, 1, &xs)).unwrap();
        let y = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let m = CandidateModel::new(vec![0]).unwrap();
        let c = CandidateSet::new(vec![m.clone()]).unwrap();
        assert!(matches!(ci_bin(&x, &y, &c, 0.1, &m), Err(PosiError::MleNonexistent(_))));
    }

    #[test]
    fn model_based_variance_is_inverse_information_for_logit() {
        let (x, y) = logit_data(60, 2, 4);
        let m = CandidateModel::new(vec![0, 1]).unwrap();
        let fit = fit_mle(&y, &x, &m, Link::Logit, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let sb = model_based_bin(&fit, &x).unwrap();
        assert_relative_eq!(sb.matrix, fit.hessian_hat.clone().try_inverse().unwrap(), max_relative = 1e-10);
    }
}
