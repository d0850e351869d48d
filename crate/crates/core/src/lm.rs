//! Homoskedastic linear models: OLS per candidate model, the stacked
//! covariance Γₙ, and POSI intervals for simultaneous or individual coverage.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ci::{ConfidenceSet, ConstantKind};
use crate::constants::{k_quantile, CorrelationMatrix, PosiConstant};
use crate::design::{submatrix, CandidateModel, CandidateSet, DesignMatrix};
use crate::error::{check_alpha, PosiError, Result};
use crate::linalg::PivotedQr;

#[derive(Debug, Clone, Serialize)]
pub struct LmFit {
    pub model: CandidateModel,
    pub beta_hat: DVector<f64>,
    pub sigma2_hat: f64,
    pub residuals: DVector<f64>,
    /// (X[M]'X[M])⁻¹
    pub gram_inverse: DMatrix<f64>,
}

impl LmFit {
    /// σ̂² · [(X[M]'X[M])⁻¹]ⱼⱼ for each coefficient.
    pub fn variances(&self) -> Vec<f64> {
        self.gram_inverse.diagonal().iter().map(|g| self.sigma2_hat * g).collect()
    }

    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }
}

fn check_response(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.n() {
        return Err(PosiError::DimensionMismatch(format!("{} rows but {} responses", x.n(), y.len())));
    }
    Ok(())
}

/// OLS of y on X[M] with σ̂² = ‖û‖²/(n − |M|).
pub fn ols(x: &DesignMatrix, model: &CandidateModel, y: &DVector<f64>) -> Result<LmFit> {
    check_response(x, y)?;
    let xm = submatrix(x, model)?;
    let (n, m) = xm.shape();
    let qr = PivotedQr::new(&xm);
    qr.require_full_rank()?;
    if n <= m {
        return Err(PosiError::DegenerateDof { n, m });
    }
    let beta_hat = qr.solve(y);
    let residuals = y - &xm * &beta_hat;
    let sigma2_hat = residuals.norm_squared() / (n - m) as f64;
    Ok(LmFit { model: model.clone(), beta_hat, sigma2_hat, residuals, gram_inverse: qr.gram_inverse() })
}

/// β*_M = (X[M]'X[M])⁻¹X[M]'μ.
pub fn target_lm(x: &DesignMatrix, model: &CandidateModel, mu: &DVector<f64>) -> Result<DVector<f64>> {
    check_response(x, mu)?;
    let xm = submatrix(x, model)?;
    let qr = PivotedQr::new(&xm);
    qr.require_full_rank()?;
    Ok(qr.solve(mu))
}

/// E σ̂²_M = σ²(1 + ‖(I − P_M)μ/σ‖²/(n − |M|)).
pub fn sigma2_bias(x: &DesignMatrix, model: &CandidateModel, mu: &DVector<f64>, sigma2: f64) -> Result<f64> {
    check_response(x, mu)?;
    let xm = submatrix(x, model)?;
    let (n, m) = xm.shape();
    let qr = PivotedQr::new(&xm);
    qr.require_full_rank()?;
    if n <= m {
        return Err(PosiError::DegenerateDof { n, m });
    }
    let resid = mu - &xm * qr.solve(mu);
    Ok(sigma2 + resid.norm_squared() / (n - m) as f64)
}

/// The σ²-free part of Γₙ, stored through a factor: block (s, t) = F_s F_tᵀ
/// with F_s F_sᵀ = (X[M_s]'X[M_s])⁻¹.
#[derive(Debug, Clone)]
pub struct GammaBlocks {
    candidates: CandidateSet,
    factor: DMatrix<f64>,
}

impl GammaBlocks {
    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    /// k × r factor of the stacked matrix.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// (X[M_s]'X[M_s])⁻¹X[M_s]'X[M_t](X[M_t]'X[M_t])⁻¹
    pub fn block(&self, s: usize, t: usize) -> DMatrix<f64> {
        let (fs, ft) = (self.rows(s), self.rows(t));
        fs * ft.transpose()
    }

    fn rows(&self, s: usize) -> DMatrix<f64> {
        let off = self.candidates.offsets()[s];
        let len = self.candidates.models()[s].len();
        self.factor.rows(off, len).clone_owned()
    }

    /// The full k × k matrix; only sensible for small k.
    pub fn assemble(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn corr(&self) -> Result<CorrelationMatrix> {
        CorrelationMatrix::from_factor(self.factor.clone())
    }

    /// Factor of Ξₙ: the rows of coefficient `column` in every model.
    fn xi_factor(&self, column: usize) -> Result<DMatrix<f64>> {
        let r = self.factor.ncols();
        let mut out = DMatrix::zeros(self.candidates.len(), r);
        for (s, (m, &off)) in self.candidates.models().iter().zip(self.candidates.offsets()).enumerate() {
            let pos = m.position(column).ok_or_else(|| PosiError::MissingForcedIndex(m.to_string()))?;
            out.row_mut(s).copy_from(&self.factor.row(off + pos));
        }
        Ok(out)
    }
}

pub fn gamma_blocks(x: &DesignMatrix, candidates: &CandidateSet) -> Result<GammaBlocks> {
    candidates.check_bounds(x.p())?;
    // With X = QR of full column rank, every X[M] = Q R[M] and the blocks only
    // depend on R, which keeps the factor at p columns instead of n.
    let full = PivotedQr::new(x.values());
    let base: DMatrix<f64> = if full.is_full_rank() {
        let mut r = DMatrix::zeros(x.p(), x.p());
        for (pos, &orig) in full.perm().iter().enumerate() {
            r.set_column(orig, &full.r().column(pos));
        }
        r
    } else {
        x.values().clone()
    };
    let mut factor = DMatrix::zeros(candidates.k(), base.nrows());
    for (m, &off) in candidates.models().iter().zip(candidates.offsets()) {
        let bm = base.select_columns(m.indices());
        let qr = PivotedQr::new(&bm);
        qr.require_full_rank()?;
        let f = qr.gram_inverse() * bm.transpose();
        factor.rows_mut(off, m.len()).copy_from(&f);
    }
    Ok(GammaBlocks { candidates: candidates.clone(), factor })
}

/// K₁₋α(corr(Γₙ)) for the design and candidate set.
pub fn posi_constant_lm(x: &DesignMatrix, candidates: &CandidateSet, alpha: f64, draws: usize, seed: u64) -> Result<PosiConstant> {
    let g = gamma_blocks(x, candidates)?;
    k_quantile(&g.corr()?, alpha, draws, seed)
}

/// corr(Ξₙ), Ξₙ[s, t] being the entry of block (s, t) for coefficient `column`.
pub fn xi_matrix(x: &DesignMatrix, candidates: &CandidateSet, column: usize) -> Result<CorrelationMatrix> {
    let g = gamma_blocks(x, candidates)?;
    CorrelationMatrix::from_factor(g.xi_factor(column)?)
}

pub fn xi_from_blocks(blocks: &GammaBlocks, column: usize) -> Result<DMatrix<f64>> {
    let f = blocks.xi_factor(column)?;
    Ok(&f * f.transpose())
}

/// β̂ⱼ ± √(σ̂²_M [(X[M]'X[M])⁻¹]ⱼⱼ) · K for every coefficient of the selected model.
pub fn ci_lm(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    alpha: f64,
    selected: &CandidateModel,
    k_const: &PosiConstant,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    let pos = candidates.locate(selected)?;
    let fit = ols(x, &candidates.models()[pos], y)?;
    ci_lm_from_fit(&fit, x, k_const, ConstantKind::PosiGamma)
}

pub fn ci_lm_from_fit(fit: &LmFit, x: &DesignMatrix, constant: &PosiConstant, kind: ConstantKind) -> Result<ConfidenceSet> {
    ConfidenceSet::from_parts(&fit.model, fit.beta_hat.as_slice(), &fit.variances(), constant, kind, Some(x.column_names()))
}

/// Interval for one coefficient (`column`, contained in every candidate) using K₁₋α(corr(Ξₙ)).
pub fn ci_individual(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    alpha: f64,
    selected: &CandidateModel,
    column: usize,
    xi_const: &PosiConstant,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    if let Some(m) = candidates.models().iter().find(|m| !m.contains(column)) {
        return Err(PosiError::MissingForcedIndex(m.to_string()));
    }
    let pos = candidates.locate(selected)?;
    let fit = ols(x, &candidates.models()[pos], y)?;
    let full = ci_lm_from_fit(&fit, x, xi_const, ConstantKind::PosiXi)?;
    let j = fit.model.position(column).expect("checked above");
    Ok(ConfidenceSet { intervals: vec![full.intervals[j].clone()], ..full })
}

/// Memoizes K₁₋α(corr(Γₙ)) by a hash of the design, candidates, level, draws and seed.
#[derive(Debug, Default)]
pub struct ConstantCache {
    slots: Mutex<HashMap<u64, Arc<OnceLock<PosiConstant>>>>,
}

impl ConstantCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(
        &self,
        x: &DesignMatrix,
        candidates: &CandidateSet,
        alpha: f64,
        draws: usize,
        seed: u64,
    ) -> Result<PosiConstant> {
        let key = content_key(x, candidates, alpha, draws, seed);
        let slot = self.slots.lock().expect("cache lock").entry(key).or_default().clone();
        if let Some(c) = slot.get() {
            return Ok(c.clone());
        }
        let c = posi_constant_lm(x, candidates, alpha, draws, seed)?;
        Ok(slot.get_or_init(|| c).clone())
    }
}

fn content_key(x: &DesignMatrix, candidates: &CandidateSet, alpha: f64, draws: usize, seed: u64) -> u64 {
    let mut h = DefaultHasher::new();
    x.n().hash(&mut h);
    x.p().hash(&mut h);
    for v in x.values().iter() {
        v.to_bits().hash(&mut h);
    }
    candidates.models().hash(&mut h);
    alpha.to_bits().hash(&mut h);
    draws.hash(&mut h);
    seed.hash(&mut h);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::assemble_generic_ci;
    use crate::constants::ConstantMethod;
    use crate::design::enumerate_subsets;
    use crate::special::two_sided_z;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DesignMatrix {
        DesignMatrix::from_matrix(DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap()
    }

    fn model(idx: &[usize]) -> CandidateModel {
        CandidateModel::new(idx.to_vec()).unwrap()
    }

    #[test]
    fn ols_examples() {
        let x = DesignMatrix::from_matrix(DMatrix::from_element(4, 1, 1.0)).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let fit = ols(&x, &model(&[0]), &y).unwrap();
        assert_relative_eq!(fit.beta_hat[0], 2.5, epsilon = 1e-14);
        assert_relative_eq!(fit.sigma2_hat, 5.0 / 3.0, epsilon = 1e-14);

        let id = DesignMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(ols(&id, &model(&[0, 1, 2]), &y.rows(0, 3).into()), Err(PosiError::DegenerateDof { .. })));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(10, 3, &mut rng);
        let y = x.values() * DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let fit = ols(&x, &model(&[0, 1, 2]), &y).unwrap();
        assert!(fit.residuals.amax() < 1e-12);
        assert!(fit.sigma2_hat < 1e-24);
    }

    #[test]
    fn ols_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian(25, 4, &mut rng);
        let y = DVector::from_fn(25, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fit = ols(&x, &model(&[1, 3]), &y).unwrap();
        let xm = submatrix(&x, &model(&[1, 3])).unwrap();
        let ortho = xm.tr_mul(&fit.residuals);
        assert!(ortho.amax() <= 1e-8 * xm.norm() * fit.residuals.norm());
        assert_eq!(fit.sigma2_hat, fit.residuals.norm_squared() / 23.0);
    }

    #[test]
    fn target_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian(20, 3, &mut rng);
        let b0 = DVector::from_vec(vec![1.0, 2.0]);
        let m = model(&[0, 2]);
        let mu = submatrix(&x, &m).unwrap() * &b0;
        assert_relative_eq!(target_lm(&x, &m, &mu).unwrap(), b0, epsilon = 1e-10);

        // μ orthogonal to the span.
        let xm = submatrix(&x, &m).unwrap();
        let z = DVector::from_fn(20, |_, _| rng.sample::<f64, _>(StandardNormal));
        let perp = &z - &xm * PivotedQr::new(&xm).solve(&z);
        assert!(target_lm(&x, &m, &perp).unwrap().amax() < 1e-10);

        // Omitted-variable bias against the normal equations.
        let mu = x.values() * DVector::from_vec(vec![1.0, -1.0, 2.0]);
        let oracle = (xm.transpose() * &xm).try_inverse().unwrap() * xm.transpose() * &mu;
        assert_relative_eq!(target_lm(&x, &m, &mu).unwrap(), oracle, epsilon = 1e-10);
    }

    #[test]
    fn sigma2_bias_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gaussian(12, 3, &mut rng);
        let m = model(&[0, 1]);
        let xm = submatrix(&x, &m).unwrap();
        let mu = &xm * DVector::from_vec(vec![0.3, 0.7]);
        assert_relative_eq!(sigma2_bias(&x, &m, &mu, 2.5).unwrap(), 2.5, epsilon = 1e-12);

        let z = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal));
        let perp = &z - &xm * PivotedQr::new(&xm).solve(&z);
        let perp = perp.normalize() * (10.0_f64).sqrt();
        assert_relative_eq!(sigma2_bias(&x, &m, &perp, 1.0).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma_block_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian(30, 3, &mut rng);
        let c = enumerate_subsets(3, 1, 3, &[]).unwrap();
        let g = gamma_blocks(&x, &c).unwrap();
        for s in 0..c.len() {
            let xs = submatrix(&x, &c.models()[s]).unwrap();
            let gs = (xs.transpose() * &xs).try_inverse().unwrap();
            assert_relative_eq!(g.block(s, s), gs, epsilon = 1e-10);
            for t in 0..c.len() {
                assert_relative_eq!(g.block(s, t), g.block(t, s).transpose(), epsilon = 1e-12);
                let xt = submatrix(&x, &c.models()[t]).unwrap();
                let gt = (xt.transpose() * &xt).try_inverse().unwrap();
                let direct = &gs * xs.transpose() * &xt * &gt;
                assert_relative_eq!(g.block(s, t), direct, epsilon = 1e-10);
            }
        }
        let corr = g.corr().unwrap().entries();
        for i in 0..c.k() {
            assert_relative_eq!(corr[(i, i)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_single_model_and_orthogonal_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = gaussian(15, 2, &mut rng);
        let m = model(&[0, 1]);
        let c = CandidateSet::new(vec![m.clone()]).unwrap();
        let xm = x.values();
        let gi = (xm.transpose() * xm).try_inverse().unwrap();
        let expected = CorrelationMatrix::from_covariance(&gi).unwrap().entries();
        assert_relative_eq!(gamma_blocks(&x, &c).unwrap().corr().unwrap().entries(), expected, epsilon = 1e-10);

        let q = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        let xo = DesignMatrix::from_matrix(q).unwrap();
        let c = CandidateSet::new(vec![model(&[0]), model(&[1]), model(&[0, 1])]).unwrap();
        let g = gamma_blocks(&xo, &c).unwrap();
        assert_abs_diff_eq!(g.block(0, 1)[(0, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.block(0, 2)[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.block(0, 2)[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma_matches_simulated_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = gaussian(12, 2, &mut rng);
        let c = CandidateSet::new(vec![model(&[0]), model(&[0, 1])]).unwrap();
        let g = gamma_blocks(&x, &c).unwrap().assemble();
        let reps = 100_000;
        let mut sum = DVector::<f64>::zeros(3);
        let mut sum2 = DMatrix::<f64>::zeros(3, 3);
        let mut draws = Vec::with_capacity(reps);
        for _ in 0..reps {
            let y = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal));
            let a = ols(&x, &model(&[0]), &y).unwrap().beta_hat;
            let b = ols(&x, &model(&[0, 1]), &y).unwrap().beta_hat;
            let v = DVector::from_vec(vec![a[0], b[0], b[1]]);
            sum += &v;
            sum2 += &v * v.transpose();
            draws.push(v);
        }
        let mean = &sum / reps as f64;
        let cov = &sum2 / reps as f64 - &mean * mean.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let prod: Vec<f64> = draws.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).collect();
                let m = prod.iter().sum::<f64>() / reps as f64;
                let sd = (prod.iter().map(|p| (p - m).powi(2)).sum::<f64>() / reps as f64).sqrt();
                let se = sd / (reps as f64).sqrt();
                assert!((cov[(i, j)] - g[(i, j)]).abs() <= 3.0 * se + 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn ci_lm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = gaussian(20, 3, &mut rng);
        let y = DVector::from_fn(20, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = model(&[0, 2]);
        let single = CandidateSet::new(vec![m.clone()]).unwrap();
        let k = posi_constant_lm(&x, &single, 0.1, 200_000, 1).unwrap();
        assert!(k.value > 1.6449 - 0.01 && k.value < 1.9488 + 0.01);

        let one = CandidateSet::new(vec![model(&[1])]).unwrap();
        let k1 = posi_constant_lm(&x, &one, 0.1, 200_000, 1).unwrap();
        assert_abs_diff_eq!(k1.value, two_sided_z(0.1), epsilon = 0.01);
        let naive = PosiConstant::naive(0.1).unwrap();
        let ci = ci_lm(&x, &y, &one, 0.1, &model(&[1]), &naive).unwrap();
        let fit = ols(&x, &model(&[1]), &y).unwrap();
        let se = (fit.sigma2_hat * fit.gram_inverse[(0, 0)]).sqrt();
        assert_relative_eq!(ci.intervals[0].width(), 2.0 * se * two_sided_z(0.1), max_relative = 1e-14);

        let full = enumerate_subsets(3, 1, 3, &[]).unwrap();
        assert!(matches!(
            ci_lm(&x, &y, &single, 0.1, &model(&[1]), &naive),
            Err(PosiError::ModelNotInCandidateSet(_))
        ));
        let kf = posi_constant_lm(&x, &full, 0.1, 20_000, 2).unwrap();
        let ci = ci_lm(&x, &y, &full, 0.1, &m, &kf).unwrap();
        for iv in &ci.intervals {
            assert_relative_eq!(iv.width(), 2.0 * iv.stderr * kf.value, max_relative = 1e-14);
            assert!(iv.lower <= iv.estimate && iv.estimate <= iv.upper);
        }
    }

    #[test]
    fn perfect_fit_gives_zero_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = gaussian(10, 2, &mut rng);
        let y = x.values() * DVector::from_vec(vec![1.0, 1.0]);
        let c = CandidateSet::new(vec![model(&[0, 1])]).unwrap();
        let ci = ci_lm(&x, &y, &c, 0.1, &model(&[0, 1]), &PosiConstant::naive(0.1).unwrap()).unwrap();
        for iv in &ci.intervals {
            assert!(iv.width() < 1e-10);
        }
    }

    #[test]
    fn ci_lm_equals_generic_assembly_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = gaussian(25, 3, &mut rng);
        let y = DVector::from_fn(25, |_, _| rng.sample::<f64, _>(StandardNormal));
        let c = enumerate_subsets(3, 1, 3, &[]).unwrap();
        let k = posi_constant_lm(&x, &c, 0.1, 5000, 3).unwrap();
        let mut theta = Vec::new();
        let mut var = Vec::new();
        for m in c.models() {
            let f = ols(&x, m, &y).unwrap();
            theta.extend(f.beta_hat.iter());
            var.extend(f.variances());
        }
        let generic = assemble_generic_ci(&theta, &c, &var, &k, ConstantKind::PosiGamma).unwrap();
        for (s, m) in c.models().iter().enumerate() {
            let direct = ci_lm(&x, &y, &c, 0.1, m, &k).unwrap();
            for (a, b) in direct.intervals.iter().zip(&generic[s].intervals) {
                assert_eq!(a.lower.to_bits(), b.lower.to_bits());
                assert_eq!(a.upper.to_bits(), b.upper.to_bits());
            }
        }
    }

    #[test]
    fn xi_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = gaussian(40, 4, &mut rng);
        let c = enumerate_subsets(4, 1, 4, &[0]).unwrap();
        let g = gamma_blocks(&x, &c).unwrap();
        let xi = xi_from_blocks(&g, 0).unwrap();
        for s in 0..c.len() {
            for t in 0..c.len() {
                assert_relative_eq!(xi[(s, t)], g.block(s, t)[(0, 0)], epsilon = 1e-14);
            }
        }
        let kg = k_quantile(&g.corr().unwrap(), 0.1, 50_000, 1).unwrap();
        let kx = k_quantile(&xi_matrix(&x, &c, 0).unwrap(), 0.1, 50_000, 1).unwrap();
        assert!(kx.value <= kg.value + 3.0 * kg.mc_std_error);

        let single = CandidateSet::new(vec![model(&[0, 1])]).unwrap();
        let xi1 = xi_matrix(&x, &single, 0).unwrap();
        assert_eq!(xi1.k(), 1);
        let k = k_quantile(&xi1, 0.1, 200_000, 1).unwrap();
        assert_abs_diff_eq!(k.value, two_sided_z(0.1), epsilon = 0.01);

        let all = enumerate_subsets(4, 1, 4, &[]).unwrap();
        assert!(matches!(xi_matrix(&x, &all, 0), Err(PosiError::MissingForcedIndex(_))));
        let y = DVector::from_fn(40, |_, _| rng.sample::<f64, _>(StandardNormal));
        let ci = ci_individual(&x, &y, &c, 0.1, &model(&[0, 2]), 0, &kx).unwrap();
        assert_eq!(ci.intervals.len(), 1);
        assert_eq!(ci.intervals[0].column, 0);
        assert_eq!(ci.constant_kind, ConstantKind::PosiXi);
    }

    #[test]
    fn cache_reuses_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = gaussian(20, 3, &mut rng);
        let c = enumerate_subsets(3, 1, 3, &[]).unwrap();
        let cache = ConstantCache::new();
        let a = cache.get_or_compute(&x, &c, 0.1, 2000, 4).unwrap();
        let b = cache.get_or_compute(&x, &c, 0.1, 2000, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
        cache.get_or_compute(&x, &c, 0.05, 2000, 4).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(a.method, ConstantMethod::MonteCarlo);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn corr_invariant_to_scaling(seed in 0u64..100_000, a in 0.1f64..10.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = gaussian(15, 3, &mut rng);
                let c = enumerate_subsets(3, 1, 3, &[]).unwrap();
                let xs = DesignMatrix::from_matrix(x.values() * a).unwrap();
                let c1 = gamma_blocks(&x, &c).unwrap().corr().unwrap().entries();
                let c2 = gamma_blocks(&xs, &c).unwrap().corr().unwrap().entries();
                prop_assert!((c1 - c2).amax() < 1e-10);
            }

            #[test]
            fn target_idempotent(seed in 0u64..100_000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = gaussian(15, 4, &mut rng);
                let mu = DVector::from_fn(15, |_, _| rng.sample::<f64, _>(StandardNormal));
                let m = model(&[0, 3]);
                let t = target_lm(&x, &m, &mu).unwrap();
                let again = target_lm(&x, &m, &(submatrix(&x, &m).unwrap() * &t)).unwrap();
                prop_assert!((again - t).amax() < 1e-10);
            }

            #[test]
            fn fit_invariants(seed in 0u64..100_000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = gaussian(12, 3, &mut rng);
                let y = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal));
                let m = model(&[0, 2]);
                let f = ols(&x, &m, &y).unwrap();
                let xm = submatrix(&x, &m).unwrap();
                prop_assert!(xm.tr_mul(&f.residuals).amax() <= 1e-8 * xm.norm() * f.residuals.norm());
                prop_assert!(f.sigma2_hat >= 0.0);
                prop_assert_eq!(f.sigma2_hat, f.residuals.norm_squared() / 10.0);
            }
        }
    }
}
