//! Penalized-likelihood ranking of candidate models, significance hunting,
//! and the adversarial max-|t| selector.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_response, Family, SelectionResult, TraceEntry};
use crate::binreg::{check_binary, fit_mle, model_based_bin, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::design::{CandidateModel, CandidateSet, DesignMatrix};
use crate::error::{PosiError, Result};
use crate::lm::ols;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedModel {
    /// Index of the model in the candidate set.
    pub position: usize,
    pub model: CandidateModel,
    pub loglik: f64,
    /// loglik − λ|M|.
    pub score: f64,
    /// |β̂ⱼ| / stderrⱼ for each coefficient, with the model-based stderr.
    pub t_stats: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    /// Best first; equal scores keep candidate-set order.
    pub ranked: Vec<RankedModel>,
    /// Models that could not be fitted, with the reason.
    pub skipped: Vec<(CandidateModel, String)>,
}

impl Ranking {
    pub fn trace(&self) -> Vec<TraceEntry> {
        let mut t: Vec<TraceEntry> = self.ranked.iter().map(|r| TraceEntry::new(r.model.clone(), r.score)).collect();
        t.extend(self.skipped.iter().map(|(m, why)| TraceEntry::skipped(m.clone(), why.clone())));
        t
    }
}

/// Maximized log-likelihood and per-coefficient t statistics of one model.
fn fit_stats(x: &DesignMatrix, y: &DVector<f64>, model: &CandidateModel, family: Family) -> Result<(f64, Vec<f64>)> {
    match family {
        Family::Lm => {
            let fit = ols(x, model, y)?;
            let n = x.n() as f64;
            let ll = -0.5 * n * ((2.0 * PI * fit.rss() / n).ln() + 1.0);
            let t = fit.beta_hat.iter().zip(fit.variances()).map(|(b, v)| b.abs() / v.sqrt()).collect();
            Ok((ll, t))
        }
        Family::Bin => {
            let link = model.link_or_default();
            let fit = fit_mle(y, x, model, link, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            if !fit.exists {
                return Err(PosiError::MleNonexistent(model.to_string()));
            }
            if !fit.converged {
                return Err(PosiError::NoConvergence(format!("MLE for {model}")));
            }
            let sb = model_based_bin(&fit, x)?;
            let t = fit.beta_hat.iter().zip(sb.sigma2_diag.iter()).map(|(b, v)| b.abs() / v.sqrt()).collect();
            Ok((fit.loglik, t))
        }
    }
}

fn precheck(x: &DesignMatrix, y: &DVector<f64>, candidates: &CandidateSet, family: Family) -> Result<()> {
    check_response(x, y)?;
    candidates.check_bounds(x.p())?;
    if candidates.is_empty() {
        return Err(PosiError::InvalidInput("empty candidate set".into()));
    }
    if family == Family::Bin {
        check_binary(y)?;
    }
    Ok(())
}

/// Ranks the candidates by maximized log-likelihood minus λ|M| (Gaussian
/// profile likelihood for `lm`, binary quasi-likelihood for `bin`).
pub fn penalized_loglik_rank(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    lambda: f64,
    family: Family,
) -> Result<Ranking> {
    precheck(x, y, candidates, family)?;
    let fits: Vec<_> = candidates.models().par_iter().map(|m| fit_stats(x, y, m, family)).collect();
    let mut ranked = Vec::with_capacity(fits.len());
    let mut skipped = Vec::new();
    for (position, (model, fit)) in candidates.models().iter().zip(fits).enumerate() {
        match fit {
            Ok((loglik, t_stats)) => ranked.push(RankedModel {
                position,
                model: model.clone(),
                loglik,
                score: loglik - lambda * model.len() as f64,
                t_stats,
            }),
            Err(e) => skipped.push((model.clone(), e.to_string())),
        }
    }
    if ranked.is_empty() {
        return Err(PosiError::AllModelsFailed);
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.position.cmp(&b.position)));
    Ok(Ranking { ranked, skipped })
}

/// Among the `n_best` top-ranked models, the (model, coefficient) pair with
/// the largest |t|. Ties go to the better-ranked model, then the smaller j.
pub fn significance_hunting(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    n_best: usize,
    lambda: f64,
    family: Family,
) -> Result<SelectionResult> {
    if n_best == 0 || n_best > candidates.len() {
        return Err(PosiError::InvalidInput(format!("n_best = {n_best} outside 1..={}", candidates.len())));
    }
    let ranking = penalized_loglik_rank(x, y, candidates, lambda, family)?;
    let mut best = (0, 0, f64::NEG_INFINITY);
    for (r, entry) in ranking.ranked.iter().take(n_best).enumerate() {
        for (j, &t) in entry.t_stats.iter().enumerate() {
            if t > best.2 {
                best = (r, j, t);
            }
        }
    }
    let (r, j, _) = best;
    Ok(SelectionResult { selected: ranking.ranked[r].model.clone(), focus_coef: Some(j), trace: ranking.trace() })
}

/// Adversarial selector: among candidates containing `column`, the model in
/// which that coefficient has the largest |t|. Ties keep candidate order.
pub fn max_t(
    x: &DesignMatrix,
    y: &DVector<f64>,
    candidates: &CandidateSet,
    column: usize,
    family: Family,
) -> Result<SelectionResult> {
    precheck(x, y, candidates, family)?;
    let pool: Vec<&CandidateModel> = candidates.models().iter().filter(|m| m.contains(column)).collect();
    if pool.is_empty() {
        return Err(PosiError::InvalidInput(format!("no candidate contains column {}", column + 1)));
    }
    let fits: Vec<_> = pool.par_iter().map(|m| fit_stats(x, y, m, family)).collect();
    let mut trace = Vec::with_capacity(pool.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (m, fit)) in pool.iter().zip(fits).enumerate() {
        match fit {
            Ok((_, t_stats)) => {
                let t = t_stats[m.position(column).expect("filtered")];
                trace.push(TraceEntry::new((*m).clone(), t));
                if best.is_none_or(|(_, b)| t > b) {
                    best = Some((i, t));
                }
            }
            Err(e) => trace.push(TraceEntry::skipped((*m).clone(), e.to_string())),
        }
    }
    let (i, _) = best.ok_or(PosiError::AllModelsFailed)?;
    let selected = pool[i].clone();
    Ok(SelectionResult { focus_coef: selected.position(column), selected, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binreg::{loglik, Link};
    use crate::design::enumerate_subsets;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    fn gaussian_data(n: usize, p: usize, seed: u64) -> (DesignMatrix, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DesignMatrix::from_matrix(DMatrix::from_fn(n, p, |_, _| normal(&mut rng))).unwrap();
        let y = DVector::from_fn(n, |i, _| 0.4 * x.values()[(i, 0)] + normal(&mut rng));
        (x, y)
    }

    fn binary_data(n: usize, p: usize, seed: u64) -> (DesignMatrix, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DesignMatrix::from_matrix(DMatrix::from_fn(n, p, |_, _| normal(&mut rng))).unwrap();
        let y = DVector::from_fn(n, |i, _| {
            let g = x.values()[(i, 0)] - 0.5 * x.values()[(i, 1)];
            if rng.random::<f64>() < Link::Logit.h(g) { 1.0 } else { 0.0 }
        });
        (x, y)
    }

    #[test]
    fn exhaustive_tiny_instance() {
        let (x, y) = gaussian_data(15, 2, 1);
        let c = enumerate_subsets(2, 1, 2, &[]).unwrap();
        let lambda = 1.0;
        // Hand computation: every (model, j) statistic.
        let mut rows = Vec::new();
        for (pos, m) in c.models().iter().enumerate() {
            let xm = crate::design::submatrix(&x, m).unwrap();
            let g = (xm.transpose() * &xm).try_inverse().unwrap();
            let b = &g * xm.transpose() * &y;
            let rss = (&y - &xm * &b).norm_squared();
            let ll = -7.5 * ((2.0 * PI * rss / 15.0).ln() + 1.0);
            let s2 = rss / (15 - m.len()) as f64;
            for j in 0..m.len() {
                rows.push((ll - lambda * m.len() as f64, pos, j, b[j].abs() / (s2 * g[(j, j)]).sqrt()));
            }
        }
        for n_best in 1..=3 {
            let mut scores: Vec<(f64, usize)> = rows.iter().map(|r| (r.0, r.1)).collect();
            scores.dedup();
            scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let top: Vec<usize> = scores.iter().take(n_best).map(|s| s.1).collect();
            let best = rows
                .iter()
                .filter(|r| top.contains(&r.1))
                .max_by(|a, b| a.3.total_cmp(&b.3))
                .unwrap();
            let got = significance_hunting(&x, &y, &c, n_best, lambda, Family::Lm).unwrap();
            assert_eq!(got.selected, c.models()[best.1]);
            assert_eq!(got.focus_coef, Some(best.2));
        }
    }

    #[test]
    fn n_best_one_is_the_penalized_winner() {
        let (x, y) = gaussian_data(40, 4, 2);
        let c = enumerate_subsets(4, 1, 4, &[]).unwrap();
        let rank = penalized_loglik_rank(&x, &y, &c, 2.0, Family::Lm).unwrap();
        let got = significance_hunting(&x, &y, &c, 1, 2.0, Family::Lm).unwrap();
        let top = &rank.ranked[0];
        assert_eq!(got.selected, top.model);
        let j = (0..top.t_stats.len()).max_by(|&a, &b| top.t_stats[a].total_cmp(&top.t_stats[b])).unwrap();
        assert_eq!(got.focus_coef, Some(j));
        assert_eq!(got.trace.len(), c.len());
    }

    #[test]
    fn nested_models_rank_monotonically_without_penalty() {
        for family in [Family::Lm, Family::Bin] {
            let (x, y) = if family == Family::Lm { gaussian_data(60, 4, 3) } else { binary_data(120, 4, 3) };
            let c = enumerate_subsets(4, 1, 4, &[]).unwrap();
            let rank = penalized_loglik_rank(&x, &y, &c, 0.0, family).unwrap();
            let place = |m: &CandidateModel| rank.ranked.iter().position(|r| &r.model == m).unwrap();
            for a in c.models() {
                for b in c.models() {
                    if a.len() < b.len() && a.indices().iter().all(|j| b.contains(*j)) {
                        assert!(place(b) < place(a), "{family}: {b} ranked below {a}");
                    }
                }
            }
        }
    }

    #[test]
    fn huge_penalty_orders_by_size_then_likelihood() {
        let (x, y) = gaussian_data(50, 4, 4);
        let c = enumerate_subsets(4, 1, 4, &[]).unwrap();
        let rank = penalized_loglik_rank(&x, &y, &c, 1e6, Family::Lm).unwrap();
        for w in rank.ranked.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(a.model.len() < b.model.len() || (a.model.len() == b.model.len() && a.loglik >= b.loglik));
        }
    }

    #[test]
    fn binary_ranking_agrees_with_direct_likelihoods() {
        let (x, y) = binary_data(150, 3, 5);
        let c = enumerate_subsets(3, 1, 3, &[]).unwrap();
        let rank = penalized_loglik_rank(&x, &y, &c, 1.5, Family::Bin).unwrap();
        for r in &rank.ranked {
            let fit = fit_mle(&y, &x, &r.model, Link::Logit, 1e-10, 200).unwrap();
            let direct = loglik(&y, &x, &r.model, Link::Logit, &fit.beta_hat).unwrap();
            assert!((r.loglik - direct).abs() < 1e-8);
            assert!((r.score - (direct - 1.5 * r.model.len() as f64)).abs() < 1e-8);
        }
        assert!(rank.ranked.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn separated_models_are_skipped_with_a_note() {
        // Column 0 separates y perfectly; column 1 is noise.
        let x0 = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
        let x1 = [0.3, -0.2, 0.9, 0.1, -0.7, 0.4, 0.2, -0.5];
        let x = DesignMatrix::from_matrix(DMatrix::from_columns(&[
            DVector::from_column_slice(&x0),
            DVector::from_column_slice(&x1),
        ]))
        .unwrap();
        let y = DVector::from_iterator(8, x0.iter().map(|&v| (v > 0.0) as u8 as f64));
        let c = enumerate_subsets(2, 1, 2, &[]).unwrap();
        let rank = penalized_loglik_rank(&x, &y, &c, 0.0, Family::Bin).unwrap();
        assert_eq!(rank.ranked.len(), 1);
        assert_eq!(rank.ranked[0].model.indices(), &[1]);
        assert_eq!(rank.skipped.len(), 2);
        let sel = significance_hunting(&x, &y, &c, 3, 0.0, Family::Bin).unwrap();
        assert!(sel.trace.iter().filter(|t| t.note.is_some()).count() == 2);

        let only_sep = CandidateSet::new(vec![CandidateModel::new(vec![0]).unwrap()]).unwrap();
        assert!(matches!(
            penalized_loglik_rank(&x, &y, &only_sep, 0.0, Family::Bin),
            Err(PosiError::AllModelsFailed)
        ));
    }

    #[test]
    fn max_t_picks_largest_statistic_for_the_column() {
        let (x, y) = gaussian_data(40, 4, 6);
        let c = enumerate_subsets(4, 1, 4, &[]).unwrap();
        let got = max_t(&x, &y, &c, 0, Family::Lm).unwrap();
        assert_eq!(got.focus_column(), Some(0));
        let mut best = f64::NEG_INFINITY;
        for m in c.models().iter().filter(|m| m.contains(0)) {
            let f = ols(&x, m, &y).unwrap();
            let t = f.beta_hat[m.position(0).unwrap()].abs() / f.variances()[m.position(0).unwrap()].sqrt();
            best = best.max(t);
        }
        let chosen = got.trace.iter().find(|t| t.model == got.selected).unwrap().value;
        assert!((chosen - best).abs() < 1e-12);
    }

    #[test]
    fn parallel_ranking_is_reproducible() {
        let (x, y) = binary_data(100, 5, 7);
        let c = enumerate_subsets(5, 1, 5, &[]).unwrap();
        let a = penalized_loglik_rank(&x, &y, &c, 2.0, Family::Bin).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| penalized_loglik_rank(&x, &y, &c, 2.0, Family::Bin).unwrap());
        assert_eq!(a, b);
    }
}
