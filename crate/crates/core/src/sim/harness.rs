//! The replication loop: generate data, select, build intervals, score
//! coverage of the model-specific target.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ResolvedTruth, ScenarioConfig};
use super::generators::{gen_design, gen_errors};
use super::report::{ProcedureRow, SimulationReport};
use crate::binreg::{
    ci_bin_from_fit, fit_mle, naive_ci_bin_from_fit, posi_constant_bin_dims, pseudo_target, Link, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::ci::{ConfidenceSet, ConstantKind};
use crate::constants::PosiConstant;
use crate::design::{enumerate_subsets, CandidateModel, CandidateSet, DesignMatrix};
use crate::error::{PosiError, Result};
use crate::lm::{ci_lm_from_fit, ols, posi_constant_lm, target_lm};
use crate::selectors::{Family, SelectionResult, Selector};

/// Why a replication contributed nothing to a procedure's coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    SelectionFailed,
    MleNonexistent,
    FitFailed,
    TargetFailed,
    ConstantFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Recorded { covered: bool, simultaneous: bool, length: f64 },
    Skipped(SkipReason),
}

struct Context<'a> {
    config: &'a ScenarioConfig,
    truth: ResolvedTruth,
    candidates: CandidateSet,
    selector: &'a dyn Selector,
    steps: Option<usize>,
    naive: bool,
    link: Link,
    /// B for binary scenarios depends only on (k, p, α).
    bin_constant: Option<PosiConstant>,
}

impl Context<'_> {
    fn n_models(&self) -> usize {
        self.steps.unwrap_or(1)
    }

    fn labels(&self) -> Vec<String> {
        let kinds: &[&str] = if self.naive { &["posi", "naive"] } else { &["posi"] };
        let mut out = Vec::new();
        for kind in kinds {
            match self.steps {
                Some(k) => out.extend((1..=k).map(|s| format!("{kind}@step{s}"))),
                None => out.push(kind.to_string()),
            }
        }
        out
    }
}

/// Runs the scenario with its configured selector on the current rayon pool.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationReport> {
    run_scenario_with(config, &config.selector)
}

/// Runs the scenario on a dedicated pool of `threads` workers.
pub fn run_scenario_threads(config: &ScenarioConfig, threads: usize) -> Result<SimulationReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PosiError::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| run_scenario(config))
}

/// Runs the scenario with an arbitrary selector in place of `config.selector`.
pub fn run_scenario_with(config: &ScenarioConfig, selector: &dyn Selector) -> Result<SimulationReport> {
    config.validate()?;
    let start = Instant::now();
    let truth = config.resolve_truth()?;
    let link = config.link_or_default();
    let mut candidates = match &config.candidates {
        Some(c) => c.clone(),
        None => enumerate_subsets(config.p, 1, config.p, &[])?,
    };
    if config.family == Family::Bin {
        candidates = candidates.with_link(link);
    }
    config.selector.validate_for(config.p, &candidates)?;
    let bin_constant = match config.family {
        Family::Bin => Some(posi_constant_bin_dims(config.n, config.p, &candidates, config.alpha)?),
        Family::Lm => None,
    };
    let ctx = Context {
        config,
        truth,
        candidates,
        selector,
        steps: if config.family == Family::Lm { selector.path_steps() } else { None },
        naive: config.naive_enabled(),
        link,
        bin_constant,
    };
    let outcomes: Vec<Vec<Outcome>> = (0..config.reps).into_par_iter().map(|rep| replicate(&ctx, rep)).collect();
    let rows = ctx
        .labels()
        .into_iter()
        .enumerate()
        .map(|(i, label)| ProcedureRow::aggregate(label, outcomes.iter().map(|o| o[i])))
        .collect();
    Ok(SimulationReport {
        scenario_id: config.scenario_id.clone(),
        seed: config.seed,
        reps: config.reps,
        rows,
        truth: ctx.truth.clone(),
        config: config.clone(),
        wall_time: start.elapsed(),
    })
}

/// The replication RNG: the master seed on stream `rep`, so each replication
/// sees the same numbers whatever the scheduling.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn score(ci: &ConfidenceSet, target: &DVector<f64>, focus: usize) -> Outcome {
    let iv = &ci.intervals[focus];
    Outcome::Recorded {
        covered: iv.covers(target[focus]),
        simultaneous: ci.covers_all(target.as_slice()),
        length: iv.width(),
    }
}

/// (model, focus position) for each reported step.
fn reported_models(ctx: &Context, sel: &SelectionResult) -> Vec<(CandidateModel, usize)> {
    match ctx.steps {
        Some(k) => (0..k)
            .map(|s| {
                let m = &sel.trace[s].model;
                let entered = if s == 0 {
                    m.indices()[0]
                } else {
                    let prev = &sel.trace[s - 1].model;
                    *m.indices().iter().find(|j| !prev.contains(**j)).expect("path grows by one")
                };
                (m.clone(), m.position(entered).expect("entered column is in the model"))
            })
            .collect(),
        None => vec![(sel.selected.clone(), sel.focus_coef.unwrap_or(0))],
    }
}

fn replicate(ctx: &Context, rep: usize) -> Vec<Outcome> {
    let cfg = ctx.config;
    let mut rng = replication_rng(cfg.seed, rep);
    let generated = gen_design(&cfg.design, cfg.n, ctx.truth.generated_columns(), &mut rng);
    let x = if ctx.truth.extended.is_some() { generated.leading_columns(cfg.p) } else { generated.clone() };
    let mean = generated.values() * DVector::from_column_slice(ctx.truth.mean_coefficients());
    let n_rows = ctx.labels().len();
    let skip_all = |r| vec![Outcome::Skipped(r); n_rows];
    let per_kind = ctx.n_models();

    match cfg.family {
        Family::Lm => {
            let u = gen_errors(&cfg.error_dist, cfg.n, &mut rng);
            let k_seed: u64 = rng.random();
            let y = &mean + u * cfg.sigma;
            let sel = match select_in(ctx, &x, &y) {
                Some(s) => s,
                None => return skip_all(SkipReason::SelectionFailed),
            };
            let models = reported_models(ctx, &sel);
            let k_const = posi_constant_lm(&x, &ctx.candidates, cfg.alpha, cfg.mc_draws, k_seed).ok();
            let naive_const = PosiConstant::naive(cfg.alpha).expect("validated alpha");
            let mut out = vec![Outcome::Skipped(SkipReason::FitFailed); n_rows];
            for (s, (model, focus)) in models.iter().enumerate() {
                let (Ok(fit), Ok(target)) = (ols(&x, model, &y), target_lm(&x, model, &mean)) else {
                    continue;
                };
                out[s] = match &k_const {
                    Some(k) => ci_lm_from_fit(&fit, &x, k, ConstantKind::PosiGamma)
                        .map_or(Outcome::Skipped(SkipReason::FitFailed), |ci| score(&ci, &target, *focus)),
                    None => Outcome::Skipped(SkipReason::ConstantFailed),
                };
                if ctx.naive {
                    out[per_kind + s] = ci_lm_from_fit(&fit, &x, &naive_const, ConstantKind::Naive)
                        .map_or(Outcome::Skipped(SkipReason::FitFailed), |ci| score(&ci, &target, *focus));
                }
            }
            out
        }
        Family::Bin => {
            let prob = mean.map(|g| ctx.link.h(g));
            let y = prob.map(|pi| if rng.random::<f64>() < pi { 1.0 } else { 0.0 });
            let sel = match select_in(ctx, &x, &y) {
                Some(s) => s,
                None => return skip_all(SkipReason::SelectionFailed),
            };
            let (model, focus) = reported_models(ctx, &sel).remove(0);
            let fit = match fit_mle(&y, &x, &model, ctx.link, DEFAULT_TOL, DEFAULT_MAX_ITER) {
                Ok(f) if !f.exists => return skip_all(SkipReason::MleNonexistent),
                Ok(f) if f.converged => f,
                _ => return skip_all(SkipReason::FitFailed),
            };
            let Ok(target) = pseudo_target(&prob, &x, &model, ctx.link, 0.0) else {
                return skip_all(SkipReason::TargetFailed);
            };
            let b = ctx.bin_constant.as_ref().expect("set for binary scenarios");
            let mut out = vec![ci_bin_from_fit(&fit, &x, &y, b)
                .map_or(Outcome::Skipped(SkipReason::FitFailed), |ci| score(&ci, &target, focus))];
            if ctx.naive {
                out.push(
                    naive_ci_bin_from_fit(&fit, &x, cfg.alpha)
                        .map_or(Outcome::Skipped(SkipReason::FitFailed), |ci| score(&ci, &target, focus)),
                );
            }
            out
        }
    }
}

/// Runs the selector and maps its choice onto the candidate set.
fn select_in(ctx: &Context, x: &DesignMatrix, y: &DVector<f64>) -> Option<SelectionResult> {
    let mut sel = ctx.selector.select(x, y, &ctx.candidates).ok()?;
    let pos = ctx.candidates.locate(&sel.selected).ok()?;
    sel.selected = ctx.candidates.models()[pos].clone();
    if let Some(k) = ctx.steps {
        if sel.trace.len() < k {
            return None;
        }
        for t in &mut sel.trace[..k] {
            t.model = ctx.candidates.models()[ctx.candidates.locate(&t.model).ok()?].clone();
        }
    }
    Some(sel)
}

/// Skip counts keyed by reason, for the report.
pub(crate) fn count_skips(outcomes: impl Iterator<Item = Outcome>) -> BTreeMap<SkipReason, usize> {
    let mut m = BTreeMap::new();
    for o in outcomes {
        if let Outcome::Skipped(r) = o {
            *m.entry(r).or_insert(0) += 1;
        }
    }
    m
}
