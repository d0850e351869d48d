//! Data-driven model selectors: LAR, forward stepwise, lasso-penalized
//! logistic regression, penalized-likelihood ranking and significance
//! hunting, plus an adversarial max-|t| selector used as a stress case.
//!
//! Every selector is a pure function of (X, y, candidates) with a fully
//! specified tie-break, so repeated calls agree bit for bit.

mod hunting;
mod lasso;
mod stepwise;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use hunting::{max_t, penalized_loglik_rank, significance_hunting, RankedModel, Ranking};
pub use lasso::{lasso_logistic, lasso_logistic_fit, LassoFit, LASSO_TOL};
pub use stepwise::{forward_stepwise, lar_steps};

use crate::design::{CandidateModel, CandidateSet, DesignMatrix};
use crate::error::{PosiError, Result};

/// Which likelihood a selector works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lm,
    Bin,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Lm => "lm",
            Family::Bin => "bin",
        })
    }
}

impl FromStr for Family {
    type Err = PosiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lm" => Ok(Family::Lm),
            "bin" => Ok(Family::Bin),
            _ => Err(PosiError::InvalidInput(format!("unknown family '{s}'"))),
        }
    }
}

/// One visited model and the criterion value the selector assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub model: CandidateModel,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TraceEntry {
    pub(crate) fn new(model: CandidateModel, value: f64) -> Self {
        Self { model, value, note: None }
    }

    pub(crate) fn skipped(model: CandidateModel, note: String) -> Self {
        Self { model, value: f64::NAN, note: Some(note) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: CandidateModel,
    /// Position inside `selected` of the coefficient singled out by the selector.
    pub focus_coef: Option<usize>,
    pub trace: Vec<TraceEntry>,
}

impl SelectionResult {
    /// Column index (0-based, in X) of the focus coefficient.
    pub fn focus_column(&self) -> Option<usize> {
        self.focus_coef.map(|j| self.selected.indices()[j])
    }
}

/// Serializable description of a selector, as found in scenario configs.
///
/// ```
/// use posi::selectors::SelectorSpec;
/// let s: SelectorSpec =
///     serde_json::from_str(r#"{"kind":"significance_hunting","n_best":20,"lambda":2,"family":"lm"}"#).unwrap();
/// assert_eq!(s.to_string(), "significance_hunting(n_best=20, lambda=2, lm)");
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectorSpec {
    ForwardStepwise {
        k: usize,
    },
    LarSteps {
        k: usize,
    },
    LassoLogistic {
        lambda: f64,
    },
    SignificanceHunting {
        n_best: usize,
        lambda: f64,
        family: Family,
    },
    PenalizedLoglik {
        lambda: f64,
        family: Family,
    },
    Fixed {
        model: CandidateModel,
    },
    /// Among candidates containing `column` (1-based), the one where its |t| is largest.
    MaxT {
        #[serde(with = "crate::ci::one_based")]
        column: usize,
        family: Family,
    },
}

impl fmt::Display for SelectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectorSpec::ForwardStepwise { k } => write!(f, "forward_stepwise(k={k})"),
            SelectorSpec::LarSteps { k } => write!(f, "lar_steps(k={k})"),
            SelectorSpec::LassoLogistic { lambda } => write!(f, "lasso_logistic(lambda={lambda})"),
            SelectorSpec::SignificanceHunting { n_best, lambda, family } => {
                write!(f, "significance_hunting(n_best={n_best}, lambda={lambda}, {family})")
            }
            SelectorSpec::PenalizedLoglik { lambda, family } => write!(f, "penalized_loglik(lambda={lambda}, {family})"),
            SelectorSpec::Fixed { model } => write!(f, "fixed({model})"),
            SelectorSpec::MaxT { column, family } => write!(f, "max_t(column={}, {family})", column + 1),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(PosiError::InvalidInput(format!("lambda must be finite and non-negative, got {lambda}")))
    }
}

impl SelectorSpec {
    /// Checks the parameters that do not depend on data.
    pub fn validate(&self) -> Result<()> {
        match self {
            SelectorSpec::ForwardStepwise { k } | SelectorSpec::LarSteps { k } if *k == 0 => {
                Err(PosiError::InvalidInput("k must be at least 1".into()))
            }
            SelectorSpec::LassoLogistic { lambda } | SelectorSpec::PenalizedLoglik { lambda, .. } => check_lambda(*lambda),
            SelectorSpec::SignificanceHunting { n_best, lambda, .. } => {
                if *n_best == 0 {
                    return Err(PosiError::InvalidInput("n_best must be at least 1".into()));
                }
                check_lambda(*lambda)
            }
            _ => Ok(()),
        }
    }

    /// Checks the parameters against the design size and candidate set.
    pub fn validate_for(&self, p: usize, candidates: &CandidateSet) -> Result<()> {
        self.validate()?;
        match self {
            SelectorSpec::ForwardStepwise { k } | SelectorSpec::LarSteps { k } if *k > p => {
                Err(PosiError::KTooLarge { k: *k, p })
            }
            SelectorSpec::SignificanceHunting { n_best, .. } if *n_best > candidates.len() => Err(
                PosiError::InvalidInput(format!("n_best = {n_best} exceeds the {} candidate models", candidates.len())),
            ),
            SelectorSpec::Fixed { model } => candidates.locate(model).map(|_| ()),
            SelectorSpec::MaxT { column, .. } if *column >= p => Err(PosiError::IndexOutOfRange { index: column + 1, p }),
            _ => Ok(()),
        }
    }

    /// Whether the selector names a step count, so that every path step
    /// up to `k` is a meaningful procedure of its own.
    pub fn path_steps(&self) -> Option<usize> {
        match self {
            SelectorSpec::ForwardStepwise { k } | SelectorSpec::LarSteps { k } => Some(*k),
            _ => None,
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            SelectorSpec::LassoLogistic { .. } => Some(Family::Bin),
            SelectorSpec::ForwardStepwise { .. } | SelectorSpec::LarSteps { .. } => Some(Family::Lm),
            SelectorSpec::SignificanceHunting { family, .. }
            | SelectorSpec::PenalizedLoglik { family, .. }
            | SelectorSpec::MaxT { family, .. } => Some(*family),
            SelectorSpec::Fixed { .. } => None,
        }
    }
}

/// Anything that maps data to a model. The harness accepts any implementor.
pub trait Selector: Sync {
    fn select(&self, x: &DesignMatrix, y: &DVector<f64>, candidates: &CandidateSet) -> Result<SelectionResult>;

    /// For path selectors, the number of steps whose intermediate models
    /// the trace records (entry s is the model after step s + 1).
    fn path_steps(&self) -> Option<usize> {
        None
    }
}

impl Selector for SelectorSpec {
    fn select(&self, x: &DesignMatrix, y: &DVector<f64>, candidates: &CandidateSet) -> Result<SelectionResult> {
        self.validate_for(x.p(), candidates)?;
        match self {
            SelectorSpec::ForwardStepwise { k } => forward_stepwise(x, y, *k),
            SelectorSpec::LarSteps { k } => lar_steps(x, y, *k),
            SelectorSpec::LassoLogistic { lambda } => lasso_logistic(x, y, *lambda),
            SelectorSpec::SignificanceHunting { n_best, lambda, family } => {
                significance_hunting(x, y, candidates, *n_best, *lambda, *family)
            }
            SelectorSpec::PenalizedLoglik { lambda, family } => {
                let ranking = penalized_loglik_rank(x, y, candidates, *lambda, *family)?;
                let trace = ranking.trace();
                Ok(SelectionResult { selected: ranking.ranked[0].model.clone(), focus_coef: None, trace })
            }
            SelectorSpec::Fixed { model } => {
                let pos = candidates.locate(model)?;
                let selected = candidates.models()[pos].clone();
                Ok(SelectionResult { trace: vec![TraceEntry::new(selected.clone(), 0.0)], selected, focus_coef: None })
            }
            SelectorSpec::MaxT { column, family } => max_t(x, y, candidates, *column, *family),
        }
    }

    fn path_steps(&self) -> Option<usize> {
        SelectorSpec::path_steps(self)
    }
}

/// Wraps a plain function (X, y) → model as a [`Selector`].
pub struct FnSelector<F>(pub F);

impl<F> Selector for FnSelector<F>
where
    F: Fn(&DesignMatrix, &DVector<f64>) -> Result<CandidateModel> + Sync,
{
    fn select(&self, x: &DesignMatrix, y: &DVector<f64>, candidates: &CandidateSet) -> Result<SelectionResult> {
        let m = (self.0)(x, y)?;
        let pos = candidates.locate(&m)?;
        let selected = candidates.models()[pos].clone();
        Ok(SelectionResult { trace: vec![TraceEntry::new(selected.clone(), 0.0)], selected, focus_coef: None })
    }
}

pub(crate) fn check_response(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.n() {
        return Err(PosiError::DimensionMismatch(format!("{} rows but {} responses", x.n(), y.len())));
    }
    Ok(())
}
