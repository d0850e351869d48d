//! Scenario configuration for the coverage studies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binreg::Link;
use crate::design::CandidateSet;
use crate::error::{check_alpha, PosiError, Result};
use crate::selectors::{Family, SelectorSpec};

/// Default number of Monte Carlo draws for K inside the harness.
pub const DEFAULT_HARNESS_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    /// Each column is N(0, 1), Bernoulli(1/2) or skew-normal(0, 1, 5) with
    /// probability 1/3, then (optionally centered and) scaled to unit norm.
    Independent {
        #[serde(default = "yes")]
        center: bool,
    },
    /// Gaussian rows with covariance e^{−ρ|i−j|}, columns (optionally
    /// centered and) scaled to unit norm.
    Correlated {
        #[serde(default = "default_decay")]
        rho: f64,
        #[serde(default = "yes")]
        center: bool,
    },
    /// Gaussian rows, unit variances, constant correlation ρ. Not rescaled.
    GaussianRows { rho: f64 },
}

impl DesignSpec {
    pub fn independent() -> Self {
        DesignSpec::Independent { center: true }
    }

    pub fn correlated() -> Self {
        DesignSpec::Correlated { rho: 0.1, center: true }
    }
}

fn yes() -> bool {
    true
}

fn default_decay() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorDist {
    #[default]
    Normal,
    Laplace,
    Uniform,
    SkewNormal {
        #[serde(default = "default_shape")]
        shape: f64,
    },
}

fn default_shape() -> f64 {
    5.0
}

impl ErrorDist {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorDist::Normal => "N",
            ErrorDist::Laplace => "L",
            ErrorDist::Uniform => "U",
            ErrorDist::SkewNormal { .. } => "SN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaPreset {
    /// All zero.
    Zero,
    /// (1, 0, …, 0).
    Sparse,
    /// n^{−1/2}(−1, 1, −1, 1, …).
    Scaled,
    /// Misspecified truth γ = X̄β̄ with the default (p̄, β̄).
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Preset(BetaPreset),
    Explicit(Vec<f64>),
}

/// The true mean uses p̄ ≥ p regressors; the first p are the observed X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Misspec {
    pub p_bar: usize,
    /// Defaults to (−3/2, 3/2, 0) repeated to length p̄.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_bar: Option<Vec<f64>>,
}

impl Misspec {
    pub fn default_dense() -> Self {
        Self { p_bar: 21, beta_bar: None }
    }

    pub fn resolved_beta_bar(&self) -> Vec<f64> {
        self.beta_bar.clone().unwrap_or_else(|| (0..self.p_bar).map(|i| [-1.5, 1.5, 0.0][i % 3]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub scenario_id: String,
    pub n: usize,
    pub p: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub design: DesignSpec,
    #[serde(default)]
    pub error_dist: ErrorDist,
    /// Error scale for the linear model.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub beta: BetaSpec,
    pub family: Family,
    pub selector: SelectorSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misspec: Option<Misspec>,
    /// Link of the true response probabilities and of the working models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<Link>,
    /// Also report naive intervals (normal quantile, model-based variance).
    /// Defaults to on for binary scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive: Option<bool>,
    /// Monte Carlo draws for K (linear models).
    #[serde(default = "default_draws")]
    pub mc_draws: usize,
    /// Candidate models; all non-empty subsets of the p columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateSet>,
}

fn default_id() -> String {
    "scenario".into()
}
fn default_reps() -> usize {
    500
}
fn default_sigma() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.1
}
fn default_draws() -> usize {
    DEFAULT_HARNESS_DRAWS
}

/// Explicit coefficient vectors after resolving presets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedTruth {
    pub beta: Vec<f64>,
    /// (p̄, β̄) when the mean uses extra regressors.
    pub extended: Option<(usize, Vec<f64>)>,
}

impl ResolvedTruth {
    /// Coefficients applied to the generated regressors.
    pub fn mean_coefficients(&self) -> &[f64] {
        match &self.extended {
            Some((_, b)) => b,
            None => &self.beta,
        }
    }

    /// Number of regressors to generate.
    pub fn generated_columns(&self) -> usize {
        self.extended.as_ref().map_or(self.beta.len(), |(p_bar, _)| *p_bar)
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn naive_enabled(&self) -> bool {
        self.naive.unwrap_or(self.family == Family::Bin)
    }

    pub fn link_or_default(&self) -> Link {
        self.link.unwrap_or(Link::Logit)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PosiError::InvalidInput(m));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        check_alpha(self.alpha)?;
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.mc_draws < crate::constants::MIN_DRAWS {
            return bad(format!("mc_draws must be at least {}", crate::constants::MIN_DRAWS));
        }
        match self.design {
            DesignSpec::Correlated { rho, .. } if !(rho.is_finite() && rho >= 0.0) => {
                return bad(format!("correlated design needs rho >= 0, got {rho}"));
            }
            DesignSpec::GaussianRows { rho } if !(rho > -1.0 / (self.p.max(2) as f64 - 1.0) && rho < 1.0) => {
                return bad(format!("equicorrelation {rho} is not a valid correlation for p = {}", self.p));
            }
            _ => {}
        }
        if let ErrorDist::SkewNormal { shape } = self.error_dist {
            if !shape.is_finite() {
                return bad("skew-normal shape must be finite".into());
            }
        }
        if self.family == Family::Lm && self.link.is_some() {
            return bad("link only applies to binary scenarios".into());
        }
        match self.selector.family() {
            Some(f) if f != self.family => {
                return bad(format!("selector {} works with family {f}, scenario is {}", self.selector, self.family));
            }
            _ => {}
        }
        self.selector.validate()?;
        if let Some(c) = &self.candidates {
            c.check_bounds(self.p)?;
        }
        self.resolve_truth()?;
        Ok(())
    }

    pub fn resolve_truth(&self) -> Result<ResolvedTruth> {
        let p = self.p;
        let beta = match &self.beta {
            BetaSpec::Explicit(v) => {
                if v.len() != p {
                    return Err(PosiError::DimensionMismatch(format!("beta has {} entries for p = {p}", v.len())));
                }
                v.clone()
            }
            BetaSpec::Preset(BetaPreset::Zero) => vec![0.0; p],
            BetaSpec::Preset(BetaPreset::Sparse) => (0..p).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect(),
            BetaSpec::Preset(BetaPreset::Scaled) => {
                let s = 1.0 / (self.n as f64).sqrt();
                (0..p).map(|j| if j % 2 == 0 { -s } else { s }).collect()
            }
            BetaSpec::Preset(BetaPreset::Dense) => {
                let m = self.misspec.clone().unwrap_or_else(Misspec::default_dense);
                let bar = m.resolved_beta_bar();
                bar.iter().take(p).cloned().chain(std::iter::repeat(0.0)).take(p).collect()
            }
        };
        let dense = matches!(self.beta, BetaSpec::Preset(BetaPreset::Dense));
        let misspec = match (&self.misspec, dense) {
            (Some(m), _) => Some(m.clone()),
            (None, true) => Some(Misspec::default_dense()),
            (None, false) => None,
        };
        let extended = match misspec {
            None => None,
            Some(m) => {
                if m.p_bar < p {
                    return Err(PosiError::InvalidInput(format!("p_bar = {} is smaller than p = {p}", m.p_bar)));
                }
                let bar = m.resolved_beta_bar();
                if bar.len() != m.p_bar {
                    return Err(PosiError::DimensionMismatch(format!(
                        "beta_bar has {} entries for p_bar = {}",
                        bar.len(),
                        m.p_bar
                    )));
                }
                Some((m.p_bar, bar))
            }
        };
        if self.misspec.is_some() && !dense {
            return Err(PosiError::InvalidInput("a misspecified truth needs beta = \"dense\"".into()));
        }
        Ok(ResolvedTruth { beta, extended })
    }
}

/// A config file holds one scenario or a list of them.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    One(Box<ScenarioConfig>),
    Many(Vec<ScenarioConfig>),
}

pub fn load_scenarios_str(s: &str) -> Result<Vec<ScenarioConfig>> {
    let list = match serde_json::from_str::<ConfigFile>(s) {
        Ok(ConfigFile::One(c)) => vec![*c],
        Ok(ConfigFile::Many(v)) => v,
        // Re-parse as a single scenario for a precise error message.
        Err(_) => vec![serde_json::from_str::<ScenarioConfig>(s)?],
    };
    if list.is_empty() {
        return Err(PosiError::InvalidInput("config holds no scenarios".into()));
    }
    for c in &list {
        c.validate()?;
    }
    Ok(list)
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<ScenarioConfig>> {
    load_scenarios_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> &'static str {
        r#"{"scenario_id":"t","n":50,"p":4,"design":{"kind":"independent"},"beta":"zero","family":"lm",
            "selector":{"kind":"lar_steps","k":2},"seed":7}"#
    }

    #[test]
    fn defaults_fill_in() {
        let c = ScenarioConfig::from_json_str(base()).unwrap();
        assert_eq!(c.reps, 500);
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.error_dist, ErrorDist::Normal);
        assert!(!c.naive_enabled());
        assert_eq!(c.resolve_truth().unwrap().beta, vec![0.0; 4]);
        let back = ScenarioConfig::from_json_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn presets_resolve() {
        let mut c = ScenarioConfig::from_json_str(base()).unwrap();
        c.n = 100;
        c.beta = BetaSpec::Preset(BetaPreset::Scaled);
        assert_eq!(c.resolve_truth().unwrap().beta, vec![-0.1, 0.1, -0.1, 0.1]);
        c.beta = BetaSpec::Preset(BetaPreset::Sparse);
        assert_eq!(c.resolve_truth().unwrap().beta, vec![1.0, 0.0, 0.0, 0.0]);
        c.beta = BetaSpec::Preset(BetaPreset::Dense);
        let t = c.resolve_truth().unwrap();
        let (p_bar, bar) = t.extended.clone().unwrap();
        assert_eq!(p_bar, 21);
        assert_eq!(&bar[..6], &[-1.5, 1.5, 0.0, -1.5, 1.5, 0.0]);
        assert_eq!(t.beta, vec![-1.5, 1.5, 0.0, -1.5]);
        assert_eq!(t.generated_columns(), 21);
    }

    #[test]
    fn invalid_configs() {
        let edit = |from: &str, to: &str| ScenarioConfig::from_json_str(&base().replace(from, to));
        assert!(edit(r#""beta":"zero""#, r#""beta":[1,2]"#).is_err());
        assert!(edit(r#""seed":7"#, r#""seed":7,"reps":0"#).is_err());
        assert!(edit(r#""seed":7"#, r#""seed":7,"alpha":1.5"#).is_err());
        assert!(edit(r#""family":"lm""#, r#""family":"bin""#).is_err());
        assert!(edit(r#""seed":7"#, r#""seed":7,"bogus":1"#).is_err());
        assert!(edit(r#""kind":"independent""#, r#""kind":"gaussian_rows","rho":1.2"#).is_err());
        assert!(edit(r#""beta":"zero""#, r#""beta":"dense""#).is_ok());
    }

    #[test]
    fn config_files_hold_one_or_many() {
        assert_eq!(load_scenarios_str(base()).unwrap().len(), 1);
        assert_eq!(load_scenarios_str(&format!("[{},{}]", base(), base())).unwrap().len(), 2);
        assert!(load_scenarios_str("[]").is_err());
        assert!(load_scenarios_str("{").is_err());
    }
}
