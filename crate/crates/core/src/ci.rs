//! Per-coefficient confidence intervals for a selected model.

use serde::{Deserialize, Serialize};

use crate::constants::PosiConstant;
use crate::design::{CandidateModel, CandidateSet};
use crate::error::{PosiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantKind {
    PosiGamma,
    PosiXi,
    Bound,
    Naive,
}

/// One coefficient's interval. `column` is 0-based in memory and 1-based in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "one_based")]
    pub column: usize,
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub stderr: f64,
    pub constant: f64,
}

impl Interval {
    /// estimate ± √variance · constant.
    pub fn new(column: usize, name: String, estimate: f64, variance: f64, constant: f64) -> Self {
        let stderr = variance.max(0.0).sqrt();
        let half = stderr * constant;
        Self { column, name, estimate, lower: estimate - half, upper: estimate + half, stderr, constant }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub model: CandidateModel,
    pub level: f64,
    pub intervals: Vec<Interval>,
    pub constant_kind: ConstantKind,
}

impl ConfidenceSet {
    /// Builds intervals for every coefficient of `model`.
    pub fn from_parts(
        model: &CandidateModel,
        estimates: &[f64],
        variances: &[f64],
        constant: &PosiConstant,
        kind: ConstantKind,
        names: Option<&[String]>,
    ) -> Result<Self> {
        if estimates.len() != model.len() || variances.len() != model.len() {
            return Err(PosiError::DimensionMismatch(format!(
                "model has {} coefficients, got {} estimates and {} variances",
                model.len(),
                estimates.len(),
                variances.len()
            )));
        }
        let intervals = model
            .indices()
            .iter()
            .enumerate()
            .map(|(j, &col)| Interval::new(col, column_name(names, col), estimates[j], variances[j], constant.value))
            .collect();
        Ok(Self { model: model.clone(), level: 1.0 - constant.alpha, intervals, constant_kind: kind })
    }

    /// Whether each interval covers the matching entry of `target`.
    pub fn covers(&self, target: &[f64]) -> Vec<bool> {
        self.intervals.iter().zip(target).map(|(iv, &t)| iv.covers(t)).collect()
    }

    pub fn covers_all(&self, target: &[f64]) -> bool {
        target.len() == self.intervals.len() && self.covers(target).into_iter().all(|c| c)
    }

    pub fn interval_for_column(&self, column: usize) -> Option<&Interval> {
        self.intervals.iter().find(|iv| iv.column == column)
    }
}

pub(crate) fn column_name(names: Option<&[String]>, col: usize) -> String {
    names.and_then(|n| n.get(col).cloned()).unwrap_or_else(|| format!("x{}", col + 1))
}

/// Generic assembly θ̂_{ρ(M)+j} ± √ν̂²_{ρ(M)+j} · K for every model of the set.
pub fn assemble_generic_ci(
    theta_hat: &[f64],
    candidates: &CandidateSet,
    variances: &[f64],
    constant: &PosiConstant,
    kind: ConstantKind,
) -> Result<Vec<ConfidenceSet>> {
    let k = candidates.k();
    if theta_hat.len() != k || variances.len() != k {
        return Err(PosiError::DimensionMismatch(format!(
            "stacked dimension is {k}, got {} estimates and {} variances",
            theta_hat.len(),
            variances.len()
        )));
    }
    if let Some(v) = variances.iter().find(|v| !(**v >= 0.0)) {
        return Err(PosiError::InvalidInput(format!("variance {v} is negative")));
    }
    candidates
        .models()
        .iter()
        .zip(candidates.offsets())
        .map(|(m, &off)| {
            let r = off..off + m.len();
            ConfidenceSet::from_parts(m, &theta_hat[r.clone()], &variances[r], constant, kind, None)
        })
        .collect()
}

pub(crate) mod one_based {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*v as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let v = u64::deserialize(d)?;
        if v == 0 {
            return Err(serde::de::Error::custom("column indices are 1-based"));
        }
        Ok(v as usize - 1)
    }
}
