//! Design matrices, candidate models, and stacked candidate sets.

use std::fmt;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::binreg::Link;
use crate::error::{PosiError, Result};
use crate::linalg::{sym_eigenvalues, PivotedQr, RANK_RTOL};

/// Default cap on the number of models produced by [`enumerate_subsets`].
pub const DEFAULT_ENUMERATION_CAP: usize = 1 << 20;

/// Hard limit on p for bitmask enumeration.
pub const MAX_ENUMERATION_P: usize = 24;

/// Fixed n × p regressor matrix with column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = values.shape();
        if n == 0 || p == 0 {
            return Err(PosiError::InvalidInput(format!("design must be nonempty, got {n}×{p}")));
        }
        if column_names.len() != p {
            return Err(PosiError::DimensionMismatch(format!(
                "{} column names for {p} columns",
                column_names.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(PosiError::InvalidInput(format!("design entry {v} is not finite")));
        }
        Ok(Self { values, column_names })
    }

    /// Columns named `x1, x2, …`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names)
    }

    /// Reads a CSV whose first row holds column names.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let p = names.len();
        let mut data = Vec::new();
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != p {
                return Err(PosiError::DimensionMismatch(format!(
                    "row {} has {} fields, header has {p}",
                    n + 2,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                data.push(parse_f64(field)?);
            }
            n += 1;
        }
        Self::new(DMatrix::from_row_slice(n, p, &data), names)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// The first `p` columns, names included.
    pub fn leading_columns(&self, p: usize) -> DesignMatrix {
        let p = p.min(self.p());
        DesignMatrix { values: self.values.columns(0, p).into_owned(), column_names: self.column_names[..p].to_vec() }
    }

    /// Index of a column whose entries are all equal and nonzero.
    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.p()).find(|&j| {
            let c = self.values.column(j);
            c[0] != 0.0 && c.iter().all(|&v| v == c[0])
        })
    }
}

/// Reads a response vector: one value per line (first field), with an
/// optional non-numeric header line.
pub fn read_response_csv<R: Read>(reader: R) -> Result<DVector<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0).filter(|f| !f.is_empty()) else { continue };
        match parse_f64(field) {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(PosiError::InvalidInput("response file holds no values".into()));
    }
    Ok(DVector::from_vec(out))
}

pub fn read_response_path(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    read_response_csv(std::fs::File::open(path)?)
}

pub(crate) fn parse_f64(field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| PosiError::InvalidInput(format!("not a number: {field:?}")))
}

/// A working model: a nonempty, strictly increasing set of column indices
/// (0-based internally, 1-based in JSON) and, for binary regression, a link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CandidateModelRepr", into = "CandidateModelRepr")]
pub struct CandidateModel {
    indices: Vec<usize>,
    link: Option<Link>,
}

#[derive(Serialize, Deserialize)]
struct CandidateModelRepr {
    indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link: Option<Link>,
}

impl TryFrom<CandidateModelRepr> for CandidateModel {
    type Error = PosiError;

    fn try_from(r: CandidateModelRepr) -> Result<Self> {
        if r.indices.contains(&0) {
            return Err(PosiError::InvalidInput("model indices are 1-based".into()));
        }
        let mut m = CandidateModel::new(r.indices.iter().map(|i| i - 1).collect())?;
        m.link = r.link;
        Ok(m)
    }
}

impl From<CandidateModel> for CandidateModelRepr {
    fn from(m: CandidateModel) -> Self {
        CandidateModelRepr { indices: m.indices.iter().map(|i| i + 1).collect(), link: m.link }
    }
}

impl CandidateModel {
    /// Builds a model from 0-based indices; they must be nonempty and strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(PosiError::InvalidInput("a candidate model needs at least one regressor".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PosiError::InvalidInput(format!(
                "model indices must be strictly increasing: {indices:?}"
            )));
        }
        Ok(Self { indices, link: None })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices)
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = Some(link);
        self
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn link(&self) -> Option<Link> {
        self.link
    }

    /// Link used for fitting; unlabeled models are logistic.
    pub fn link_or_default(&self) -> Link {
        self.link.unwrap_or(Link::Logit)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, column: usize) -> bool {
        self.indices.binary_search(&column).is_ok()
    }

    /// Position of `column` inside the model.
    pub fn position(&self, column: usize) -> Option<usize> {
        self.indices.binary_search(&column).ok()
    }

    pub fn check_bounds(&self, p: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= p => Err(PosiError::IndexOutOfRange { index: last + 1, p }),
            _ => Ok(()),
        }
    }

    /// Parses `"1,3"` (1-based).
    pub fn parse_one_based(s: &str) -> Result<Self> {
        let idx = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .map(|v| v - 1)
                    .ok_or_else(|| PosiError::InvalidInput(format!("bad model index {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_unsorted(idx)
    }
}

impl fmt::Display for CandidateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", idx.join(","))?;
        if let Some(link) = self.link {
            write!(f, "/{link}")?;
        }
        Ok(())
    }
}

/// Ordered family of candidate models with stacked coordinate offsets.
///
/// Offsets are fixed by construction order: coefficient `j` of model `s`
/// lives at stacked coordinate `offsets[s] + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CandidateSetRepr", into = "CandidateSetRepr")]
pub struct CandidateSet {
    models: Vec<CandidateModel>,
    offsets: Vec<usize>,
    k: usize,
}

#[derive(Serialize, Deserialize)]
struct CandidateSetRepr {
    models: Vec<CandidateModel>,
}

impl TryFrom<CandidateSetRepr> for CandidateSet {
    type Error = PosiError;

    fn try_from(r: CandidateSetRepr) -> Result<Self> {
        CandidateSet::new(r.models)
    }
}

impl From<CandidateSet> for CandidateSetRepr {
    fn from(c: CandidateSet) -> Self {
        CandidateSetRepr { models: c.models }
    }
}

impl CandidateSet {
    pub fn new(models: Vec<CandidateModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(PosiError::InvalidInput("candidate set is empty".into()));
        }
        for (i, m) in models.iter().enumerate() {
            if models[..i].contains(m) {
                return Err(PosiError::InvalidInput(format!("duplicate candidate model {m}")));
            }
        }
        let mut offsets = Vec::with_capacity(models.len());
        let mut k = 0;
        for m in &models {
            offsets.push(k);
            k += m.len();
        }
        Ok(Self { models, offsets, k })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("candidate set serializes")
    }

    /// Attaches `link` to every model.
    pub fn with_link(self, link: Link) -> Self {
        let models = self.models.into_iter().map(|m| m.with_link(link)).collect();
        Self::new(models).expect("relabeling keeps the set valid")
    }

    pub fn models(&self) -> &[CandidateModel] {
        &self.models
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Number of models d.
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Stacked dimension k = Σ |M|.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn position(&self, model: &CandidateModel) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    /// Position of `model`. A query without a link matches any link; otherwise
    /// unlabeled candidates count as logit.
    pub fn locate(&self, model: &CandidateModel) -> Result<usize> {
        self.position(model)
            .or_else(|| {
                self.models.iter().position(|m| {
                    m.indices == model.indices
                        && (model.link.is_none() || m.link_or_default() == model.link_or_default())
                })
            })
            .ok_or_else(|| PosiError::ModelNotInCandidateSet(model.to_string()))
    }

    pub fn check_bounds(&self, p: usize) -> Result<()> {
        self.models.iter().try_for_each(|m| m.check_bounds(p))
    }

    /// True when no model names a link other than logit.
    pub fn all_logit(&self) -> bool {
        self.models.iter().all(|m| m.link_or_default() == Link::Logit)
    }
}

/// Xₙ[M]: the selected columns in index order.
pub fn submatrix(x: &DesignMatrix, model: &CandidateModel) -> Result<DMatrix<f64>> {
    model.check_bounds(x.p())?;
    Ok(x.values.select_columns(model.indices()))
}

/// max_i of the hat-matrix diagonal for X[M].
pub fn leverage_max(x: &DesignMatrix, model: &CandidateModel) -> Result<f64> {
    let xm = submatrix(x, model)?;
    let qr = PivotedQr::new(&xm);
    qr.require_full_rank()?;
    Ok(qr.leverages().max())
}

/// Advisory diagnostics for the design conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct X2Report {
    pub rank: usize,
    pub p: usize,
    /// n · max leverage over all full-rank candidate models.
    pub n_max_leverage: Option<f64>,
    /// λ_max(X'X) / λ_min(X'X); infinite when X'X is singular.
    pub eigen_ratio: f64,
    pub rank_deficient_models: usize,
}

pub fn condition_x2_report(x: &DesignMatrix, candidates: &CandidateSet) -> X2Report {
    let rank = PivotedQr::new(x.values()).rank();
    let mut worst: Option<f64> = None;
    let mut deficient = 0;
    for m in candidates.models() {
        match leverage_max(x, m) {
            Ok(h) => worst = Some(worst.map_or(h, |w| w.max(h))),
            Err(_) => deficient += 1,
        }
    }
    let ev = sym_eigenvalues(&(x.values().transpose() * x.values()));
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    let eigen_ratio = if lo <= hi * RANK_RTOL * x.n() as f64 { f64::INFINITY } else { hi / lo };
    X2Report {
        rank,
        p: x.p(),
        n_max_leverage: worst.map(|h| h * x.n() as f64),
        eigen_ratio,
        rank_deficient_models: deficient,
    }
}

/// All subsets of {0..p} with sizes in `[min_size, max_size]` that contain
/// `forced`, in increasing bitmask order.
pub fn enumerate_subsets(p: usize, min_size: usize, max_size: usize, forced: &[usize]) -> Result<CandidateSet> {
    enumerate_subsets_capped(p, min_size, max_size, forced, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_subsets_capped(
    p: usize,
    min_size: usize,
    max_size: usize,
    forced: &[usize],
    cap: usize,
) -> Result<CandidateSet> {
    if p > MAX_ENUMERATION_P {
        return Err(PosiError::TooLarge(format!("p = {p} exceeds the bitmask limit {MAX_ENUMERATION_P}")));
    }
    if !(1 <= min_size && min_size <= max_size && max_size <= p) {
        return Err(PosiError::InvalidInput(format!(
            "need 1 ≤ min_size ≤ max_size ≤ p, got {min_size}, {max_size}, {p}"
        )));
    }
    let total = (1usize << p) - 1;
    if total > cap {
        return Err(PosiError::TooLarge(format!("2^{p} - 1 = {total} models exceeds cap {cap}")));
    }
    let mut forced_mask = 0usize;
    for &f in forced {
        if f >= p {
            return Err(PosiError::IndexOutOfRange { index: f + 1, p });
        }
        forced_mask |= 1 << f;
    }
    let models = (1..=total)
        .filter(|mask| mask & forced_mask == forced_mask)
        .filter(|mask| (min_size..=max_size).contains(&(mask.count_ones() as usize)))
        .map(|mask| CandidateModel { indices: (0..p).filter(|j| mask >> j & 1 == 1).collect(), link: None })
        .collect::<Vec<_>>();
    CandidateSet::new(models)
}
