//! POSI critical values: the simultaneous Gaussian quantile K₁₋α(Γ), the
//! universal constant B_α(q, N), and the rank bound connecting them.

use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::parse_f64;
use crate::error::{check_alpha, PosiError, Result};
use crate::special::{beta_quantile, chi2_ln_pdf, chi2_sf, gauss_legendre, regularized_incomplete_beta, two_sided_z};

pub const DEFAULT_DRAWS: usize = 200_000;
pub const MIN_DRAWS: usize = 1000;
pub const DEFAULT_B_TOL: f64 = 1e-4;
pub const QUADRATURE_NODES: usize = 512;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;
const DIAG_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-12;
const CHUNK: usize = 1024;
const MAX_BISECTION: usize = 200;

/// Correlation matrix, stored through a factor F with Γ = F Fᵀ.
///
/// Dense inputs keep their entries and use the symmetric PSD square root.
/// Factored inputs (k can be in the thousands for stacked linear models)
/// never materialize the k × k matrix unless asked.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    factor: DMatrix<f64>,
    entries: Option<DMatrix<f64>>,
    rank: usize,
    zero_variance: Vec<usize>,
}

impl CorrelationMatrix {
    /// Validates a correlation matrix given entrywise.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let k = entries.nrows();
        if k == 0 || entries.ncols() != k {
            return Err(PosiError::DimensionMismatch(format!(
                "correlation matrix must be square and nonempty, got {}×{}",
                k,
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(PosiError::NonPsd("non-finite entry".into()));
        }
        for i in 0..k {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(PosiError::NonPsd(format!("not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        let mut zero_variance = Vec::new();
        for i in 0..k {
            let d = entries[(i, i)];
            if d.abs() <= DIAG_TOL {
                if entries.row(i).iter().any(|v| v.abs() > DIAG_TOL) {
                    return Err(PosiError::NonPsd(format!("zero-variance coordinate {} has nonzero correlations", i + 1)));
                }
                zero_variance.push(i);
            } else if (d - 1.0).abs() > DIAG_TOL {
                return Err(PosiError::InvalidInput(format!("diagonal entry {} is {d}, expected 1", i + 1)));
            }
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        if lmin < -PSD_TOL * lmax.max(0.0) {
            return Err(PosiError::NonPsd(format!("smallest eigenvalue {lmin:.3e}, largest {lmax:.3e}")));
        }
        let tol = k as f64 * lmax * RANK_TOL;
        let rank = eig.eigenvalues.iter().filter(|&&l| l > tol).count();
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        Ok(Self { factor, entries: Some(entries), rank, zero_variance })
    }

    /// corr(Σ) = diag(Σ)^{†/2} Σ diag(Σ)^{†/2}; zero-variance coordinates map to zero rows.
    pub fn from_covariance(sigma: &DMatrix<f64>) -> Result<Self> {
        let k = sigma.nrows();
        if sigma.ncols() != k {
            return Err(PosiError::DimensionMismatch("covariance must be square".into()));
        }
        let scale: Vec<f64> = (0..k)
            .map(|i| {
                let d = sigma[(i, i)];
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut c = DMatrix::from_fn(k, k, |i, j| sigma[(i, j)] * scale[i] * scale[j]);
        for i in 0..k {
            if scale[i] > 0.0 {
                c[(i, i)] = 1.0;
            }
        }
        let c = (&c + c.transpose()) * 0.5;
        Self::new(c)
    }

    /// The correlation of F Fᵀ for an arbitrary k × r matrix F: rows are
    /// rescaled to unit length, zero rows are flagged as zero-variance.
    pub fn from_factor(f: DMatrix<f64>) -> Result<Self> {
        let k = f.nrows();
        if k == 0 || f.ncols() == 0 {
            return Err(PosiError::DimensionMismatch("empty factor".into()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(PosiError::NonPsd("non-finite factor entry".into()));
        }
        let mut factor = f;
        let mut zero_variance = Vec::new();
        for i in 0..k {
            let norm = factor.row(i).norm();
            if norm > 0.0 {
                factor.row_mut(i).scale_mut(1.0 / norm);
            } else {
                zero_variance.push(i);
            }
        }
        let gram = factor.transpose() * &factor;
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let lmax = eig.max();
        let tol = k as f64 * lmax * RANK_TOL;
        let rank = eig.iter().filter(|&&l| l > tol).count();
        Ok(Self { factor, entries: None, rank, zero_variance })
    }

    /// Headerless k × k CSV.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(parse_f64).collect::<Result<_>>()?);
        }
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(PosiError::DimensionMismatch("correlation CSV must be square".into()));
        }
        Self::new(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn k(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn zero_variance(&self) -> &[usize] {
        &self.zero_variance
    }

    /// Γ = F Fᵀ; F is k × r.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Dense entries; assembled from the factor if the matrix was built from one.
    pub fn entries(&self) -> DMatrix<f64> {
        match &self.entries {
            Some(e) => e.clone(),
            None => &self.factor * self.factor.transpose(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantMethod {
    MonteCarlo,
    ClosedForm,
    Bound,
}

/// A computed critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosiConstant {
    pub value: f64,
    pub alpha: f64,
    pub method: ConstantMethod,
    pub mc_std_error: f64,
    pub draws: usize,
    pub seed: u64,
}

impl PosiConstant {
    /// A constant with no Monte-Carlo error.
    pub fn exact(value: f64, alpha: f64, method: ConstantMethod) -> Self {
        Self { value, alpha, method, mc_std_error: 0.0, draws: 0, seed: 0 }
    }

    /// The normal critical value Φ⁻¹(1 − α/2).
    pub fn naive(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::exact(two_sided_z(alpha), alpha, ConstantMethod::ClosedForm))
    }
}

/// 1 − α quantile of ‖Z‖_∞ for Z ~ N(0, corr), by Monte Carlo.
///
/// Draws are generated in fixed chunks, each from its own ChaCha stream of
/// the master seed, so the result does not depend on the thread count.
pub fn k_quantile(corr: &CorrelationMatrix, alpha: f64, draws: usize, seed: u64) -> Result<PosiConstant> {
    check_alpha(alpha)?;
    if draws < MIN_DRAWS {
        return Err(PosiError::InvalidInput(format!("need at least {MIN_DRAWS} draws, got {draws}")));
    }
    let mut maxima = sup_norm_draws(corr.factor(), draws, seed);
    maxima.sort_unstable_by(f64::total_cmp);
    let p = 1.0 - alpha;
    let r = order_index(p, draws);
    let value = maxima[r - 1];
    let m = (draws as f64).sqrt().ceil() as usize;
    let lo = r.saturating_sub(m).max(1);
    let hi = (r + m).min(draws);
    let spacing = maxima[hi - 1] - maxima[lo - 1];
    let mc_std_error = (p * (1.0 - p) * draws as f64).sqrt() * spacing / (hi - lo).max(1) as f64;
    Ok(PosiConstant { value, alpha, method: ConstantMethod::MonteCarlo, mc_std_error, draws, seed })
}

/// 1-based index ⌈p·n⌉ of the p-quantile order statistic.
fn order_index(p: f64, n: usize) -> usize {
    ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// max_i |(F w)_i| for `draws` standard normal vectors w.
fn sup_norm_draws(factor: &DMatrix<f64>, draws: usize, seed: u64) -> Vec<f64> {
    let r = factor.ncols();
    let chunks = draws.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(draws - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let w = DMatrix::<f64>::from_fn(r, len, |_, _| rng.sample(StandardNormal));
            let z = factor * w;
            z.column_iter().map(|col| col.amax()).collect()
        })
        .collect();
    per_chunk.concat()
}

/// B_α(q, N): the smallest t with E[min(1, N·P(B > t²/G²))] ≤ α, where
/// B ~ Beta(1/2, (q−1)/2) and G² ~ χ²_q.
pub fn b_alpha(q: usize, big_n: usize, alpha: f64, tol: f64) -> Result<PosiConstant> {
    check_alpha(alpha)?;
    if q == 0 || big_n == 0 {
        return Err(PosiError::InvalidInput(format!("need q ≥ 1 and N ≥ 1, got q = {q}, N = {big_n}")));
    }
    if !(tol > 0.0) {
        return Err(PosiError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if q == 1 {
        return Ok(PosiConstant::exact(two_sided_z(alpha), alpha, ConstantMethod::ClosedForm));
    }
    let value = b_alpha_real(q as f64, big_n, alpha, tol)?;
    Ok(PosiConstant::exact(value, alpha, ConstantMethod::Bound))
}

/// Bisection on the criterion for real q > 1.
pub(crate) fn b_alpha_real(q: f64, big_n: usize, alpha: f64, tol: f64) -> Result<f64> {
    let crit = Criterion::new(q, big_n)?;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iter = 0;
    while crit.eval(hi)? > alpha {
        lo = hi;
        hi *= 2.0;
        iter += 1;
        if iter >= MAX_BISECTION {
            return Err(PosiError::NoConvergence(format!("could not bracket B for q = {q}, N = {big_n}")));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if crit.eval(mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        iter += 1;
        if iter >= MAX_BISECTION {
            return Err(PosiError::NoConvergence(format!("bisection for B(q = {q}, N = {big_n}) exceeded {MAX_BISECTION} steps")));
        }
    }
    Ok(hi)
}

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(QUADRATURE_NODES))
}

/// C(t) = E_G[min(1, N·S(t²/G²))] with S the Beta(1/2, (q−1)/2) survival.
struct Criterion {
    q: f64,
    n: f64,
    /// S(x*) = 1/N; min(1, N·S(x)) = 1 for x ≤ x*.
    x_star: f64,
    /// Beyond this χ²_q tail probabilities are below 1e-17.
    s_max: f64,
}

impl Criterion {
    fn new(q: f64, big_n: usize) -> Result<Self> {
        let b = 0.5 * (q - 1.0);
        // S(x) = I_{1−x}(b, 1/2)
        let y_star = beta_quantile(b, 0.5, 1.0 / big_n as f64)?;
        let mut s_max = q + 10.0 * (2.0 * q).sqrt() + 10.0;
        while chi2_sf(q, s_max) > 1e-17 {
            s_max *= 1.5;
        }
        Ok(Self { q, n: big_n as f64, x_star: 1.0 - y_star, s_max })
    }

    /// N·S(t²/s), with 1 − t²/s passed in directly to keep precision near s = t².
    fn tail(&self, one_minus_x: f64) -> Result<f64> {
        let b = 0.5 * (self.q - 1.0);
        Ok(self.n * regularized_incomplete_beta(b, 0.5, one_minus_x.clamp(0.0, 1.0))?)
    }

    fn eval(&self, t: f64) -> Result<f64> {
        let t2 = t * t;
        let upper = if self.x_star > 0.0 { t2 / self.x_star } else { f64::INFINITY };
        let upper = upper.min(self.s_max.max(t2));
        // On s > upper the integrand is 1 (or negligible mass beyond s_max).
        let mut total = chi2_sf(self.q, upper);
        let len = upper - t2;
        if len <= 0.0 {
            return Ok(total.min(1.0));
        }
        // s = t² + len·v², v ∈ [0, 1], absorbs the (s − t²)^{(q−1)/2} edge.
        let (nodes, weights) = gl_rule();
        let mut acc = 0.0;
        for (&x, &w) in nodes.iter().zip(weights) {
            let v = 0.5 * (x + 1.0);
            let ds = len * v * v;
            let s = t2 + ds;
            let integrand = self.tail(ds / s)?.min(1.0) * chi2_ln_pdf(self.q, s).exp();
            acc += w * integrand * 2.0 * v * len;
        }
        total += 0.5 * acc;
        Ok(total.min(1.0))
    }
}

/// B_α(rank(Γ), k), which dominates K₁₋α(Γ).
pub fn upper_bound_k(corr: &CorrelationMatrix, alpha: f64) -> Result<PosiConstant> {
    let q = corr.rank().max(1);
    let b = b_alpha(q, corr.k(), alpha, DEFAULT_B_TOL)?;
    Ok(PosiConstant { method: ConstantMethod::Bound, ..b })
}
