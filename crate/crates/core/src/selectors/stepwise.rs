//! Least angle regression and greedy forward stepwise selection.

use nalgebra::{DMatrix, DVector};

use super::{check_response, SelectionResult, TraceEntry};
use crate::design::{CandidateModel, DesignMatrix};
use crate::error::{PosiError, Result};

/// Relative slack under which two step lengths or gains count as tied.
const TIE_RTOL: f64 = 1e-12;

fn check_steps(x: &DesignMatrix, y: &DVector<f64>, k: usize) -> Result<()> {
    check_response(x, y)?;
    if k == 0 {
        return Err(PosiError::InvalidInput("k must be at least 1".into()));
    }
    if k > x.p() {
        return Err(PosiError::KTooLarge { k, p: x.p() });
    }
    Ok(())
}

fn finish(active: &[usize], trace: Vec<TraceEntry>) -> Result<SelectionResult> {
    let selected = CandidateModel::from_unsorted(active.to_vec())?;
    let last = *active.last().expect("k >= 1");
    Ok(SelectionResult { focus_coef: selected.position(last), selected, trace })
}

/// Plain LAR (no lasso modification) run until `k` variables are active.
/// Ties at entry go to the smallest column index. Columns are used as given.
pub fn lar_steps(x: &DesignMatrix, y: &DVector<f64>, k: usize) -> Result<SelectionResult> {
    check_steps(x, y, k)?;
    let xv = x.values();
    let p = x.p();
    let gram = xv.tr_mul(xv);
    let mut c = xv.tr_mul(y);
    let mut in_active = vec![false; p];

    let mut first = 0;
    for j in 1..p {
        if c[j].abs() > c[first].abs() * (1.0 + TIE_RTOL) {
            first = j;
        }
    }
    let mut active = vec![first];
    in_active[first] = true;
    let mut trace = vec![TraceEntry::new(CandidateModel::new(vec![first])?, c[first].abs())];

    loop {
        let m = active.len();
        let s: Vec<f64> = active.iter().map(|&j| if c[j] < 0.0 { -1.0 } else { 1.0 }).collect();
        let ga = DMatrix::from_fn(m, m, |a, b| s[a] * s[b] * gram[(active[a], active[b])]);
        let chol = ga.cholesky().ok_or(PosiError::RankDeficient { rank: m - 1, cols: m })?;
        if m == k {
            break;
        }
        let ginv1 = chol.solve(&DVector::from_element(m, 1.0));
        let big_a = 1.0 / ginv1.sum().sqrt();
        let w = ginv1 * big_a;
        // a_j = X_j'u for the equiangular unit vector u = X_A diag(s) w.
        let a = DVector::from_fn(p, |j, _| (0..m).map(|b| gram[(j, active[b])] * s[b] * w[b]).sum::<f64>());
        let cmax = active.iter().map(|&j| c[j].abs()).fold(0.0, f64::max);

        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|&j| !in_active[j]) {
            let mut gamma = f64::INFINITY;
            for (num, den) in [(cmax - c[j], big_a - a[j]), (cmax + c[j], big_a + a[j])] {
                if den > 0.0 {
                    gamma = gamma.min(num.max(0.0) / den);
                }
            }
            if gamma.is_finite() && best.is_none_or(|(_, g)| gamma < g * (1.0 - TIE_RTOL)) {
                best = Some((j, gamma));
            }
        }
        let (j, gamma) = match best {
            Some(b) => b,
            // The equiangular direction never meets another column: all
            // correlations reach zero together. Take the next index.
            None => ((0..p).find(|&j| !in_active[j]).expect("k <= p"), cmax / big_a),
        };
        c -= &a * gamma;
        active.push(j);
        in_active[j] = true;
        trace.push(TraceEntry::new(CandidateModel::from_unsorted(active.clone())?, (cmax - gamma * big_a).max(0.0)));
    }
    finish(&active, trace)
}

/// Adds, `k` times, the column giving the largest drop in residual sum of
/// squares. Ties go to the smallest column index.
pub fn forward_stepwise(x: &DesignMatrix, y: &DVector<f64>, k: usize) -> Result<SelectionResult> {
    check_steps(x, y, k)?;
    let xv = x.values();
    let p = x.p();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut r = y.clone();
    let mut active = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64, DVector<f64>)> = None;
        for j in (0..p).filter(|j| !active.contains(j)) {
            let col = xv.column(j).into_owned();
            let mut z = col.clone();
            // Two Gram–Schmidt passes keep z orthogonal to working precision.
            for _ in 0..2 {
                for q in &basis {
                    z -= q * q.dot(&z);
                }
            }
            let nz = z.norm_squared();
            if nz <= 1e-12 * col.norm_squared() || nz == 0.0 {
                continue;
            }
            let gain = z.dot(&r).powi(2) / nz;
            if best.as_ref().is_none_or(|(_, g, _)| gain > g * (1.0 + TIE_RTOL)) {
                best = Some((j, gain, z));
            }
        }
        let (j, _, z) = best.ok_or(PosiError::RankDeficient { rank: active.len(), cols: active.len() + 1 })?;
        let q = z.normalize();
        r -= &q * q.dot(&r);
        basis.push(q);
        active.push(j);
        trace.push(TraceEntry::new(CandidateModel::from_unsorted(active.clone())?, r.norm_squared()));
    }
    finish(&active, trace)
}
