//! Dense least-squares helpers built on a Householder QR with column pivoting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{PosiError, Result};

/// Relative eigenvalue cutoff used for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-12;

/// Thin QR factorization `X P = Q R` with column pivoting by remaining norm.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// n × m with orthonormal columns.
    q: DMatrix<f64>,
    /// m × m upper triangular.
    r: DMatrix<f64>,
    /// `perm[j]` is the original column placed at position j.
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let (n, m) = x.shape();
        let mut a = x.clone();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut norms: Vec<f64> = (0..m).map(|j| a.column(j).norm_squared()).collect();
        let kmax = n.min(m);
        let mut vs: Vec<DVector<f64>> = Vec::with_capacity(kmax);
        for k in 0..kmax {
            // Pivot: largest remaining column norm, smallest index on ties.
            let mut best = k;
            for j in k + 1..m {
                if norms[j] > norms[best] {
                    best = j;
                }
            }
            if best != k {
                a.swap_columns(k, best);
                norms.swap(k, best);
                perm.swap(k, best);
            }
            let col = a.view((k, k), (n - k, 1)).clone_owned();
            let alpha = col.norm();
            let mut v = DVector::from_column_slice(col.as_slice());
            if alpha > 0.0 {
                let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
                v[0] += sign * alpha;
                let vnorm = v.norm();
                v /= vnorm;
                let mut sub = a.view_mut((k, k), (n - k, m - k));
                let w = sub.tr_mul(&v);
                sub.ger(-2.0, &v, &w, 1.0);
            } else {
                v.fill(0.0);
            }
            vs.push(v);
            for j in k + 1..m {
                norms[j] = a.view((k + 1, j), (n - k - 1, 1)).norm_squared();
            }
        }
        let r = DMatrix::from_fn(m.min(n), m, |i, j| if i <= j { a[(i, j)] } else { 0.0 });
        // Accumulate thin Q by applying reflectors to the first kmax unit columns.
        let mut q = DMatrix::<f64>::zeros(n, kmax);
        for j in 0..kmax {
            q[(j, j)] = 1.0;
        }
        for k in (0..kmax).rev() {
            let v = &vs[k];
            let mut sub = q.view_mut((k, 0), (n - k, kmax));
            let w = sub.tr_mul(v);
            sub.ger(-2.0, v, &w, 1.0);
        }
        let rank = if kmax == 0 {
            0
        } else {
            let top = r[(0, 0)].abs();
            let tol = (n as f64 * RANK_RTOL).sqrt() * top;
            if top == 0.0 {
                0
            } else {
                (0..kmax).filter(|&i| r[(i, i)].abs() > tol).count()
            }
        };
        PivotedQr { q, r, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ncols(&self) -> usize {
        self.perm.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.ncols()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn require_full_rank(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(PosiError::RankDeficient { rank: self.rank, cols: self.ncols() })
        }
    }

    /// Least-squares coefficients for the original column order.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.tr_mul(y);
        let z = back_substitute(&self.r, &qty);
        self.unpermute(&z)
    }

    fn unpermute(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(z.len());
        for (pos, &orig) in self.perm.iter().enumerate() {
            out[orig] = z[pos];
        }
        out
    }

    /// (X'X)⁻¹ = P R⁻¹ R⁻ᵀ Pᵀ.
    pub fn gram_inverse(&self) -> DMatrix<f64> {
        let rinv = upper_inverse(&self.r);
        let g = &rinv * rinv.transpose();
        let m = self.ncols();
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                out[(self.perm[a], self.perm[b])] = g[(a, b)];
            }
        }
        out
    }

    /// Diagonal of the hat matrix, as squared row norms of Q.
    pub fn leverages(&self) -> DVector<f64> {
        DVector::from_fn(self.q.nrows(), |i, _| self.q.row(i).norm_squared())
    }
}

pub fn back_substitute(r: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = r.ncols();
    let mut x = DVector::zeros(m);
    for i in (0..m).rev() {
        let mut s = b[i];
        for j in i + 1..m {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

pub fn upper_inverse(r: &DMatrix<f64>) -> DMatrix<f64> {
    let m = r.ncols();
    let mut inv = DMatrix::zeros(m, m);
    for c in 0..m {
        let mut e = DVector::zeros(m);
        e[c] = 1.0;
        inv.set_column(c, &back_substitute(r, &e));
    }
    inv
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Solves a symmetric positive definite system by Cholesky; `None` if not PD.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

pub fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            5,
            3,
            &[1.0, 2.0, 0.5, 1.0, -1.0, 3.0, 1.0, 0.0, -2.0, 1.0, 4.0, 1.0, 1.0, 1.5, 0.0],
        )
    }

    #[test]
    fn factorization_reconstructs_permuted_matrix() {
        let x = sample();
        let qr = PivotedQr::new(&x);
        let qrm = qr.q() * qr.r();
        for (pos, &orig) in qr.perm().iter().enumerate() {
            for i in 0..5 {
                assert_relative_eq!(qrm[(i, pos)], x[(i, orig)], epsilon = 1e-12);
            }
        }
        assert_relative_eq!((qr.q().transpose() * qr.q()), DMatrix::identity(3, 3), epsilon = 1e-12);
        assert_eq!(qr.rank(), 3);
    }

    #[test]
    fn solve_matches_normal_equations() {
        let x = sample();
        let y = DVector::from_vec(vec![1.0, 0.0, 2.0, -1.0, 0.5]);
        let beta = PivotedQr::new(&x).solve(&y);
        let xtx = x.transpose() * &x;
        let direct = xtx.clone().try_inverse().unwrap() * x.transpose() * &y;
        assert_relative_eq!(beta, direct, epsilon = 1e-10);
        assert_relative_eq!(PivotedQr::new(&x).gram_inverse(), xtx.try_inverse().unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn detects_rank_deficiency() {
        let mut x = sample();
        let c0 = x.column(0).clone_owned();
        let c1 = x.column(1).clone_owned();
        x.set_column(2, &(c0 * 2.0 - c1));
        let qr = PivotedQr::new(&x);
        assert_eq!(qr.rank(), 2);
        assert!(qr.require_full_rank().is_err());
    }
}
