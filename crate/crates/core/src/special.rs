//! Special functions: normal distribution tails, the regularized incomplete
//! beta function, and chi-square helpers.

use std::f64::consts::{LN_2, PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{PosiError, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this argument the Mills ratio is evaluated by continued fraction.
const MILLS_CF_THRESHOLD: f64 = 5.0;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile Φ⁻¹(p). Returns ±∞ at the endpoints.
pub fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Two-sided normal critical value Φ⁻¹(1 − α/2).
pub fn two_sided_z(alpha: f64) -> f64 {
    SQRT_2 * erfc_inv(alpha)
}

/// Mills ratio R(z) = (1 − Φ(z)) / φ(z) for z ≥ 0.
pub fn mills_ratio(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < MILLS_CF_THRESHOLD {
        return norm_sf(z) / norm_pdf(z);
    }
    // R(z) = 1/(z + 1/(z + 2/(z + 3/(z + ...)))), evaluated backwards.
    let mut tail = z;
    for k in (1..=80).rev() {
        tail = z + k as f64 / tail;
    }
    1.0 / tail
}

/// Inverse Mills ratio φ(x)/Φ(x), finite for every real x.
pub fn inv_mills(x: f64) -> f64 {
    if x > -MILLS_CF_THRESHOLD {
        norm_pdf(x) / norm_cdf(x)
    } else {
        1.0 / mills_ratio(-x)
    }
}

/// log Φ(x) without underflow in the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > MILLS_CF_THRESHOLD {
        (-norm_sf(x)).ln_1p()
    } else if x > -MILLS_CF_THRESHOLD {
        norm_cdf(x).ln()
    } else {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(-x).ln()
    }
}

/// Regularized incomplete beta function I_x(a, b).
///
/// Evaluated with the modified Lentz continued fraction; the symmetry
/// I_x(a, b) = 1 − I_{1−x}(b, a) is used when x > (a + 1)/(a + b + 2).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(PosiError::DomainError(format!(
            "incomplete beta needs a, b > 0 (a = {a}, b = {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(PosiError::DomainError(format!(
            "incomplete beta needs x in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_front.exp() * beta_cf(a, b, x) / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b).clamp(0.0, 1.0))
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 1000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Quantile of the Beta(a, b) distribution by bisection on I_x(a, b).
pub fn beta_quantile(a: f64, b: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PosiError::DomainError(format!("beta quantile needs p in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if regularized_incomplete_beta(a, b, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// log density of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_ln_pdf(dof: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let k = 0.5 * dof;
    (k - 1.0) * s.ln() - 0.5 * s - k * LN_2 - ln_gamma(k)
}

pub fn chi2_cdf(dof: f64, s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        gamma_lr(0.5 * dof, 0.5 * s)
    }
}

pub fn chi2_sf(dof: f64, s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else {
        gamma_ur(0.5 * dof, 0.5 * s)
    }
}

/// Chi-square quantile by safeguarded Newton iteration.
pub fn chi2_quantile(dof: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    // Wilson-Hilferty start.
    let z = norm_quantile(u);
    let c = 2.0 / (9.0 * dof);
    let mut s = (dof * (1.0 - c + z * c.sqrt()).powi(3)).max(1e-8);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let f = chi2_cdf(dof, s) - u;
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let dens = chi2_ln_pdf(dof, s).exp();
        let mut next = if dens > 0.0 { s - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * s.max(1.0) };
        }
        if (next - s).abs() <= 1e-14 * s.max(1e-300) {
            return next;
        }
        s = next;
    }
    s
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_quantiles() {
        assert_relative_eq!(two_sided_z(0.10), 1.644_853_626_951_472_2, epsilon = 1e-13);
        assert_relative_eq!(norm_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-13);
        assert_relative_eq!(norm_cdf(norm_quantile(0.3)), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn mills_branches_agree_at_threshold() {
        let below = norm_sf(4.999_999) / norm_pdf(4.999_999);
        let above = mills_ratio(5.000_001);
        assert_relative_eq!(below, above, max_relative = 1e-6);
        // Exact value of R(5) from the erfc form.
        assert_relative_eq!(mills_ratio(5.0), norm_sf(5.0) / norm_pdf(5.0), max_relative = 1e-12);
    }

    #[test]
    fn log_cdf_tails_are_finite() {
        for &x in &[-40.0, -35.0, -8.0, -5.0, 0.0, 5.0, 8.0, 35.0] {
            let v = log_norm_cdf(x);
            assert!(v.is_finite() && v <= 0.0, "log Φ({x}) = {v}");
        }
        assert_relative_eq!(log_norm_cdf(-6.0), norm_cdf(-6.0).ln(), max_relative = 1e-12);
        assert_relative_eq!(log_norm_cdf(-5.0), norm_cdf(-5.0).ln(), max_relative = 1e-12);
    }

    #[test]
    fn incomplete_beta_trivial_values() {
        assert_relative_eq!(regularized_incomplete_beta(0.5, 0.5, 0.5).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(regularized_incomplete_beta(1.0, 1.0, 0.3).unwrap(), 0.3, epsilon = 1e-12);
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.3).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn chi2_quantile_inverts_cdf() {
        for &dof in &[1.0, 2.0, 5.0, 200.0] {
            for &u in &[1e-6, 0.01, 0.5, 0.99, 1.0 - 1e-9] {
                let s = chi2_quantile(dof, u);
                assert_relative_eq!(chi2_cdf(dof, s), u, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_relative_eq!(integral, 2.0 / 13.0, epsilon = 1e-14);
        let (x, w) = gauss_legendre(512);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert_relative_eq!(integral, 2.0 * 1f64.sin(), epsilon = 1e-13);
    }
}
