//! Random designs and standardized error draws.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, SkewNormal, StandardNormal};

use super::config::{DesignSpec, ErrorDist};
use crate::design::DesignMatrix;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_normalize(m: &mut DMatrix<f64>, center: bool) {
    for mut c in m.column_iter_mut() {
        if center {
            let mean = c.mean();
            c.add_scalar_mut(-mean);
        }
        let norm = c.norm();
        c /= norm;
    }
}

/// Rows i.i.d. N(0, Σ) with Σ = LLᵀ.
fn gaussian_rows<R: Rng + ?Sized>(n: usize, cov: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let l = cov.clone().cholesky().expect("validated covariance").l();
    let z = DMatrix::from_fn(n, cov.nrows(), |_, _| normal(rng));
    z * l.transpose()
}

pub fn exp_decay_cov(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| (-rho * (i as f64 - j as f64).abs()).exp())
}

pub fn equicorrelated_cov(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
}

/// Draws an n × p design following `spec`.
pub fn gen_design<R: Rng + ?Sized>(spec: &DesignSpec, n: usize, p: usize, rng: &mut R) -> DesignMatrix {
    let m = match *spec {
        DesignSpec::Independent { center } => {
            let bern = Bernoulli::new(0.5).expect("valid p");
            let skew = SkewNormal::new(0.0, 1.0, 5.0).expect("valid parameters");
            let mut m = DMatrix::zeros(n, p);
            for j in 0..p {
                let kind = rng.random_range(0..3);
                // A constant Bernoulli column cannot be normalized; redraw it.
                loop {
                    for i in 0..n {
                        m[(i, j)] = match kind {
                            0 => normal(rng),
                            1 => bern.sample(rng) as u8 as f64,
                            _ => skew.sample(rng),
                        };
                    }
                    let c = m.column(j);
                    if c.iter().any(|&v| v != c[0]) {
                        break;
                    }
                }
            }
            unit_normalize(&mut m, center);
            m
        }
        DesignSpec::Correlated { rho, center } => {
            let mut m = gaussian_rows(n, &exp_decay_cov(p, rho), rng);
            unit_normalize(&mut m, center);
            m
        }
        DesignSpec::GaussianRows { rho } => gaussian_rows(n, &equicorrelated_cov(p, rho), rng),
    };
    DesignMatrix::from_matrix(m).expect("finite entries")
}

/// Mean and standard deviation of the skew-normal(0, 1, shape) law.
pub fn skew_normal_moments(shape: f64) -> (f64, f64) {
    let delta = shape / (1.0 + shape * shape).sqrt();
    let mean = delta * (2.0 / PI).sqrt();
    (mean, (1.0 - 2.0 * delta * delta / PI).sqrt())
}

/// n i.i.d. draws with mean 0 and variance 1.
pub fn gen_errors<R: Rng + ?Sized>(dist: &ErrorDist, n: usize, rng: &mut R) -> DVector<f64> {
    match *dist {
        ErrorDist::Normal => DVector::from_fn(n, |_, _| normal(rng)),
        ErrorDist::Laplace => {
            let b = std::f64::consts::FRAC_1_SQRT_2;
            DVector::from_fn(n, |_, _| {
                let u: f64 = rng.random::<f64>() - 0.5;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
        }
        ErrorDist::Uniform => {
            let a = 3f64.sqrt();
            DVector::from_fn(n, |_, _| rng.random_range(-a..a))
        }
        ErrorDist::SkewNormal { shape } => {
            let skew = SkewNormal::new(0.0, 1.0, shape).expect("finite shape");
            let (mean, sd) = skew_normal_moments(shape);
            DVector::from_fn(n, |_, _| (skew.sample(rng) - mean) / sd)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalized_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let specs = [
            DesignSpec::independent(),
            DesignSpec::correlated(),
            DesignSpec::Independent { center: false },
            DesignSpec::Correlated { rho: 0.1, center: false },
        ];
        for spec in specs {
            let centered = !matches!(spec, DesignSpec::Independent { center: false } | DesignSpec::Correlated { center: false, .. });
            for _ in 0..20 {
                let x = gen_design(&spec, 50, 10, &mut rng);
                for c in x.values().column_iter() {
                    assert!((c.norm() - 1.0).abs() < 1e-12);
                    if centered {
                        assert!(c.sum().abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn independent_columns_are_nearly_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut total = 0.0;
        let mut count = 0;
        for _ in 0..200 {
            let x = gen_design(&DesignSpec::independent(), 50, 10, &mut rng);
            let v = x.values();
            let centered: Vec<DVector<f64>> =
                v.column_iter().map(|c| c.into_owned().add_scalar(-c.mean())).collect();
            for a in 0..10 {
                for b in a + 1..10 {
                    total += (centered[a].dot(&centered[b]) / (centered[a].norm() * centered[b].norm())).abs();
                    count += 1;
                }
            }
        }
        assert!(total / (count as f64) < 0.2);
    }

    #[test]
    fn correlated_rows_have_exponential_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = 6;
        let cov = exp_decay_cov(p, 0.1);
        let rows = gaussian_rows(100_000, &cov, &mut rng);
        let sample = rows.tr_mul(&rows) / 100_000.0;
        assert!((sample - cov).amax() < 0.02);
    }

    #[test]
    fn equicorrelated_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gen_design(&DesignSpec::GaussianRows { rho: 0.2 }, 50_000, 4, &mut rng);
        let s = x.values().tr_mul(x.values()) / 50_000.0;
        assert!((s - equicorrelated_cov(4, 0.2)).amax() < 0.03);
    }

    fn moments(v: &DVector<f64>) -> (f64, f64, f64) {
        let n = v.len() as f64;
        let m = v.mean();
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let skew = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n / var.powf(1.5);
        (m, var, skew)
    }

    #[test]
    fn errors_are_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dist in [ErrorDist::Normal, ErrorDist::Laplace, ErrorDist::Uniform, ErrorDist::SkewNormal { shape: 5.0 }] {
            let e = gen_errors(&dist, 1_000_000, &mut rng);
            let (m, v, _) = moments(&e);
            assert!(m.abs() < 0.005, "{dist:?} mean {m}");
            assert!((v - 1.0).abs() < 0.01, "{dist:?} variance {v}");
        }
    }

    #[test]
    fn uniform_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e = gen_errors(&ErrorDist::Uniform, 100_000, &mut rng);
        assert!(e.amax() <= 3f64.sqrt());
    }

    #[test]
    fn skew_normal_is_right_skewed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = gen_errors(&ErrorDist::SkewNormal { shape: 5.0 }, 1_000_000, &mut rng);
        let (_, _, skew) = moments(&e);
        // Analytic skewness of SN(5): (4 − π)/2 · (δ√(2/π))³ / (1 − 2δ²/π)^{3/2}.
        let delta = 5.0 / 26f64.sqrt();
        let mu = delta * (2.0 / PI).sqrt();
        let analytic = (4.0 - PI) / 2.0 * mu.powi(3) / (1.0 - mu * mu).powf(1.5);
        assert!(skew > 0.5);
        assert!((skew - analytic).abs() < 0.02, "{skew} vs {analytic}");
    }
}
