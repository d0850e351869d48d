//! The four link functions for binary regression, with log-likelihood pieces
//! φ₁ = log h and φ₂ = log(1 − h) and their first two derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::PosiError;
use crate::special::{inv_mills, log_norm_cdf, norm_cdf};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Logit,
    Probit,
    Cloglog,
    Loglog,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::Logit, Link::Probit, Link::Cloglog, Link::Loglog];

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Cloglog => "cloglog",
            Link::Loglog => "loglog",
        }
    }

    /// Success probability h(γ).
    pub fn h(self, g: f64) -> f64 {
        match self {
            Link::Logit => logistic(g),
            Link::Probit => norm_cdf(g),
            Link::Cloglog => -(-g.exp()).exp_m1(),
            Link::Loglog => (-(-g).exp()).exp(),
        }
    }

    /// 1 − h(γ), computed without cancellation.
    pub fn h_complement(self, g: f64) -> f64 {
        match self {
            Link::Logit => logistic(-g),
            Link::Probit => norm_cdf(-g),
            Link::Cloglog => (-g.exp()).exp(),
            Link::Loglog => -(-(-g).exp()).exp_m1(),
        }
    }

    pub fn h_dot(self, g: f64) -> f64 {
        self.ln_h_dot(g).exp()
    }

    /// log ḣ(γ); finite where ḣ itself underflows.
    pub fn ln_h_dot(self, g: f64) -> f64 {
        match self {
            Link::Logit => -g.abs() - 2.0 * (-g.abs()).exp().ln_1p(),
            Link::Probit => -0.5 * g * g - LN_SQRT_2PI,
            Link::Cloglog => g - g.exp(),
            Link::Loglog => -g - (-g).exp(),
        }
    }

    pub fn phi1(self, g: f64) -> f64 {
        match self {
            Link::Logit => -softplus(-g),
            Link::Probit => log_norm_cdf(g),
            Link::Cloglog => cloglog_phi1(g),
            Link::Loglog => -(-g).exp(),
        }
    }

    pub fn phi2(self, g: f64) -> f64 {
        match self {
            Link::Logit => -softplus(g),
            Link::Probit => log_norm_cdf(-g),
            Link::Cloglog => -g.exp(),
            Link::Loglog => cloglog_phi1(-g),
        }
    }

    pub fn phi1_d(self, g: f64) -> f64 {
        match self {
            Link::Logit => logistic(-g),
            Link::Probit => inv_mills(g),
            Link::Cloglog => cloglog_phi1_d(g),
            Link::Loglog => (-g).exp(),
        }
    }

    pub fn phi2_d(self, g: f64) -> f64 {
        match self {
            Link::Logit => -logistic(g),
            Link::Probit => -inv_mills(-g),
            Link::Cloglog => -g.exp(),
            Link::Loglog => -cloglog_phi1_d(-g),
        }
    }

    pub fn phi1_dd(self, g: f64) -> f64 {
        match self {
            Link::Logit => -logistic_variance(g),
            Link::Probit => probit_phi1_dd(g),
            Link::Cloglog => -cloglog_neg_phi1_dd_ln(g).exp(),
            Link::Loglog => -(-g).exp(),
        }
    }

    pub fn phi2_dd(self, g: f64) -> f64 {
        match self {
            Link::Logit => -logistic_variance(g),
            Link::Probit => probit_phi1_dd(-g),
            Link::Cloglog => -g.exp(),
            Link::Loglog => -cloglog_neg_phi1_dd_ln(-g).exp(),
        }
    }

    /// log(−φ̈₁(γ)).
    pub fn ln_neg_phi1_dd(self, g: f64) -> f64 {
        match self {
            Link::Cloglog => cloglog_neg_phi1_dd_ln(g),
            Link::Loglog => -g,
            _ => (-self.phi1_dd(g)).ln(),
        }
    }

    /// log(−φ̈₂(γ)).
    pub fn ln_neg_phi2_dd(self, g: f64) -> f64 {
        match self {
            Link::Cloglog => g,
            Link::Loglog => cloglog_neg_phi1_dd_ln(-g),
            _ => (-self.phi2_dd(g)).ln(),
        }
    }

    /// Score contribution y·φ̇₁ + (1 − y)·φ̇₂ = w(γ)(y − h(γ)) for y ∈ [0, 1].
    /// For the canonical logit link this is y − h(γ) exactly.
    pub fn working_residual(self, y: f64, g: f64) -> f64 {
        match self {
            Link::Logit => y - logistic(g),
            _ => {
                let mut c = 0.0;
                if y != 0.0 {
                    c += y * self.phi1_d(g);
                }
                if y != 1.0 {
                    c += (1.0 - y) * self.phi2_d(g);
                }
                c
            }
        }
    }

    /// −y·φ̈₁ − (1 − y)·φ̈₂ > 0: the per-observation Hessian weight.
    pub fn curvature(self, y: f64, g: f64) -> f64 {
        let mut d = 0.0;
        if y != 0.0 {
            d -= y * self.phi1_dd(g);
        }
        if y != 1.0 {
            d -= (1.0 - y) * self.phi2_dd(g);
        }
        d
    }

    /// y·φ₁ + (1 − y)·φ₂.
    pub fn loglik_term(self, y: f64, g: f64) -> f64 {
        let mut l = 0.0;
        if y != 0.0 {
            l += y * self.phi1(g);
        }
        if y != 1.0 {
            l += (1.0 - y) * self.phi2(g);
        }
        l
    }

    /// Model-based variance of the working residual, h·φ̇₁² + (1 − h)·φ̇₂².
    /// Equals h(1 − h) for the logit link.
    pub fn model_variance(self, g: f64) -> f64 {
        match self {
            Link::Logit => logistic_variance(g),
            _ => {
                let (d1, d2) = (self.phi1_d(g), self.phi2_d(g));
                self.h(g) * d1 * d1 + self.h_complement(g) * d2 * d2
            }
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = PosiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "cloglog" => Ok(Link::Cloglog),
            "loglog" => Ok(Link::Loglog),
            other => Err(PosiError::InvalidInput(format!("unknown link {other:?}"))),
        }
    }
}

fn logistic(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

/// h(1 − h) for the logistic h.
fn logistic_variance(g: f64) -> f64 {
    let e = (-g.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// log(1 + e^x)
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// log(1 − exp(−e^γ))
fn cloglog_phi1(g: f64) -> f64 {
    let u = g.exp();
    if u < std::f64::consts::LN_2 {
        (-(-u).exp_m1()).ln()
    } else {
        (-(-u).exp()).ln_1p()
    }
}

/// u/(e^u − 1) with u = e^γ.
fn cloglog_phi1_d(g: f64) -> f64 {
    let u = g.exp();
    if u < 1e-8 {
        1.0 - 0.5 * u
    } else {
        u * (-u).exp() / -(-u).exp_m1()
    }
}

/// log(−φ̈₁(γ)) for the cloglog link, where −φ̈₁ = −u·g′(u), g(u) = u/(e^u − 1).
fn cloglog_neg_phi1_dd_ln(g: f64) -> f64 {
    let u = g.exp();
    if u < 0.5 {
        // −g′(u) from the Bernoulli-number expansion of u/(e^u − 1).
        let u2 = u * u;
        let neg_gd = 0.5
            - u / 6.0
            + u * u2 / 180.0
            - u * u2 * u2 / 5040.0
            + u * u2 * u2 * u2 / 151_200.0
            - u * u2 * u2 * u2 * u2 * (5.0 / 66.0) / 362_880.0
            + u * u2 * u2 * u2 * u2 * u2 * (691.0 / 2730.0) / 39_916_800.0;
        g + neg_gd.ln()
    } else {
        // −g′(u) = e^{−u}(u − 1 + e^{−u}) / (1 − e^{−u})²
        let em = (-u).exp();
        let one_minus = -(-u).exp_m1();
        g - u + (u - 1.0 + em).ln() - 2.0 * one_minus.ln()
    }
}

/// −λ(γ)(γ + λ(γ)) with λ = φ/Φ the inverse Mills ratio.
fn probit_phi1_dd(g: f64) -> f64 {
    if g > -5.0 {
        let lam = inv_mills(g);
        -lam * (g + lam)
    } else {
        // With z = −γ, λ = z + e(z) where e(z) = 1/(z + 2/(z + 3/(z + …))).
        let z = -g;
        let mut tail = z;
        for k in (2..=80).rev() {
            tail = z + k as f64 / tail;
        }
        let excess = 1.0 / tail;
        -(z + excess) * excess
    }
}
