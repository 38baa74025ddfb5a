use serde::{Deserialize, Serialize};

use super::gamma::{gamma, ln_gamma};
use super::quadrature::{singular_beta_kernel, QuadOptions};
use crate::error::{KsError, Result};

/// Exponents of `int_0^1 u^{-a} (1-u)^{-b} du`; integrable iff `a, b < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaQuery {
    pub a: f64,
    pub b: f64,
}

impl BetaQuery {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= 1.0 || b >= 1.0 {
            return Err(KsError::domain(format!("beta integral requires a < 1 and b < 1, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }
}

/// `beta(a, b) = Gamma(1-a) Gamma(1-b) / Gamma(2-a-b)`.
pub fn beta_integral(q: BetaQuery) -> f64 {
    let (x, y) = (1.0 - q.a, 1.0 - q.b);
    if x + y > 60.0 {
        (ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp()
    } else {
        gamma(x) * gamma(y) / gamma(x + y)
    }
}

/// Checked convenience wrapper around [`beta_integral`].
pub fn beta(a: f64, b: f64) -> Result<f64> {
    Ok(beta_integral(BetaQuery::new(a, b)?))
}

/// `sup { beta(a, b) : a, b <= 1 - eps }`, attained at the corner since the
/// integral is increasing in both arguments.
pub fn beta_epsilon(eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(KsError::domain(format!("beta_epsilon requires eps > 0, got {eps}")));
    }
    beta(1.0 - eps, 1.0 - eps)
}

/// Both sides of `int_0^t s^{-a} (t-s)^{-b} ds = t^{1-(a+b)} beta(a, b)`:
/// the left by adaptive quadrature, the right in closed form.
pub fn beta_identity_check(a: f64, b: f64, t: f64) -> Result<(f64, f64)> {
    let q = BetaQuery::new(a, b)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(KsError::domain(format!("beta identity requires t > 0, got {t}")));
    }
    let lhs = singular_beta_kernel(a, b, t, QuadOptions::default())?.value;
    let rhs = t.powf(1.0 - (a + b)) * beta_integral(q);
    Ok((lhs, rhs))
}

pub(crate) fn beta_unchecked(a: f64, b: f64) -> f64 {
    beta_integral(BetaQuery { a, b })
}
