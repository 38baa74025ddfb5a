//! Explicit constants and smallness conditions of the existence, uniqueness
//! and boundedness results, computed from a handful of scalar model inputs.
//!
//! Every quantity is available under both [`C1Convention`]s. Violated
//! conditions are reported as data, never as errors.

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::special::{beta_epsilon, c0, c1, C1Convention};

fn beta(a: f64, b: f64) -> f64 {
    crate::special::beta_unchecked(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub chi: f64,
    pub lambda: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub q: f64,
    pub norm_grad_c0_d: f64,
    pub norm_p0_dhalf: f64,
}

impl ModelParams {
    /// Parameters with the default exponent `q = 3d/2`.
    pub fn new(d: usize, chi: f64, norm_grad_c0_d: f64, norm_p0_dhalf: f64) -> Self {
        Self { d, chi, lambda: 0.0, horizon: 1.0, q: default_q(d), norm_grad_c0_d, norm_p0_dhalf }
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    fn validate(&self, min_d: usize) -> Result<()> {
        if self.d < min_d {
            return Err(KsError::domain(format!("condition checks need d >= {min_d}, got d = {}", self.d)));
        }
        let d = self.d as f64;
        if !(self.q > d && self.q < 2.0 * d) {
            return Err(KsError::domain(format!("q must lie in (d, 2d) = ({d}, {}), got {}", 2.0 * d, self.q)));
        }
        if !(self.chi >= 0.0) || !self.chi.is_finite() {
            return Err(KsError::domain(format!("chi must be >= 0, got {}", self.chi)));
        }
        if !(self.lambda >= 0.0) {
            return Err(KsError::domain(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.horizon > 0.0) {
            return Err(KsError::domain(format!("T must be > 0, got {}", self.horizon)));
        }
        if !(self.norm_grad_c0_d >= 0.0) || !(self.norm_p0_dhalf > 0.0) {
            return Err(KsError::domain("norms must satisfy |grad c0|_d >= 0 and |p0|_{d/2} > 0"));
        }
        Ok(())
    }
}

pub fn default_q(d: usize) -> f64 {
    1.5 * d as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub convention: C1Convention,
    pub q_prime: f64,
    pub q_tilde1: f64,
    pub q_tilde2: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    /// `C0(q~2)`, the free heat-flow constant.
    pub c0_q_tilde2: f64,
    pub discriminant: f64,
    /// Smallest positive root of `P`; `None` when `P` has no positive root.
    #[serde(rename = "C_q")]
    pub c_q: Option<f64>,
    pub condition_lhs: f64,
    pub uniqueness_lhs: Option<f64>,
}

impl DerivedConstants {
    /// `P(z) = K1 chi z^2 + (K2 chi |grad c0|_d - 1) z + C0(q~2) |p0|_{d/2}`.
    pub fn polynomial(&self, p: &ModelParams, z: f64) -> f64 {
        self.k1 * p.chi * z * z + (self.k2 * p.chi * p.norm_grad_c0_d - 1.0) * z + self.c0_q_tilde2 * p.norm_p0_dhalf
    }
}

/// Exponents derived from `q` alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub q_prime: f64,
    pub q_tilde1: f64,
    pub q_tilde2: f64,
    /// `beta(3/2 - d/q, (d/2)(1 - 1/q') + 1/2)`.
    pub beta_main: f64,
    /// `beta(1 - d/(2q), 1/2)`.
    pub beta_drift: f64,
}

pub fn exponents(d: usize, q: f64) -> Exponents {
    let dd = d as f64;
    let q_prime = q / (q - 1.0);
    Exponents {
        q_prime,
        q_tilde1: dd * q / ((dd - 1.0) * q + dd),
        q_tilde2: dd * q / (dd + (dd - 2.0) * q),
        beta_main: beta(1.5 - dd / q, 0.5 * dd * (1.0 - 1.0 / q_prime) + 0.5),
        beta_drift: beta(1.0 - dd / (2.0 * q), 0.5),
    }
}

/// Constants for `d >= 3` and `q` in `(d, 2d)`.
pub fn derive_constants(p: &ModelParams, convention: C1Convention) -> Result<DerivedConstants> {
    p.validate(3)?;
    Ok(derive_unchecked(p, convention))
}

/// The same formulas evaluated in `d = 2`, where `|p0|_{d/2}` is the unit mass.
/// Used to set the coupling of two-dimensional runs on the same scale as the
/// three-dimensional theory; the results carry no theorem in `d = 2`.
pub fn derive_constants_surrogate(p: &ModelParams, convention: C1Convention) -> Result<DerivedConstants> {
    p.validate(2)?;
    Ok(derive_unchecked(p, convention))
}

fn derive_unchecked(p: &ModelParams, conv: C1Convention) -> DerivedConstants {
    let d = p.d;
    let e = exponents(d, p.q);
    let c1_qp = c1(d, e.q_prime, conv);
    let c1_one = c1(d, 1.0, conv);
    let c0_qt2 = c0(d, e.q_tilde2, conv);
    let k1 = d as f64 * c1_qp * c1_one * e.beta_main * e.beta_drift;
    let k2 = d as f64 * c1_qp * c0(d, e.q_tilde1, conv) * e.beta_main;
    let a = k2;
    let b = 2.0 * (c0_qt2 * k1).sqrt();
    let chi = p.chi;
    let g = p.norm_grad_c0_d;
    let condition_lhs = a * chi * g + b * (chi * p.norm_p0_dhalf).sqrt();

    let linear = 1.0 - a * chi * g;
    let discriminant = linear * linear - b * b * chi * p.norm_p0_dhalf;
    let c_q =
        (discriminant >= 0.0 && linear > 0.0).then(|| 2.0 * c0_qt2 * p.norm_p0_dhalf / (linear + discriminant.sqrt()));
    let uniqueness_lhs = c_q.map(|cq| uniqueness_lhs(d, p.q, chi, g, cq, conv));

    DerivedConstants {
        convention: conv,
        q_prime: e.q_prime,
        q_tilde1: e.q_tilde1,
        q_tilde2: e.q_tilde2,
        a,
        b,
        k1,
        k2,
        c0_q_tilde2: c0_qt2,
        discriminant,
        c_q,
        condition_lhs,
        uniqueness_lhs,
    }
}

fn uniqueness_lhs(d: usize, q: f64, chi: f64, g: f64, c_q: f64, conv: C1Convention) -> f64 {
    let dd = d as f64;
    let e = exponents(d, q);
    let inner = beta(dd / (2.0 * q) + 0.5, 1.0 - dd / (2.0 * q)) + 1.0;
    chi * c1(d, 1.0, conv) * beta(0.5, 0.5) * (g + c_q * c1(d, e.q_prime, conv) * inner)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lhs: f64,
    pub satisfied: bool,
    pub margin: f64,
}

impl ConditionReport {
    fn from_lhs(lhs: f64) -> Self {
        Self { lhs, satisfied: lhs < 1.0, margin: 1.0 - lhs }
    }
}

/// `A chi |grad c0|_d + B sqrt(chi |p0|_{d/2}) < 1`.
pub fn check_existence_condition(p: &ModelParams, convention: C1Convention) -> Result<ConditionReport> {
    Ok(ConditionReport::from_lhs(derive_constants(p, convention)?.condition_lhs))
}

/// `chi C1(1) beta(1/2,1/2) [ |grad c0|_d + C_q C1(q') (beta(d/2q + 1/2, 1 - d/2q) + 1) ] < 1`.
pub fn check_uniqueness_condition(p: &ModelParams, c_q: f64, convention: C1Convention) -> ConditionReport {
    ConditionReport::from_lhs(uniqueness_lhs(p.d, p.q, p.chi, p.norm_grad_c0_d, c_q, convention))
}

/// The coupling `chi*` at which the existence condition becomes an equality.
/// The left side is `a u^2 + b u` in `u = sqrt(chi)`, so this is closed form.
pub fn existence_threshold_chi(p: &ModelParams, convention: C1Convention) -> Result<f64> {
    p.validate(2)?;
    let k = derive_unchecked(&p.with_chi(1.0), convention);
    let a = k.a * p.norm_grad_c0_d;
    let b = k.b * p.norm_p0_dhalf.sqrt();
    let u = if a > 0.0 { 2.0 / (b + (b * b + 4.0 * a).sqrt()) } else { 1.0 / b };
    Ok(u * u)
}

/// Bound on `sqrt(t) |b^i_t|_inf` for each drift component, given `C_q`.
pub fn drift_sup_bound(p: &ModelParams, c_q: f64, convention: C1Convention) -> f64 {
    let d = p.d;
    let dd = d as f64;
    let e = exponents(d, p.q);
    let linear = p.norm_grad_c0_d * c0(d, dd / (dd - 1.0), convention);
    let nonlinear = c1(d, e.q_prime, convention) * c_q * beta(1.0 - dd / (2.0 * p.q), dd / (2.0 * p.q) + 0.5);
    p.chi * (linear + nonlinear)
}

/// Initial constant of the bootstrap: `|rho_t|_r <= C_q^theta t^{-(2/3) theta}`
/// for `r` in `{d/2, d}`, `theta = (1-1/r)/(1-1/q)`, and `A0` is the larger
/// of the two prefactors.
pub fn bootstrap_initial_a0(d: usize, c_q: f64) -> f64 {
    let q = default_q(d);
    [0.5 * d as f64, d as f64].iter().map(|&r| c_q.powf((1.0 - 1.0 / r) / (1.0 - 1.0 / q))).fold(f64::MIN, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSequence {
    pub a0: f64,
    /// `A_1, ..., A_n`.
    pub a: Vec<f64>,
    /// `A'_1, ..., A'_n`.
    pub a_prime: Vec<f64>,
    /// `a_1, ..., a_n`.
    pub exponent_a: Vec<f64>,
    /// `a'_1, ..., a'_n`.
    pub exponent_a_prime: Vec<f64>,
    /// Largest fixed point `y` of the iteration map.
    pub fixed_point: f64,
    /// `max(A_1, y)`, an upper bound for every `A_n`.
    pub bound: f64,
    /// Limit of `A'_n`, the bound on `sup_t |rho_t|_{d/2}`.
    pub density_bound: f64,
    /// First index at which an iterate exceeded the cap.
    pub diverged_at: Option<usize>,
}

pub const BOOTSTRAP_CAP: f64 = 1e200;

/// Iterate `A'_{n+1} = |p0|_{d/2} + d chi |grad c0|_d beta_{1/6} A_n + d chi beta_{1/6}^2 A_n^2`,
/// `A_{n+1} = A'_{n+1}^{1/4} C_q^{3/4}`, starting from `A_0 = a0`.
pub fn bootstrap_bound_sequence(p: &ModelParams, c_q: f64, a0: f64, n_max: usize) -> Result<BootstrapSequence> {
    p.validate(3)?;
    if (p.q - default_q(p.d)).abs() > 1e-12 * p.q {
        return Err(KsError::domain(format!(
            "the bootstrap recursion is stated for q = 3d/2 = {}, got q = {}",
            default_q(p.d),
            p.q
        )));
    }
    if !(a0 > 0.0) || !(c_q > 0.0) || n_max == 0 {
        return Err(KsError::domain("bootstrap needs A0 > 0, C_q > 0 and n_max >= 1"));
    }
    let dd = p.d as f64;
    let b6 = beta_epsilon(1.0 / 6.0)?;
    let alpha = dd * p.chi * p.norm_grad_c0_d * b6;
    let gamma = dd * p.chi * b6 * b6;
    let map_prime = |x: f64| p.norm_p0_dhalf + alpha * x + gamma * x * x;
    let f = |x: f64| map_prime(x).powf(0.25) * c_q.powf(0.75);

    let a_0 = (2.0 / 3.0) * (1.0 - 1.0 / dd) / (1.0 - 2.0 / (3.0 * dd));
    let mut seq = BootstrapSequence {
        a0,
        a: Vec::with_capacity(n_max),
        a_prime: Vec::with_capacity(n_max),
        exponent_a: Vec::with_capacity(n_max),
        exponent_a_prime: Vec::with_capacity(n_max),
        fixed_point: 0.0,
        bound: 0.0,
        density_bound: 0.0,
        diverged_at: None,
    };
    let mut x = a0;
    for n in 1..=n_max {
        let ap = map_prime(x);
        x = f(x);
        seq.a_prime.push(ap);
        seq.a.push(x);
        seq.exponent_a_prime.push((2.0 * a_0 - 1.0) / 2f64.powi(n as i32 - 1));
        seq.exponent_a.push((2.0 * a_0 - 1.0) / 2f64.powi(n as i32 + 1) + 0.5);
        if !(x.is_finite() && x < BOOTSTRAP_CAP) {
            seq.diverged_at = Some(n);
            log::warn!("bootstrap iterate exceeded the cap at n = {n}");
            break;
        }
    }
    let c3 = c_q.powi(3);
    let y = largest_quartic_root(c3 * gamma, c3 * alpha, c3 * p.norm_p0_dhalf);
    seq.fixed_point = y;
    seq.bound = seq.a[0].max(y);
    seq.density_bound = y.powi(4) / c3;
    Ok(seq)
}

/// Largest positive root of `x^4 - g x^2 - a x - c` with `g, a >= 0`, `c > 0`.
/// The sign pattern `+ - - -` has one change, so the positive root is unique.
fn largest_quartic_root(g: f64, a: f64, c: f64) -> f64 {
    let h = |x: f64| x.powi(4) - g * x * x - a * x - c;
    let mut hi = 1.0f64;
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Full JSON-ready summary for one convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub convention: C1Convention,
    pub inputs: ModelParams,
    pub constants: DerivedConstants,
    pub existence: ConditionReport,
    pub uniqueness: Option<ConditionReport>,
    pub chi_star: f64,
    pub drift_bound: Option<f64>,
    /// `true` when `d < 3`, where the report has no theorem behind it.
    pub informational: bool,
}

pub fn constants_report(p: &ModelParams, convention: C1Convention) -> Result<ConstantsReport> {
    let constants =
        if p.d >= 3 { derive_constants(p, convention)? } else { derive_constants_surrogate(p, convention)? };
    Ok(ConstantsReport {
        convention,
        inputs: *p,
        existence: ConditionReport::from_lhs(constants.condition_lhs),
        uniqueness: constants.uniqueness_lhs.map(ConditionReport::from_lhs),
        chi_star: existence_threshold_chi(p, convention)?,
        drift_bound: constants.c_q.map(|cq| drift_sup_bound(p, cq, convention)),
        informational: p.d < 3,
        constants,
    })
}

/// Reports under both conventions, exact first.
pub fn constants_reports(p: &ModelParams) -> Result<Vec<ConstantsReport>> {
    C1Convention::ALL.iter().map(|&c| constants_report(p, c)).collect()
}
