//! Lebesgue norms of the heat kernel `g_t` and of its partial derivatives.
//!
//! `||g_t||_r = C0(r) t^{-(d/2)(1-1/r)}` and
//! `||d_i g_t||_r = C1(r) t^{-(d/2)(1-1/r) - 1/2}`.
//!
//! Two forms of each constant are kept. [`C1Convention::Exact`] gives the
//! values that make both identities hold, and is what the quadrature tests
//! check. [`C1Convention::Printed`] is the historical closed form: its `C1` is
//! smaller than the exact one by the factor `2 r^{-(d-1)/(2r)}` (a factor 2 in
//! `d = 1`), and its `C0` drops the factor `r^{-d/(2r)}`, so it is an upper
//! bound rather than the norm itself. Constant pipelines can be run under
//! either convention.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::gamma::gamma;
use crate::error::{KsError, Result};
use crate::exponent::Exponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C1Convention {
    /// Quadrature-validated constant, `||d_i g_1||_r` exactly.
    Exact,
    /// Historical printed closed form.
    Printed,
}

impl C1Convention {
    pub const ALL: [C1Convention; 2] = [C1Convention::Exact, C1Convention::Printed];

    pub fn label(self) -> &'static str {
        match self {
            C1Convention::Exact => "exact",
            C1Convention::Printed => "printed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNormQuery {
    pub d: usize,
    pub r: Exponent,
    pub t: f64,
}

impl GaussNormQuery {
    pub fn new(d: usize, r: impl Into<Exponent>, t: f64) -> Result<Self> {
        let r = r.into();
        if d == 0 {
            return Err(KsError::domain("dimension must be >= 1"));
        }
        if !r.is_valid() {
            return Err(KsError::domain(format!("exponent must be >= 1, got {r}")));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(KsError::domain(format!("time must be > 0, got {t}")));
        }
        Ok(Self { d, r, t })
    }
}

fn decay(d: usize, r: Exponent) -> f64 {
    0.5 * d as f64 * (1.0 - r.reciprocal())
}

/// `C0(r)`. The printed form is `(2 pi)^{-(d/2)(1-1/r)}`; the exact form
/// carries the extra factor `r^{-d/(2r)}`.
pub fn c0(d: usize, r: impl Into<Exponent>, convention: C1Convention) -> f64 {
    let r = r.into();
    let printed = (2.0 * PI).powf(-decay(d, r));
    match (convention, r) {
        (C1Convention::Exact, Exponent::Finite(r)) => printed * r.powf(-0.5 * d as f64 / r),
        _ => printed,
    }
}

/// `C1(r)` under the chosen convention.
pub fn c1(d: usize, r: impl Into<Exponent>, convention: C1Convention) -> f64 {
    let r = r.into();
    let dd = d as f64;
    let exact = match r {
        Exponent::Infinity => (2.0 * PI).powf(-0.5 * dd) * (-0.5f64).exp(),
        Exponent::Finite(r) => {
            let a = decay(d, Exponent::Finite(r));
            gamma(0.5 * (r + 1.0)).powf(1.0 / r)
                * 2f64.powf(0.5 - a)
                * PI.powf(-a - 0.5 / r)
                * r.powf(-0.5 - 0.5 * dd / r)
        }
    };
    match convention {
        C1Convention::Exact => exact,
        C1Convention::Printed => match r {
            Exponent::Infinity => 0.5 * exact,
            Exponent::Finite(r) => {
                let a = decay(d, Exponent::Finite(r));
                gamma(0.5 * (r + 1.0)).powf(1.0 / r)
                    / (2f64.powf(a + 0.5) * PI.powf(a + 0.5 / r) * r.powf(0.5 + 0.5 / r))
            }
        },
    }
}

/// `||g_t||_r`.
pub fn gaussian_lr_norm(q: GaussNormQuery) -> f64 {
    c0(q.d, q.r, C1Convention::Exact) * q.t.powf(-decay(q.d, q.r))
}

/// `||d_i g_t||_r` for any single coordinate `i`.
pub fn grad_gaussian_lr_norm(q: GaussNormQuery) -> f64 {
    c1(q.d, q.r, C1Convention::Exact) * q.t.powf(-decay(q.d, q.r) - 0.5)
}
