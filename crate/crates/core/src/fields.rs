//! Gaussian-mixture initial data, the interaction kernel `K` and the linear
//! drift `b0`, all in closed form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::exponent::Exponent;
use crate::grid::{GridField, GridSpec};
use crate::special::gamma;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub d: usize,
    pub components: Vec<Component>,
}

/// `(2 pi s)^{-d/2} exp(-|x|^2 / 2s)`.
pub fn heat_kernel(d: usize, s: f64, r2: f64) -> f64 {
    (2.0 * PI * s).powf(-0.5 * d as f64) * (-0.5 * r2 / s).exp()
}

impl GaussianMixture {
    pub fn new(d: usize, components: Vec<Component>) -> Result<Self> {
        let m = Self { d, components };
        m.validate()?;
        Ok(m)
    }

    /// One standard Gaussian at the origin.
    pub fn standard(d: usize) -> Self {
        Self::single(d, 1.0, vec![0.0; d], 1.0)
    }

    pub fn single(d: usize, weight: f64, mean: Vec<f64>, variance: f64) -> Self {
        Self { d, components: vec![Component { weight, mean, variance }] }
    }

    pub fn empty(d: usize) -> Self {
        Self { d, components: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(KsError::domain("mixture dimension must be >= 1"));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.mean.len() != self.d {
                return Err(KsError::domain(format!(
                    "component {i}: mean has {} entries, expected {}",
                    c.mean.len(),
                    self.d
                )));
            }
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(KsError::domain(format!("component {i}: variance must be > 0")));
            }
            if !c.weight.is_finite() || c.mean.iter().any(|m| !m.is_finite()) {
                return Err(KsError::domain(format!("component {i}: non-finite parameter")));
            }
        }
        Ok(())
    }

    /// Positive weights summing to one.
    pub fn validate_probability(&self) -> Result<()> {
        self.validate()?;
        if self.components.is_empty() || self.components.iter().any(|c| !(c.weight > 0.0)) {
            return Err(KsError::domain("a probability mixture needs positive weights"));
        }
        let total = self.total_weight();
        if (total - 1.0).abs() > 1e-12 {
            return Err(KsError::domain(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.weight * heat_kernel(self.d, c.variance, dist2(x, &c.mean))).sum()
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for c in &self.components {
            let g = c.weight * heat_kernel(self.d, c.variance, dist2(x, &c.mean)) / c.variance;
            for a in 0..self.d {
                out[a] -= g * (x[a] - c.mean[a]);
            }
        }
    }

    /// `g_t * m`: every variance grows by `t`.
    pub fn heat_convolve(&self, t: f64) -> GaussianMixture {
        let mut m = self.clone();
        for c in &mut m.components {
            c.variance += t;
        }
        m
    }

    pub fn translate(&self, shift: &[f64]) -> GaussianMixture {
        let mut m = self.clone();
        for c in &mut m.components {
            for (mu, s) in c.mean.iter_mut().zip(shift) {
                *mu += s;
            }
        }
        m
    }

    pub fn scale_weights(&self, factor: f64) -> GaussianMixture {
        let mut m = self.clone();
        for c in &mut m.components {
            c.weight *= factor;
        }
        m
    }

    pub fn max_variance(&self) -> f64 {
        self.components.iter().map(|c| c.variance).fold(0.0, f64::max)
    }

    pub fn max_abs_mean(&self) -> f64 {
        self.components.iter().flat_map(|c| c.mean.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of `w_k sigma_k^2 d + w_k |mu_k|^2` minus `|mean|^2`: the trace of
    /// the covariance for a probability mixture.
    pub fn covariance_trace(&self) -> f64 {
        let mut mean = vec![0.0; self.d];
        let mut second = 0.0;
        for c in &self.components {
            second += c.weight * (c.variance * self.d as f64 + c.mean.iter().map(|m| m * m).sum::<f64>());
            for a in 0..self.d {
                mean[a] += c.weight * c.mean[a];
            }
        }
        second - mean.iter().map(|m| m * m).sum::<f64>()
    }

    /// Density summed over the periodic images `{-1, 0, 1}^d` of the torus.
    pub fn sample_periodic(&self, spec: &GridSpec) -> Result<GridField> {
        self.check_dim(spec)?;
        let images = image_shifts(spec);
        let mut y = [0.0; 3];
        Ok(GridField::from_fn(*spec, |x| {
            images
                .iter()
                .map(|s| {
                    for a in 0..spec.d {
                        y[a] = x[a] + s[a];
                    }
                    self.density(&y[..spec.d])
                })
                .sum()
        }))
    }

    /// Gradient components summed over the periodic images.
    pub fn sample_gradient_periodic(&self, spec: &GridSpec) -> Result<Vec<GridField>> {
        self.check_dim(spec)?;
        let images = image_shifts(spec);
        let mut out: Vec<GridField> = (0..spec.d).map(|_| GridField::zeros(*spec)).collect();
        let (mut x, mut y, mut g) = ([0.0; 3], [0.0; 3], [0.0; 3]);
        for i in 0..spec.len() {
            spec.point(i, &mut x);
            for s in &images {
                for a in 0..spec.d {
                    y[a] = x[a] + s[a];
                }
                self.gradient(&y[..spec.d], &mut g[..spec.d]);
                for a in 0..spec.d {
                    out[a].values[i] += g[a];
                }
            }
        }
        Ok(out)
    }

    fn check_dim(&self, spec: &GridSpec) -> Result<()> {
        if spec.d != self.d {
            return Err(KsError::GridMismatch(format!("mixture in d = {} sampled on a d = {} grid", self.d, spec.d)));
        }
        Ok(())
    }
}

fn image_shifts(spec: &GridSpec) -> Vec<[f64; 3]> {
    let l = spec.box_length;
    let count = 3usize.pow(spec.d as u32);
    (0..count)
        .map(|mut k| {
            let mut s = [0.0; 3];
            for v in s.iter_mut().take(spec.d) {
                *v = ((k % 3) as f64 - 1.0) * l;
                k /= 3;
            }
            s
        })
        .collect()
}

pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Box side covering the mixture evolved to time `horizon`: twelve standard
/// deviations of the widest component plus twice the largest mean offset.
pub fn box_length_rule(m: &GaussianMixture, horizon: f64) -> f64 {
    12.0 * (m.max_variance() + horizon).sqrt() + 2.0 * m.max_abs_mean()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub t: f64,
    pub x: Vec<f64>,
    pub lambda: f64,
    pub epsilon: f64,
}

/// `(t/(t+eps))^{d/2}` applied to `g`, and the exponent `d/2 + 1` for `K`.
pub fn regularization_factor(t: f64, epsilon: f64, power: f64) -> f64 {
    if epsilon == 0.0 {
        1.0
    } else {
        (t / (t + epsilon)).powf(power)
    }
}

/// `K^eps_t(x) = -x / ((2 pi t)^{d/2} t) exp(-|x|^2/2t - lambda t) (t/(t+eps))^{d/2+1}`.
pub fn kernel_k(e: &KernelEval) -> Result<Vec<f64>> {
    if !(e.t > 0.0) || !e.t.is_finite() {
        return Err(KsError::domain(format!("kernel K needs t > 0, got {}", e.t)));
    }
    if !(e.epsilon >= 0.0) {
        return Err(KsError::domain(format!("epsilon must be >= 0, got {}", e.epsilon)));
    }
    let mut out = vec![0.0; e.x.len()];
    kernel_k_into(e.t, &e.x, e.lambda, e.epsilon, &mut out);
    Ok(out)
}

/// Unchecked [`kernel_k`] writing into `out`.
#[inline]
pub fn kernel_k_into(t: f64, x: &[f64], lambda: f64, epsilon: f64, out: &mut [f64]) {
    let d = x.len();
    let s = -heat_kernel(d, t, dist2(x, &[0.0; 3][..d]))
        * (-lambda * t).exp()
        * regularization_factor(t, epsilon, 0.5 * d as f64 + 1.0)
        / t;
    for (o, xi) in out.iter_mut().zip(x) {
        *o = s * xi;
    }
}

/// `g^eps_t(x) = g_t(x) (t/(t+eps))^{d/2}`.
pub fn heat_kernel_regularized(d: usize, t: f64, r2: f64, epsilon: f64) -> f64 {
    heat_kernel(d, t, r2) * regularization_factor(t, epsilon, 0.5 * d as f64)
}

/// `b0^eps(t, x) = e^{-lambda t} (t/(t+eps))^{d/2} grad (g_t * c0)(x)`, without `chi`.
pub fn linear_drift_b0(c0: &GaussianMixture, t: f64, x: &[f64], lambda: f64, epsilon: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(KsError::domain(format!("b0 needs t > 0, got {t}")));
    }
    let mut out = vec![0.0; c0.d];
    linear_drift_b0_into(&c0.heat_convolve(t), t, x, lambda, epsilon, &mut out);
    Ok(out)
}

/// [`linear_drift_b0`] with the convolved mixture `g_t * c0` precomputed.
#[inline]
pub fn linear_drift_b0_into(c0_t: &GaussianMixture, t: f64, x: &[f64], lambda: f64, epsilon: f64, out: &mut [f64]) {
    c0_t.gradient(x, out);
    let s = (-lambda * t).exp() * regularization_factor(t, epsilon, 0.5 * c0_t.d as f64);
    out.iter_mut().for_each(|o| *o *= s);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// Exact Gaussian formula; only valid for a single component.
    ClosedFormSingle,
    /// Midpoint rule on a box covering every component, with the error
    /// estimated against the half-resolution rule.
    GridQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub points_per_axis: usize,
}

fn default_points(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 512,
        _ => 128,
    }
}

/// `|| m ||_r`.
pub fn lq_norm_mixture(m: &GaussianMixture, r: Exponent, method: NormMethod) -> Result<NormEstimate> {
    norm_dispatch(m, r, method, false)
}

/// `|| |grad m| ||_r` with the Euclidean norm of the gradient.
pub fn lq_norm_mixture_gradient(m: &GaussianMixture, r: Exponent, method: NormMethod) -> Result<NormEstimate> {
    norm_dispatch(m, r, method, true)
}

fn norm_dispatch(m: &GaussianMixture, r: Exponent, method: NormMethod, grad: bool) -> Result<NormEstimate> {
    m.validate()?;
    if !r.is_valid() {
        return Err(KsError::domain(format!("exponent must be >= 1, got {r}")));
    }
    if m.components.is_empty() {
        return Ok(NormEstimate { value: 0.0, error_estimate: 0.0, points_per_axis: 0 });
    }
    match method {
        NormMethod::ClosedFormSingle => {
            if m.components.len() != 1 {
                return Err(KsError::domain("closed-form norm needs a single component"));
            }
            let c = &m.components[0];
            let value = c.weight.abs()
                * if grad {
                    grad_gaussian_euclidean_norm(m.d, r, c.variance)
                } else {
                    crate::special::gaussian_lr_norm(crate::special::GaussNormQuery { d: m.d, r, t: c.variance })
                };
            Ok(NormEstimate { value, error_estimate: 0.0, points_per_axis: 0 })
        }
        NormMethod::GridQuadrature => {
            let n = default_points(m.d);
            let fine = grid_norm(m, r, grad, n);
            let coarse = grid_norm(m, r, grad, n / 2);
            let error_estimate = (fine - coarse).abs();
            if error_estimate > 1e-6 * fine {
                log::warn!(
                    "mixture norm quadrature: estimated relative error {:.2e} exceeds 1e-6",
                    error_estimate / fine
                );
            }
            Ok(NormEstimate { value: fine, error_estimate, points_per_axis: n })
        }
    }
}

/// `|| |grad g_s| ||_r`, using `|grad g_s| = (|x|/s) g_s` and the radial
/// moment `int_0^inf rho^{k} e^{-a rho^2} = Gamma((k+1)/2) / (2 a^{(k+1)/2})`.
fn grad_gaussian_euclidean_norm(d: usize, r: Exponent, s: f64) -> f64 {
    let dd = d as f64;
    match r {
        Exponent::Infinity => s.powf(-0.5) * (2.0 * PI * s).powf(-0.5 * dd) * (-0.5f64).exp(),
        Exponent::Finite(r) => {
            let surface = 2.0 * PI.powf(0.5 * dd) / gamma(0.5 * dd);
            let a = r / (2.0 * s);
            let k = dd - 1.0 + r;
            let radial = gamma(0.5 * (k + 1.0)) / (2.0 * a.powf(0.5 * (k + 1.0)));
            let integral = surface * s.powf(-r) * (2.0 * PI * s).powf(-0.5 * dd * r) * radial;
            integral.powf(1.0 / r)
        }
    }
}

fn grid_norm(m: &GaussianMixture, r: Exponent, grad: bool, n: usize) -> f64 {
    let d = m.d;
    let sigma = m.max_variance().sqrt();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for c in &m.components {
        for a in 0..d {
            lo[a] = lo[a].min(c.mean[a] - 10.0 * sigma);
            hi[a] = hi[a].max(c.mean[a] + 10.0 * sigma);
        }
    }
    let h: Vec<f64> = (0..d).map(|a| (hi[a] - lo[a]) / n as f64).collect();
    let cell: f64 = h.iter().product();
    let total = n.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut acc = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..total {
        let mut rem = i;
        for a in (0..d).rev() {
            x[a] = lo[a] + (rem % n) as f64 * h[a] + 0.5 * h[a];
            rem /= n;
        }
        let v = if grad {
            m.gradient(&x, &mut g);
            g.iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            m.density(&x).abs()
        };
        match r {
            Exponent::Infinity => sup = sup.max(v),
            Exponent::Finite(r) => acc += v.powf(r),
        }
    }
    match r {
        Exponent::Infinity => sup,
        Exponent::Finite(r) => (acc * cell).powf(1.0 / r),
    }
}
