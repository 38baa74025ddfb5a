use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ensemble::{ParticleEnsemble, Slice};
use crate::constants::ModelParams;
use crate::error::{KsError, Result};
use crate::fields::{kernel_k_into, linear_drift_b0_into, regularization_factor, GaussianMixture};
use crate::grid::{GridSpec, SpectralGrid};
use crate::history::trapezoid_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftBackend {
    /// Direct double sum over particles and slices.
    #[default]
    Pairwise,
    /// Cloud-in-cell deposit, spectral convolution, cloud-in-cell readback.
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftBackendConfig {
    pub mode: DriftBackend,
    pub epsilon: f64,
    /// Memory cutoff: slices with `t - s < delta` are skipped. Only allowed with `epsilon = 0`.
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub mesh: Option<GridSpec>,
    /// Multiply `b0` by `chi` as well as the interaction term.
    #[serde(default = "default_true")]
    pub include_chi_on_b0: bool,
}

fn default_true() -> bool {
    true
}

impl DriftBackendConfig {
    pub fn pairwise(epsilon: f64) -> Self {
        Self { mode: DriftBackend::Pairwise, epsilon, delta: 0.0, mesh: None, include_chi_on_b0: true }
    }

    pub fn mesh(epsilon: f64, mesh: GridSpec) -> Self {
        Self { mode: DriftBackend::Mesh, epsilon, delta: 0.0, mesh: Some(mesh), include_chi_on_b0: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() || !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(KsError::CutoffViolation(format!(
                "epsilon = {} and delta = {} must be finite and non-negative",
                self.epsilon, self.delta
            )));
        }
        match (self.epsilon > 0.0, self.delta > 0.0) {
            (false, false) => {
                return Err(KsError::CutoffViolation("epsilon = 0 needs a memory cutoff delta > 0".into()))
            }
            (true, true) => {
                return Err(KsError::CutoffViolation("a memory cutoff is only allowed with epsilon = 0".into()))
            }
            _ => {}
        }
        match (self.mode, &self.mesh) {
            (DriftBackend::Mesh, None) => {
                Err(KsError::BackendMismatch("mesh backend requested without a mesh grid".into()))
            }
            (DriftBackend::Mesh, Some(spec)) => spec.validate(),
            _ => Ok(()),
        }
    }

    /// Mesh for the particle-mesh backend: the box from
    /// [`box_length_rule`](crate::fields::box_length_rule) and the smallest
    /// even `n >= 16` with spacing at most `sqrt(tau_min) / 2`, where `tau_min`
    /// is the smallest time lag that enters the drift.
    pub fn mesh_rule(d: usize, box_length: f64, tau_min: f64) -> Result<GridSpec> {
        let h = 0.5 * tau_min.sqrt();
        let mut n = ((box_length / h).ceil() as usize).max(16);
        n += n % 2;
        GridSpec::new(d, n, box_length)
    }
}

/// One quadrature node of the memory integral: slice index, lag `t - s` and weight.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub slice: usize,
    pub lag: f64,
    pub weight: f64,
}

pub(crate) fn memory_nodes(times: &[f64], t: f64, cfg: &DriftBackendConfig) -> Result<Vec<Node>> {
    if times.first() != Some(&0.0) {
        return Err(KsError::InsufficientHistory("particle history must start at t = 0".into()));
    }
    if times.iter().any(|&s| s > t) {
        return Err(KsError::InsufficientHistory(format!("history extends past t = {t}")));
    }
    let cutoff = cfg.delta;
    let mut idx: Vec<usize> = (0..times.len()).filter(|&l| t - times[l] >= cutoff).collect();
    let mut nodes_t: Vec<f64> = idx.iter().map(|&l| times[l]).collect();
    if cutoff == 0.0 && nodes_t.last() != Some(&t) {
        nodes_t.push(t);
        idx.push(usize::MAX);
    }
    let w = trapezoid_weights(&nodes_t);
    Ok(idx
        .into_iter()
        .zip(nodes_t)
        .zip(w)
        .filter(|((_, s), _)| t - s > 0.0)
        .map(|((slice, s), weight)| Node { slice, lag: t - s, weight })
        .collect())
}

/// Drift of every particle at the ensemble's current time, flattened `N x d`:
/// `chi b0^eps(t, X^i) + (chi/N) sum_l w_l sum_j K^eps_{t-s_l}(X^i_t - X^j_{s_l})`.
pub fn drift_eval(
    ens: &ParticleEnsemble,
    params: &ModelParams,
    cfg: &DriftBackendConfig,
    c0: &GaussianMixture,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = ens.d();
    if params.d != d || c0.d != d {
        return Err(KsError::domain(format!("dimension mismatch: ensemble {d}, parameters {}, c0 {}", params.d, c0.d)));
    }
    let chi = params.chi;
    let n = ens.len();
    let t = ens.t();
    let mut drift = vec![0.0; n * d];
    if chi == 0.0 {
        return Ok(drift);
    }
    let interaction = interaction_eval(ens, params.lambda, cfg)?;
    let b0_scale = if cfg.include_chi_on_b0 { chi } else { 1.0 };
    let c0_t = c0.heat_convolve(t);
    let x = ens.positions();
    drift.par_chunks_mut(d).zip(x.par_chunks(d)).zip(interaction.par_chunks(d)).for_each(|((out, xi), inter)| {
        linear_drift_b0_into(&c0_t, t, xi, params.lambda, cfg.epsilon, out);
        for (o, v) in out.iter_mut().zip(inter) {
            *o = b0_scale * *o + chi * v;
        }
    });
    Ok(drift)
}

/// The memory term `(1/N) sum_l w_l sum_j K^eps_{t-s_l}(X^i_t - X^j_{s_l})`, without `chi`.
pub fn interaction_eval(ens: &ParticleEnsemble, lambda: f64, cfg: &DriftBackendConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let t = ens.t();
    let nodes = memory_nodes(ens.history().times(), t, cfg)?;
    match cfg.mode {
        DriftBackend::Pairwise => Ok(pairwise(ens, &nodes, lambda, cfg.epsilon)),
        DriftBackend::Mesh => mesh(ens, &nodes, lambda, cfg),
    }
}

fn pairwise(ens: &ParticleEnsemble, nodes: &[Node], lambda: f64, epsilon: f64) -> Vec<f64> {
    let d = ens.d();
    let n = ens.len();
    let slices = ens.history().items();
    let inv_n = 1.0 / n as f64;
    let mut out = vec![0.0; n * d];
    out.par_chunks_mut(d).zip(ens.positions().par_chunks(d)).for_each(|(acc, xi)| {
        let mut diff = [0.0; 3];
        let mut k = [0.0; 3];
        for node in nodes {
            let slice: &Slice = &slices[node.slice];
            let mut sum = [0.0; 3];
            for xj in slice.positions.chunks(d) {
                for a in 0..d {
                    diff[a] = xi[a] - xj[a];
                }
                kernel_k_into(node.lag, &diff[..d], lambda, epsilon, &mut k[..d]);
                for a in 0..d {
                    sum[a] += k[a];
                }
            }
            for a in 0..d {
                acc[a] += node.weight * inv_n * sum[a];
            }
        }
    });
    out
}

/// Per-axis cloud-in-cell stencil: lower index and weight of the lower node.
#[inline]
fn cic_axis(spec: &GridSpec, x: f64) -> (usize, f64) {
    let h = spec.spacing();
    let u = spec.wrap(x) / h + 0.5 * spec.n as f64;
    let j = u.floor();
    let frac = u - j;
    ((j as i64).rem_euclid(spec.n as i64) as usize, 1.0 - frac)
}

fn cic_stencil(spec: &GridSpec, x: &[f64], f: &mut impl FnMut(usize, f64)) {
    let d = spec.d;
    let n = spec.n;
    let mut base = [(0usize, 0.0f64); 3];
    for a in 0..d {
        base[a] = cic_axis(spec, x[a]);
    }
    for corner in 0..(1usize << d) {
        let mut flat = 0;
        let mut w = 1.0;
        for (a, &(j, lo)) in base.iter().enumerate().take(d) {
            let up = (corner >> (d - 1 - a)) & 1;
            flat = flat * n + (j + up) % n;
            w *= if up == 1 { 1.0 - lo } else { lo };
        }
        f(flat, w);
    }
}

/// Cloud-in-cell density of a slice: each particle carries mass `1/N`.
pub fn cic_deposit(spec: &GridSpec, positions: &[f64]) -> Vec<f64> {
    let d = spec.d;
    let np = positions.len() / d;
    let scale = 1.0 / (np as f64 * spec.cell_volume());
    let mut rho = vec![0.0; spec.len()];
    for x in positions.chunks(d) {
        cic_stencil(spec, x, &mut |flat, w| rho[flat] += w * scale);
    }
    rho
}

/// Cloud-in-cell interpolation of a grid field at `x`.
pub fn cic_interpolate(spec: &GridSpec, values: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    cic_stencil(spec, x, &mut |flat, w| s += w * values[flat]);
    s
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        x.sin() / x
    }
}

impl Slice {
    fn spectrum(&self, spectral: &SpectralGrid) -> &[Complex64] {
        let spec = *spectral.spec();
        let (cached_spec, hat) =
            self.spectrum.get_or_init(|| (spec, spectral.forward(&cic_deposit(&spec, &self.positions))));
        assert_eq!(*cached_spec, spec, "slice spectra cached for a different mesh");
        hat
    }
}

fn mesh(ens: &ParticleEnsemble, nodes: &[Node], lambda: f64, cfg: &DriftBackendConfig) -> Result<Vec<f64>> {
    let spec = cfg.mesh.expect("validated");
    if spec.d != ens.d() {
        return Err(KsError::BackendMismatch(format!("mesh is {}-dimensional, ensemble {}", spec.d, ens.d())));
    }
    let spectral: Arc<SpectralGrid> = ens.spectral_for(spec)?;
    let slices = ens.history().items();
    let d = spec.d;
    let ksq = spectral.ksq();
    let len = spec.len();
    let dim_half = 0.5 * d as f64;
    let coeffs: Vec<(f64, f64)> = nodes
        .iter()
        .map(|node| {
            (
                node.weight * (-lambda * node.lag).exp() * regularization_factor(node.lag, cfg.epsilon, dim_half + 1.0),
                node.lag,
            )
        })
        .collect();
    let spectra: Vec<&[Complex64]> = nodes.iter().map(|node| slices[node.slice].spectrum(&spectral)).collect();
    // Compensate the cloud-in-cell window once for the deposit and once for the readback.
    let window: Vec<f64> = (0..len)
        .map(|flat| {
            let mut rem = flat;
            let mut w = 1.0;
            for _ in 0..d {
                let j = rem % spec.n;
                rem /= spec.n;
                let kh = 2.0 * std::f64::consts::PI * spec.mode(j) as f64 / spec.n as f64;
                w *= sinc(0.5 * kh).powi(2);
            }
            w * w
        })
        .collect();
    let mut total = vec![Complex64::default(); len];
    total.par_iter_mut().enumerate().for_each(|(i, acc)| {
        let k2 = ksq[i];
        for ((c, lag), hat) in coeffs.iter().zip(&spectra) {
            *acc += hat[i] * (c * (-0.5 * k2 * lag).exp());
        }
        *acc /= window[i];
    });
    let grad = spectral.gradient(&total);
    let mut out = vec![0.0; ens.len() * d];
    out.par_chunks_mut(d).zip(ens.positions().par_chunks(d)).for_each(|(o, x)| {
        for a in 0..d {
            o[a] = cic_interpolate(&spec, &grad[a], x);
        }
    });
    Ok(out)
}
