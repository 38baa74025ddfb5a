use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::drift::{drift_eval, DriftBackendConfig};
use super::rng::StreamRng;
use crate::constants::ModelParams;
use crate::error::{KsError, Result};
use crate::fields::GaussianMixture;
use crate::grid::{GridSpec, SpectralGrid};
use crate::history::{History, ThinningPolicy};

/// Positions of every particle at one retained time.
#[derive(Debug, Clone)]
pub struct Slice {
    pub positions: Vec<f64>,
    /// Cloud-in-cell density transform, filled on first use by the mesh backend.
    pub(crate) spectrum: OnceLock<(GridSpec, Vec<Complex64>)>,
}

impl Slice {
    pub fn new(positions: Vec<f64>) -> Self {
        Self { positions, spectrum: OnceLock::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: f64,
    pub step: usize,
    /// `max_i |drift_i|` at the start of the step.
    pub max_drift: f64,
}

impl StepReport {
    pub const CSV_HEADER: &'static str = "t,step,max_drift";

    pub fn csv_row(&self) -> String {
        format!("{:e},{},{:e}", self.t, self.step, self.max_drift)
    }
}

/// `N` particles in `R^d` with their retained past.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    n: usize,
    d: usize,
    t: f64,
    step: usize,
    positions: Vec<f64>,
    history: History<Slice>,
    rng_seed: u64,
    stream_offsets: Vec<u64>,
    spectral: OnceLock<Arc<SpectralGrid>>,
}

/// Draw `n` i.i.d. particles from `m`: a component by its weight, then a Gaussian.
pub fn sample_initial(m: &GaussianMixture, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    ParticleEnsemble::sample(m, n, seed, (0..n as u64).collect(), ThinningPolicy::keep_all())
}

impl ParticleEnsemble {
    /// [`sample_initial`] with explicit stream ids and a history policy.
    pub fn sample(
        m: &GaussianMixture,
        n: usize,
        seed: u64,
        stream_offsets: Vec<u64>,
        policy: ThinningPolicy,
    ) -> Result<Self> {
        m.validate()?;
        if n == 0 {
            return Err(KsError::domain("an ensemble needs at least one particle"));
        }
        if stream_offsets.len() != n {
            return Err(KsError::domain(format!("{} stream ids for {n} particles", stream_offsets.len())));
        }
        let total = m.total_weight();
        if m.components.is_empty() || !(total > 0.0) || m.components.iter().any(|c| c.weight < 0.0) {
            return Err(KsError::domain("initial mixture needs non-negative weights with positive sum"));
        }
        let d = m.d;
        let rng = StreamRng::new(seed);
        let mut positions = vec![0.0; n * d];
        positions.par_chunks_mut(d).zip(stream_offsets.par_iter()).for_each(|(x, &stream)| {
            let mut draw = rng.draw(stream, 0);
            let u = draw.uniform() * total;
            let mut acc = 0.0;
            let mut comp = &m.components[m.components.len() - 1];
            for c in &m.components {
                acc += c.weight;
                if u < acc {
                    comp = c;
                    break;
                }
            }
            draw.normals(x);
            let s = comp.variance.sqrt();
            for (xi, mu) in x.iter_mut().zip(&comp.mean) {
                *xi = mu + s * *xi;
            }
        });
        Ok(Self::from_positions(positions, d, 0.0, seed, stream_offsets, policy))
    }

    /// An ensemble whose only history slice is `positions` at time `t`.
    pub fn from_positions(
        positions: Vec<f64>,
        d: usize,
        t: f64,
        rng_seed: u64,
        stream_offsets: Vec<u64>,
        policy: ThinningPolicy,
    ) -> Self {
        let n = positions.len() / d;
        let mut history = History::new(policy);
        history.push(t, Slice::new(positions.clone()));
        Self { n, d, t, step: 0, positions, history, rng_seed, stream_offsets, spectral: OnceLock::new() }
    }

    /// Replace the past with the given slices (times strictly increasing, the last equal to `t`).
    pub fn with_history(mut self, slices: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let mut history = History::new(self.history.policy());
        let mut last_t = f64::NEG_INFINITY;
        for (s, x) in slices {
            if x.len() != self.n * self.d || !(s > last_t) {
                return Err(KsError::InsufficientHistory("slices must match N x d with increasing times".into()));
            }
            last_t = s;
            history.push(s, Slice::new(x));
        }
        match history.last() {
            Some((s, slice)) => {
                self.t = s;
                self.positions = slice.positions.clone();
            }
            None => return Err(KsError::InsufficientHistory("empty history".into())),
        }
        self.history = history;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn history(&self) -> &History<Slice> {
        &self.history
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn stream_offsets(&self) -> &[u64] {
        &self.stream_offsets
    }

    pub(crate) fn spectral_for(&self, spec: GridSpec) -> Result<Arc<SpectralGrid>> {
        if let Some(s) = self.spectral.get() {
            if *s.spec() == spec {
                return Ok(s.clone());
            }
            return Ok(Arc::new(SpectralGrid::new(spec)?));
        }
        let s = Arc::new(SpectralGrid::new(spec)?);
        Ok(self.spectral.get_or_init(|| s).clone())
    }

    /// Per-axis sample mean and variance.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        moments(&self.positions, self.d)
    }

    /// One Euler-Maruyama step `X <- X + b dt + sqrt(dt) xi`, appending the new slice.
    pub fn advance(
        &mut self,
        params: &ModelParams,
        cfg: &DriftBackendConfig,
        dt: f64,
        c0: &GaussianMixture,
    ) -> Result<StepReport> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(KsError::domain(format!("dt must be > 0, got {dt}")));
        }
        let d = self.d;
        let drift = drift_eval(self, params, cfg, c0)?;
        let max_drift =
            drift.par_chunks(d).map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt()).reduce(|| 0.0, f64::max);
        let rng = StreamRng::new(self.rng_seed);
        let counter = self.step as u64 + 1;
        let sq = dt.sqrt();
        let mut next = self.positions.clone();
        next.par_chunks_mut(d).zip(drift.par_chunks(d)).zip(self.stream_offsets.par_iter()).for_each(
            |((x, b), &stream)| {
                let mut xi = [0.0; 3];
                rng.draw(stream, counter).normals(&mut xi[..d]);
                for a in 0..d {
                    x[a] += b[a] * dt + sq * xi[a];
                }
            },
        );
        let t_next = self.t + dt;
        if let Some(i) = next.chunks(d).position(|x| x.iter().any(|v| !v.is_finite())) {
            let drift_magnitude = drift[i * d..(i + 1) * d].iter().map(|v| v * v).sum::<f64>().sqrt();
            return Err(KsError::NonFinite { particle: i, t: t_next, drift_magnitude });
        }
        let report = StepReport { t: self.t, step: self.step, max_drift };
        self.history.push(t_next, Slice::new(next.clone()));
        self.positions = next;
        self.t = t_next;
        self.step += 1;
        Ok(report)
    }

    /// Advance until `t_end`, shortening the last step if needed.
    pub fn run_to(
        &mut self,
        params: &ModelParams,
        cfg: &DriftBackendConfig,
        dt: f64,
        c0: &GaussianMixture,
        t_end: f64,
    ) -> Result<Vec<StepReport>> {
        let mut reports = Vec::new();
        while self.t < t_end - 1e-12 * dt {
            let h = dt.min(t_end - self.t);
            reports.push(self.advance(params, cfg, h, c0)?);
        }
        Ok(reports)
    }
}

pub(crate) fn moments(positions: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (positions.len() / d) as f64;
    let mut mean = vec![0.0; d];
    for x in positions.chunks(d) {
        for a in 0..d {
            mean[a] += x[a];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for x in positions.chunks(d) {
        for a in 0..d {
            var[a] += (x[a] - mean[a]).powi(2);
        }
    }
    var.iter_mut().for_each(|v| *v /= (n - 1.0).max(1.0));
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Component;

    #[test]
    fn initial_sample_statistics() {
        let n = 100_000;
        for d in 1..=3 {
            let e = sample_initial(&GaussianMixture::standard(d), n, 11).unwrap();
            let (mean, var) = e.moments();
            for m in &mean {
                assert!(m.abs() < 4.0 / (n as f64).sqrt(), "{mean:?}");
            }
            let trace: f64 = var.iter().sum();
            assert!((trace / d as f64 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn mixture_weights_are_respected() {
        let m = GaussianMixture::new(
            1,
            vec![
                Component { weight: 0.25, mean: vec![-20.0], variance: 1.0 },
                Component { weight: 0.75, mean: vec![20.0], variance: 1.0 },
            ],
        )
        .unwrap();
        let e = sample_initial(&m, 40_000, 3).unwrap();
        let right = e.positions().iter().filter(|&&x| x > 0.0).count() as f64 / 40_000.0;
        assert!((right - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / 40_000.0).sqrt());
    }

    #[test]
    fn same_seed_same_sample() {
        let m = GaussianMixture::standard(2);
        let a = sample_initial(&m, 1000, 5).unwrap();
        let b = sample_initial(&m, 1000, 5).unwrap();
        let c = sample_initial(&m, 1000, 6).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn free_brownian_variance() {
        let m = GaussianMixture::single(2, 1.0, vec![0.5, -0.5], 0.5);
        let mut e = sample_initial(&m, 10_000, 21).unwrap();
        let p = ModelParams::new(2, 0.0, 0.0, 1.0);
        let cfg = DriftBackendConfig::pairwise(0.05);
        e.run_to(&p, &cfg, 0.05, &GaussianMixture::empty(2), 1.0).unwrap();
        assert_eq!(e.history().len(), 21);
        let (_, var) = e.moments();
        for v in var {
            assert!((v / 1.5 - 1.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn increments_are_the_stream_normals() {
        let m = GaussianMixture::standard(1);
        let mut e = sample_initial(&m, 3, 9).unwrap();
        let x0 = e.positions().to_vec();
        let p = ModelParams::new(1, 0.0, 0.0, 1.0);
        e.advance(&p, &DriftBackendConfig::pairwise(0.1), 0.25, &GaussianMixture::empty(1)).unwrap();
        let rng = StreamRng::new(9);
        for i in 0..3 {
            let mut z = [0.0];
            rng.draw(i as u64, 1).normals(&mut z);
            assert_eq!(e.positions()[i], x0[i] + 0.5 * z[0]);
        }
    }

    #[test]
    fn non_finite_positions_are_reported() {
        let m = GaussianMixture::standard(1);
        let mut e = sample_initial(&m, 4, 1).unwrap();
        let p = ModelParams::new(1, 1.0, 0.0, 1.0);
        let c0 = GaussianMixture::single(1, 1e307, vec![0.0], 1.0);
        let mut cfg = DriftBackendConfig::pairwise(0.0);
        cfg.delta = 0.1;
        let err = e.advance(&p, &cfg, 1e10, &c0).unwrap_err();
        assert!(matches!(err, KsError::NonFinite { .. }), "{err}");
    }
}
