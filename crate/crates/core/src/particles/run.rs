use serde::{Deserialize, Serialize};

use super::drift::DriftBackendConfig;
use super::ensemble::{ParticleEnsemble, StepReport};
use super::kde::{bandwidth_rule, empirical_density, DEFAULT_BANDWIDTH_CONSTANT};
use crate::constants::ModelParams;
use crate::density::{decay_weight_exponent, lq_norm_grid, NormSeries};
use crate::error::{KsError, Result};
use crate::exponent::Exponent;
use crate::fields::GaussianMixture;
use crate::grid::{GridField, GridSpec};
use crate::history::ThinningPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRunConfig {
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    pub backend: DriftBackendConfig,
    pub kde_grid: GridSpec,
    #[serde(default = "default_bandwidth_constant")]
    pub bandwidth_constant: f64,
    /// Steps between KDE snapshots; the initial and final states are always kept.
    #[serde(default = "default_every")]
    pub record_every: usize,
    #[serde(default)]
    pub history_policy: ThinningPolicy,
    #[serde(default)]
    pub track_norms: Vec<Exponent>,
}

fn default_bandwidth_constant() -> f64 {
    DEFAULT_BANDWIDTH_CONSTANT
}

fn default_every() -> usize {
    10
}

#[derive(Debug, Clone)]
pub struct ParticleRun {
    pub ensemble: ParticleEnsemble,
    pub steps: Vec<StepReport>,
    /// KDE snapshots `(t, field)`.
    pub snapshots: Vec<(f64, GridField)>,
    pub bandwidths: Vec<f64>,
    pub norms: Vec<NormSeries>,
    /// `max_t sqrt(t) max_i |drift_i(t)|` over steps with `t > 0`.
    pub weighted_drift_sup: f64,
}

impl ParticleRun {
    pub fn new(ensemble: ParticleEnsemble, cfg: &ParticleRunConfig) -> Result<Self> {
        let mut run = Self {
            norms: cfg
                .track_norms
                .iter()
                .map(|&r| NormSeries::new(r, decay_weight_exponent(ensemble.d(), r)))
                .collect(),
            ensemble,
            steps: Vec::new(),
            snapshots: Vec::new(),
            bandwidths: Vec::new(),
            weighted_drift_sup: 0.0,
        };
        run.snapshot(cfg)?;
        Ok(run)
    }

    fn snapshot(&mut self, cfg: &ParticleRunConfig) -> Result<()> {
        let e = &self.ensemble;
        let h = bandwidth_rule(e.positions(), e.d(), cfg.bandwidth_constant);
        let field = empirical_density(e, h, &cfg.kde_grid)?;
        let t = e.t();
        for s in &mut self.norms {
            if t > 0.0 || s.weight_exponent == 0.0 {
                s.push(t, lq_norm_grid(&field, s.r))?;
            }
        }
        self.bandwidths.push(h);
        self.snapshots.push((t, field));
        Ok(())
    }

    /// Advance to `t_end` with steps of `cfg.dt`, recording as configured.
    pub fn run_to(
        &mut self,
        params: &ModelParams,
        c0: &GaussianMixture,
        cfg: &ParticleRunConfig,
        t_end: f64,
    ) -> Result<()> {
        let target = (t_end / cfg.dt).round() as usize;
        let every = cfg.record_every.max(1);
        while self.ensemble.step() < target {
            let report = self.ensemble.advance(params, &cfg.backend, cfg.dt, c0)?;
            if report.t > 0.0 {
                self.weighted_drift_sup = self.weighted_drift_sup.max(report.t.sqrt() * report.max_drift);
            }
            self.steps.push(report);
            let k = self.ensemble.step();
            if k.is_multiple_of(every) || k == target {
                self.snapshot(cfg)?;
            }
        }
        Ok(())
    }

    pub fn last_snapshot(&self) -> &(f64, GridField) {
        self.snapshots.last().expect("the initial snapshot is always recorded")
    }
}

/// Sample the initial ensemble and run the particle system to `t_end`.
pub fn simulate(
    params: &ModelParams,
    rho0: &GaussianMixture,
    c0: &GaussianMixture,
    cfg: &ParticleRunConfig,
    t_end: f64,
) -> Result<ParticleRun> {
    if cfg.n == 0 || !(cfg.dt > 0.0) {
        return Err(KsError::Config(format!("need n >= 1 and dt > 0, got n = {}, dt = {}", cfg.n, cfg.dt)));
    }
    if rho0.d != params.d || c0.d != params.d || cfg.kde_grid.d != params.d {
        return Err(KsError::Config("dimensions of rho0, c0, kde grid and parameters differ".into()));
    }
    cfg.backend.validate()?;
    let ens = ParticleEnsemble::sample(rho0, cfg.n, cfg.seed, (0..cfg.n as u64).collect(), cfg.history_policy)?;
    let mut run = ParticleRun::new(ens, cfg)?;
    run.run_to(params, c0, cfg, t_end)?;
    Ok(run)
}
