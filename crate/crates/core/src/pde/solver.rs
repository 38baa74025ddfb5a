use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::phi::{phi1, phi2};
use super::report::StepDiagnostics;
use super::{BlowUpReport, DriftMode, TimeScheme};
use crate::density::{decay_weight_exponent, lq_norm_values, NormSeries};
use crate::error::{KsError, Result};
use crate::exponent::Exponent;
use crate::fields::{regularization_factor, GaussianMixture};
use crate::grid::{GridField, GridSpec, SpectralGrid};
use crate::history::{trapezoid_weights, History, ThinningPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeProblem {
    pub chi: f64,
    pub lambda: f64,
    pub rho0: GaussianMixture,
    pub c0: GaussianMixture,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: TimeScheme,
    #[serde(default)]
    pub mode: DriftMode,
    /// Require `dt <= cfl_safety h^2`.
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    /// Halt when `sup |rho|` exceeds this.
    #[serde(default = "default_cap")]
    pub blowup_cap: f64,
    /// Retain spectral snapshots of `(rho, c)` for Duhamel and mild-form checks.
    #[serde(default)]
    pub record_history: bool,
    #[serde(default)]
    pub history_policy: ThinningPolicy,
    /// Exponents whose norm series are tracked every step.
    #[serde(default)]
    pub track_norms: Vec<Exponent>,
    /// Track `sup_t sqrt(t) chi ||grad c_t||_inf` every step.
    #[serde(default)]
    pub track_drift: bool,
}

fn default_safety() -> f64 {
    1.0
}

fn default_cap() -> f64 {
    1e8
}

impl SolverConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: TimeScheme::Etd1,
            mode: DriftMode::Standard,
            cfl_safety: default_safety(),
            blowup_cap: default_cap(),
            record_history: false,
            history_policy: ThinningPolicy::keep_all(),
            track_norms: Vec::new(),
            track_drift: false,
        }
    }
}

/// Spectral snapshot of the pair `(rho, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub rho_hat: Vec<Complex64>,
    pub c_hat: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub step: usize,
    pub rho_hat: Vec<Complex64>,
    pub c_hat: Vec<Complex64>,
    pub rho: GridField,
}

/// `-chi div(rho grad c)` in spectral space.
pub(crate) fn transport(spectral: &SpectralGrid, chi: f64, rho: &[f64], c_hat: &[Complex64]) -> Vec<Complex64> {
    if chi == 0.0 {
        return vec![Complex64::default(); rho.len()];
    }
    let grad = spectral.gradient(c_hat);
    let flux: Vec<Vec<f64>> = grad.into_iter().map(|g| g.iter().zip(rho).map(|(a, b)| a * b).collect()).collect();
    let mut div = spectral.divergence_hat(&flux);
    div.iter_mut().for_each(|v| *v *= -chi);
    div
}

struct Multipliers {
    e_rho: Vec<f64>,
    phi1_rho: Vec<f64>,
    phi2_rho: Vec<f64>,
    e_c: Vec<f64>,
    phi1_c: Vec<f64>,
    phi2_c: Vec<f64>,
}

pub struct PdeSolver {
    problem: PdeProblem,
    config: SolverConfig,
    spectral: SpectralGrid,
    mult: Multipliers,
    state: SolverState,
    c0_hat: Vec<Complex64>,
    initial_mass: f64,
    history: History<Snapshot>,
    memory: History<Vec<Complex64>>,
    diagnostics: Vec<StepDiagnostics>,
    norms: Vec<NormSeries>,
    weighted_drift_sup: f64,
}

impl std::fmt::Debug for PdeSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdeSolver")
            .field("t", &self.state.t)
            .field("step", &self.state.step)
            .field("grid", &self.problem.grid)
            .finish()
    }
}

impl PdeSolver {
    pub fn new(problem: PdeProblem, config: SolverConfig) -> Result<Self> {
        let spec = problem.grid;
        spec.validate()?;
        problem.rho0.validate()?;
        problem.c0.validate()?;
        if problem.rho0.d != spec.d || problem.c0.d != spec.d {
            return Err(KsError::GridMismatch("initial data and grid dimensions differ".into()));
        }
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(KsError::Config(format!("dt must be > 0, got {}", config.dt)));
        }
        let h2 = spec.spacing().powi(2);
        if config.dt > config.cfl_safety * h2 {
            return Err(KsError::Config(format!(
                "dt = {} exceeds the step limit {} = safety * h^2",
                config.dt,
                config.cfl_safety * h2
            )));
        }
        if !(problem.chi >= 0.0) || !(problem.lambda >= 0.0) {
            return Err(KsError::Config("chi and lambda must be >= 0".into()));
        }
        if let DriftMode::RegularizedMemory { epsilon } = config.mode {
            if !(epsilon > 0.0) {
                return Err(KsError::Config("memory mode needs epsilon > 0".into()));
            }
            if config.scheme != TimeScheme::Etd1 {
                return Err(KsError::Config("memory mode supports the first-order scheme only".into()));
            }
        }
        let spectral = SpectralGrid::new(spec)?;
        let dt = config.dt;
        let map = |f: &dyn Fn(f64) -> f64, shift: f64| -> Vec<f64> {
            spectral.ksq().iter().map(|&k2| f(-(0.5 * k2 + shift) * dt)).collect()
        };
        let mult = Multipliers {
            e_rho: map(&|z| z.exp(), 0.0),
            phi1_rho: map(&phi1, 0.0),
            phi2_rho: map(&phi2, 0.0),
            e_c: map(&|z| z.exp(), problem.lambda),
            phi1_c: map(&phi1, problem.lambda),
            phi2_c: map(&phi2, problem.lambda),
        };
        let rho = problem.rho0.sample_periodic(&spec)?;
        let rho_hat = spectral.forward(&rho.values);
        let c0_hat = spectral.forward(&problem.c0.sample_periodic(&spec)?.values);
        let initial_mass = rho.integral();
        let mut solver = Self {
            history: History::new(config.history_policy),
            memory: History::new(config.history_policy),
            norms: config.track_norms.iter().map(|&r| NormSeries::new(r, decay_weight_exponent(spec.d, r))).collect(),
            state: SolverState { t: 0.0, step: 0, c_hat: c0_hat.clone(), rho_hat, rho },
            c0_hat,
            problem,
            config,
            spectral,
            mult,
            initial_mass,
            diagnostics: Vec::new(),
            weighted_drift_sup: 0.0,
        };
        if matches!(solver.config.mode, DriftMode::RegularizedMemory { .. }) {
            solver.memory.push(0.0, solver.state.rho_hat.clone());
            solver.state.c_hat = solver.memory_c_hat();
        }
        solver.record();
        Ok(solver)
    }

    pub fn problem(&self) -> &PdeProblem {
        &self.problem
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn spectral(&self) -> &SpectralGrid {
        &self.spectral
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn rho(&self) -> &GridField {
        &self.state.rho
    }

    pub fn c(&self) -> GridField {
        GridField { spec: self.problem.grid, values: self.spectral.inverse(self.state.c_hat.clone()) }
    }

    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }

    pub fn history(&self) -> &History<Snapshot> {
        &self.history
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    /// Norm series for each tracked exponent; the weighted values skip `t = 0`.
    pub fn norm_series(&self) -> &[NormSeries] {
        &self.norms
    }

    /// `sup_x |b(t, x)| = chi sup |grad c|`.
    /// Running `sup_t sqrt(t) chi ||grad c_t||_inf`; zero unless `track_drift` is set.
    pub fn weighted_drift_sup(&self) -> f64 {
        self.weighted_drift_sup
    }

    pub fn drift_sup(&self) -> f64 {
        let grad = self.spectral.gradient(&self.state.c_hat);
        let mut sup: f64 = 0.0;
        for i in 0..self.problem.grid.len() {
            let m2: f64 = grad.iter().map(|g| g[i] * g[i]).sum();
            sup = sup.max(m2.sqrt());
        }
        self.problem.chi * sup
    }

    fn transport(&self, rho: &[f64], c_hat: &[Complex64]) -> Vec<Complex64> {
        transport(&self.spectral, self.problem.chi, rho, c_hat)
    }

    fn memory_c_hat(&self) -> Vec<Complex64> {
        let DriftMode::RegularizedMemory { epsilon } = self.config.mode else {
            unreachable!("memory drift requested outside memory mode")
        };
        let t = self.state.t;
        let d = self.problem.grid.d as f64;
        let lambda = self.problem.lambda;
        let ksq = self.spectral.ksq();
        let reg0 = (-lambda * t).exp() * regularization_factor(t, epsilon, 0.5 * d);
        let mut out: Vec<Complex64> =
            self.c0_hat.iter().zip(ksq).map(|(c, &k2)| c * (reg0 * (-0.5 * k2 * t).exp())).collect();
        let weights = trapezoid_weights(self.memory.times());
        for ((s, rho_hat), w) in self.memory.iter().zip(weights) {
            let tau = t - s;
            if tau <= 0.0 || w == 0.0 {
                continue;
            }
            let coef = w * (-lambda * tau).exp() * regularization_factor(tau, epsilon, 0.5 * d + 1.0);
            for ((o, r), &k2) in out.iter_mut().zip(rho_hat).zip(ksq) {
                *o += r * (coef * (-0.5 * k2 * tau).exp());
            }
        }
        out
    }

    /// Advance one step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let n_rho = self.transport(&self.state.rho.values, &self.state.c_hat);
        let m = &self.mult;
        let rho_hat = &self.state.rho_hat;
        let c_hat = &self.state.c_hat;
        let mut rho_next: Vec<Complex64> =
            (0..rho_hat.len()).map(|i| rho_hat[i] * m.e_rho[i] + n_rho[i] * (dt * m.phi1_rho[i])).collect();
        let mut c_next: Vec<Complex64> =
            (0..c_hat.len()).map(|i| c_hat[i] * m.e_c[i] + rho_hat[i] * (dt * m.phi1_c[i])).collect();
        if self.config.scheme == TimeScheme::Etd2 {
            let rho_a = self.spectral.inverse(rho_next.clone());
            let n_a = self.transport(&rho_a, &c_next);
            let m = &self.mult;
            for i in 0..rho_next.len() {
                let dr = rho_next[i] - rho_hat[i];
                rho_next[i] += (n_a[i] - n_rho[i]) * (dt * m.phi2_rho[i]);
                c_next[i] += dr * (dt * m.phi2_c[i]);
            }
        }
        self.state.rho = GridField { spec: self.problem.grid, values: self.spectral.inverse(rho_next.clone()) };
        self.state.rho_hat = rho_next;
        self.state.step += 1;
        self.state.t = self.state.step as f64 * dt;
        if matches!(self.config.mode, DriftMode::RegularizedMemory { .. }) {
            self.memory.push(self.state.t, self.state.rho_hat.clone());
            self.state.c_hat = self.memory_c_hat();
        } else {
            self.state.c_hat = c_next;
        }
        let sup = self.state.rho.sup_abs();
        if !sup.is_finite() || sup > self.config.blowup_cap || !self.state.rho.is_finite() {
            let report =
                BlowUpReport { t: self.state.t, step: self.state.step, sup_norm: sup, mass: self.state.rho.integral() };
            return Err(KsError::BlowUp(report));
        }
        self.record();
        Ok(())
    }

    /// Step until `t_end` (rounded to the nearest whole number of steps).
    pub fn run_to(&mut self, t_end: f64) -> Result<()> {
        let target = (t_end / self.config.dt).round() as usize;
        while self.state.step < target {
            self.step()?;
        }
        Ok(())
    }

    /// [`run_to`](Self::run_to), appending `rho` now, every `every` steps and
    /// at the end to `fields`. Fields recorded before a blow-up are kept.
    pub fn run_recording(&mut self, t_end: f64, every: usize, fields: &mut Vec<(f64, GridField)>) -> Result<()> {
        let every = every.max(1);
        let target = (t_end / self.config.dt).round() as usize;
        fields.push((self.state.t, self.state.rho.clone()));
        while self.state.step < target {
            self.step()?;
            if self.state.step.is_multiple_of(every) || self.state.step == target {
                fields.push((self.state.t, self.state.rho.clone()));
            }
        }
        Ok(())
    }

    fn record(&mut self) {
        let rho = &self.state.rho;
        let cell = rho.spec.cell_volume();
        let sup = rho.sup_abs();
        let min = rho.min();
        let tol_neg = 1e-8 * sup;
        let diag = StepDiagnostics {
            t: self.state.t,
            mass: rho.integral(),
            sup_norm: sup,
            min_value: min,
            negative_cells: rho.values.iter().filter(|&&v| v < -tol_neg).count(),
        };
        self.diagnostics.push(diag);
        for series in &mut self.norms {
            if self.state.t > 0.0 || series.weight_exponent == 0.0 {
                let norm = lq_norm_values(&rho.values, cell, series.r);
                series.push(self.state.t, norm).expect("solver times increase");
            }
        }
        if self.config.track_drift && self.state.t > 0.0 {
            self.weighted_drift_sup = self.weighted_drift_sup.max(self.state.t.sqrt() * self.drift_sup());
        }
        if self.config.record_history {
            let snap = Snapshot { rho_hat: self.state.rho_hat.clone(), c_hat: self.state.c_hat.clone() };
            self.history.push(self.state.t, snap);
        }
    }
}
