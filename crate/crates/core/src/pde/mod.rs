//! Pseudo-spectral exponential-integrator solver for the coupled system
//! `d_t rho = (1/2) lap rho - chi div(rho grad c)`,
//! `d_t c = (1/2) lap c - lambda c + rho` on a periodic box, plus independent
//! evaluations of its mild form used as a-posteriori checks.

mod duhamel;
mod phi;
mod report;
mod solver;

use serde::{Deserialize, Serialize};

pub use duhamel::{duhamel_c, mild_residual, DuhamelOptions, DuhamelResult};
pub use phi::{phi1, phi2};
pub use report::{density_decay_report, DecayEntry, DecayReport, StepDiagnostics};
pub use solver::{PdeProblem, PdeSolver, Snapshot, SolverConfig, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Exponential Euler.
    #[default]
    Etd1,
    /// Second-order exponential Runge-Kutta (Cox-Matthews).
    Etd2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DriftMode {
    /// `c` is stepped alongside `rho`.
    #[default]
    Standard,
    /// `c` is rebuilt each step from the whole density history with the
    /// regularised kernels, mirroring the particle drift `b^eps`.
    RegularizedMemory { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpReport {
    pub t: f64,
    pub step: usize,
    pub sup_norm: f64,
    pub mass: f64,
}
