//! The interacting particle system
//! `dX^i = chi b0^eps(t, X^i) dt + (chi/N) sum_j int_0^t K^eps_{t-s}(X^i_t - X^j_s) ds dt + dW^i`,
//! discretised by Euler-Maruyama with the memory integral taken over the
//! retained history slices.

mod drift;
mod ensemble;
mod kde;
pub mod rng;
mod run;

pub use drift::{cic_deposit, cic_interpolate, drift_eval, interaction_eval, DriftBackend, DriftBackendConfig};
pub use ensemble::{sample_initial, ParticleEnsemble, Slice, StepReport};
pub use kde::{bandwidth_rule, empirical_density, kde, support_count, DEFAULT_BANDWIDTH_CONSTANT};
pub use run::{simulate, ParticleRun, ParticleRunConfig};
