//! Special functions and quadrature shared by every other module.

mod beta;
mod gamma;
mod gauss;
pub mod quadrature;

pub(crate) use beta::beta_unchecked;
pub use beta::{beta, beta_epsilon, beta_identity_check, beta_integral, BetaQuery};
pub use gamma::{gamma, ln_gamma};
pub use gauss::{c0, c1, gaussian_lr_norm, grad_gaussian_lr_norm, C1Convention, GaussNormQuery};
