//! Numerical laboratory for the parabolic-parabolic Keller-Segel system and
//! its McKean-Vlasov particle interpretation.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`]: Gamma/Beta functions, adaptive Gauss-Kronrod quadrature and
//!   the closed-form Gaussian Lebesgue norms every constant is built from.
//! * [`constants`]: the explicit smallness conditions, the density bound
//!   `C_q` and the bootstrap recursion for `||rho_t||_{d/2}`.
//! * [`fields`]: Gaussian-mixture initial data, the singular kernel `K` and
//!   its regularisation, and the linear drift `b0`.
//! * [`grid`] and [`density`]: periodic grid fields, FFTs and norms.
//! * [`pde`]: exponential-integrator spectral solver, Duhamel and mild-form
//!   a-posteriori checks, decay reports.
//! * [`particles`]: the non-Markovian interacting particle system with
//!   pairwise and particle-mesh drift backends, and KDE.
//! * [`verification`]: structured reports tying measurements to bounds.
//! * [`io`]: configuration, binary snapshot/position formats and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod density;
pub mod error;
pub mod exponent;
pub mod fields;
pub mod grid;
pub mod history;
pub mod io;
pub mod particles;
pub mod pde;
pub mod special;
pub mod verification;

pub use error::{KsError, Result};
pub use exponent::Exponent;
