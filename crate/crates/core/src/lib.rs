//! Numerical toolkit for two coupled underdominant clines.
//!
//! The crate is organised bottom-up:
//!
//! - [`genetics`]: discrete-generation gamete recursion at a single site and
//!   the `(p, q, D)` change of variables.
//! - [`pde`]: one-dimensional Strang-split integrators for the `(p, q, D)`
//!   system, the four-gamete system and the reduced scalar equation, together
//!   with front tracking and quasi-linkage-equilibrium diagnostics.
//! - [`standing`]: the symmetric standing wave, built both by phase-plane
//!   shooting and by quadrature of the closed-form first integral.
//! - [`speed`]: first-order wave-speed coefficient by quadrature and series,
//!   a Newton solver for the travelling wave, and simulation comparisons.
//! - [`stability`]: discretised linearisation around the standing wave,
//!   spectra, adjoint kernel and relaxation experiments.
//!
//! [`quad`], [`ode`] and [`linalg`] hold the small numerical kernels shared by
//! the modules above.

pub mod error;
pub mod genetics;
pub mod linalg;
pub mod ode;
pub mod pde;
pub mod quad;
pub mod speed;
pub mod stability;
pub mod standing;

pub use error::{Error, Result};
pub use genetics::{FitnessParams, GameteFreqs, Pqd};
pub use pde::{Boundary, DiffusionScheme, Field1D, Grid1D, Quantity, SimConfig, Trajectory};
pub use standing::WaveProfile;

/// Balanced bistable nonlinearity `u(2u - 1)(1 - u)`.
#[inline]
pub fn bistable(u: f64) -> f64 {
    u * (2.0 * u - 1.0) * (1.0 - u)
}

/// Derivative of [`bistable`].
#[inline]
pub fn bistable_prime(u: f64) -> f64 {
    -6.0 * u * u + 6.0 * u - 1.0
}

/// Unbalancing term `u(1 - u)`.
#[inline]
pub fn logistic(u: f64) -> f64 {
    u * (1.0 - u)
}
