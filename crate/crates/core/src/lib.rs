//! Viscous approximation of nonlocal conservation laws with nonlinear
//! mobility,
//!
//! ```text
//! ∂t u + div(f(u) K*u) = ε Δu   on the torus T^d, d ∈ {1, 2},
//! ```
//!
//! together with executable checks of the quantitative estimates such
//! solutions obey: conservation and decay laws, L∞ and TV bound curves, time
//! moduli, the two commutator inequalities, a Kuznetsov-type error functional
//! and the vanishing-viscosity rate.

pub mod convolve;
pub mod error;
pub mod exec;
pub mod field;
pub mod init;
pub mod lab;
pub mod physics;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Field, Grid, VectorField};
