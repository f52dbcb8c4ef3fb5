//! Time marching for `∂t u + div(f(u) K*u) = ε Δu`.
//!
//! The stepper is a conservative finite-volume scheme with a local
//! Lax–Friedrichs interface flux, explicit diffusion and a two-stage SSP
//! Runge–Kutta integrator. [`picard_iterate`] builds the mild solution by
//! fixed-point iteration and serves as an independent cross-check.

mod diagnostics;
mod picard;
mod scheme;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::physics::{Kernel, Mobility};

pub use diagnostics::{detect_blowup, BlowupReport, DiagnosticsRow, DiagnosticsSeries, DIAGNOSTICS_HEADER};
pub use picard::{picard_iterate, picard_iterate_with, picard_threshold, PicardOptions, PicardResult};
pub use scheme::{central_flux_divergence, cfl_dt, run, step, RunOutput};

pub const DEFAULT_CFL: f64 = 0.45;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;

/// One fully specified viscous run.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: Grid,
    pub u0: Field,
    pub kernel: Arc<Kernel>,
    pub mobility: Mobility,
    pub epsilon: f64,
    pub horizon: f64,
    pub cfl_advection: f64,
    pub cfl_diffusion: f64,
    pub blowup_threshold: f64,
}

impl Problem {
    /// Problem with default CFL numbers and blowup threshold.
    pub fn new(u0: Field, kernel: Arc<Kernel>, mobility: Mobility, epsilon: f64, horizon: f64) -> Result<Self> {
        let p = Self {
            grid: *u0.grid(),
            u0,
            kernel,
            mobility,
            epsilon,
            horizon,
            cfl_advection: DEFAULT_CFL,
            cfl_diffusion: DEFAULT_CFL,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.ensure_same(self.u0.grid())?;
        self.grid.ensure_same(self.kernel.grid())?;
        self.u0.ensure_finite()?;
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return cfg(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return cfg(format!("horizon must be >= 0, got {}", self.horizon));
        }
        for (name, v) in [("cfl_advection", self.cfl_advection), ("cfl_diffusion", self.cfl_diffusion)] {
            if !(v > 0.0 && v <= 1.0) {
                return cfg(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.blowup_threshold > 0.0) {
            return cfg(format!("blowup_threshold must be positive, got {}", self.blowup_threshold));
        }
        if self.mobility.requires_nonnegative() && self.u0.min() < 0.0 {
            return cfg("power mobility requires u0 >= 0 everywhere".into());
        }
        Ok(())
    }

    /// Same problem with a different viscosity.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    /// Same problem with different initial data.
    pub fn with_u0(&self, u0: Field) -> Result<Self> {
        let p = Self { u0, ..self.clone() };
        p.validate()?;
        Ok(p)
    }

    pub fn initial_state(&self) -> State {
        State { time: 0.0, u: self.u0.clone(), step_count: 0, blown_up: false }
    }
}

/// Solution snapshot `u(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub time: f64,
    pub u: Field,
    pub step_count: usize,
    pub blown_up: bool,
}
