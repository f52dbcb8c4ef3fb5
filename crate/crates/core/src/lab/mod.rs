//! Experiment harness: bound curves, viscosity-rate and L¹-stability
//! studies, and the two model presets.

mod bounds;
mod studies;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::init::U0Spec;
use crate::physics::{make_kernel, KernelSpec, Mobility};
use crate::solver::Problem;

pub use bounds::{
    linfty_bound_curve, linfty_bound_for, mobility_bounds_for, tv_bound_curve, BoundCurve, BoundKind, LinftyBound, TvRate,
};
pub use studies::{
    amplitude_perturbation, bump_perturbation, fit_line, gronwall_prediction, rate_study, run_rate_study, shift_perturbation,
    stability_study, trajectory_linf, uniform_times, RateOptions, RateOutcome, RateReference, RateStudy, StabilityOptions,
    StabilityRow, StabilityTable,
};

/// Hyperbolic Keller–Segel on the unit circle: logistic mobility and the
/// force `∇S` with `-S'' + S = u`. Requires `0 ≤ u0 ≤ 1`.
pub fn preset_hks(n: usize, epsilon: f64, horizon: f64, u0: &U0Spec) -> Result<Problem> {
    let grid = Grid::line(n, 1.0)?;
    let u0 = u0.build(&grid)?;
    if u0.min() < 0.0 || u0.max() > 1.0 {
        return Err(Error::Config(format!("HKS needs 0 <= u0 <= 1, got range [{}, {}]", u0.min(), u0.max())));
    }
    let kernel = make_kernel(&KernelSpec::Hks, &grid)?;
    Problem::new(u0, Arc::new(kernel), Mobility::logistic(), epsilon, horizon)
}

/// Repulsive model `∂t u - (u^m v′)′ = 0`, `-v″ = u - ∫u`, on the unit
/// circle. Requires `u0 > 0` and `m > 0`.
pub fn preset_cgv(n: usize, m_exponent: f64, epsilon: f64, horizon: f64, u0: &U0Spec) -> Result<Problem> {
    if !(m_exponent > 0.0) {
        return Err(Error::Config(format!("CGV exponent must be positive, got {m_exponent}")));
    }
    let grid = Grid::line(n, 1.0)?;
    let u0 = u0.build(&grid)?;
    if !(u0.min() > 0.0) {
        return Err(Error::Config(format!("CGV needs u0 > 0, got min {}", u0.min())));
    }
    let kernel = make_kernel(&KernelSpec::Cgv, &grid)?;
    Problem::new(u0, Arc::new(kernel), Mobility::power(m_exponent)?, epsilon, horizon)
}
