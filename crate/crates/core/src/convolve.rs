//! Nonlocal force `K*u` and its divergence via per-mode multiplication.
//!
//! The result is exactly the discrete circular convolution
//! `(K*u)_c = h^d Σ_y K[c-y] u[y]`; no de-aliasing is applied.

use num_complex::Complex64;

use crate::error::Result;
use crate::field::{Field, VectorField};
use crate::physics::Kernel;
use crate::spectral;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Spectral,
    Direct,
}

/// Force field `V = K*u` and `div V`.
#[derive(Clone, Debug)]
pub struct ForceEval {
    pub force: VectorField,
    pub div_force: Field,
    pub provenance: Provenance,
}

pub fn convolve(kernel: &Kernel, u: &Field) -> Result<ForceEval> {
    kernel.grid().ensure_same(u.grid())?;
    u.ensure_finite()?;
    Ok(convolve_unchecked(kernel, u.grid(), u.values()))
}

pub(crate) fn convolve_unchecked(
    kernel: &Kernel,
    grid: &crate::field::Grid,
    values: &[f64],
) -> ForceEval {
    let hat = spectral::forward(grid, values);
    let apply = |m: &[Complex64]| {
        let prod: Vec<Complex64> = m.iter().zip(&hat).map(|(a, b)| a * b).collect();
        spectral::inverse(grid, &prod)
    };
    let components = (0..grid.dim()).map(|a| apply(kernel.multiplier(a))).collect();
    let div = apply(kernel.divergence_multiplier());
    ForceEval {
        force: VectorField::new_unchecked(*grid, components),
        div_force: Field::new_unchecked(*grid, div),
        provenance: Provenance::Spectral,
    }
}

/// Empirical Lipschitz constant: the largest periodic forward difference of
/// any component along any axis, divided by `h`.
pub fn lipschitz_estimate(v: &VectorField) -> f64 {
    let g = v.grid();
    let inv_h = 1.0 / g.spacing();
    let mut best = 0.0_f64;
    for c in v.components() {
        for axis in 0..g.dim() {
            for i in 0..g.len() {
                best = best.max((c[g.neighbor(i, axis, 1)] - c[i]).abs() * inv_h);
            }
        }
    }
    best
}
