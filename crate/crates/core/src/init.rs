//! Initial data specifications.

use std::f64::consts::PI;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::{read_snapshot, Field, Grid};

/// Initial datum, evaluated as cell averages. Profiles vary along axis 0
/// except the bump, which is radial.
#[derive(Clone, Debug, PartialEq)]
pub enum U0Spec {
    Constant { value: f64 },
    /// `mean + amplitude sin(2π frequency x / L)`.
    Sine { mean: f64, amplitude: f64, frequency: f64 },
    /// `left` for `x < interface`, `right` otherwise (two jumps on the torus).
    Step { left: f64, right: f64, interface: f64 },
    /// `base + amplitude exp(-|x - center|² / (2 width²))`.
    GaussianBump { center: f64, width: f64, amplitude: f64, base: f64 },
    File { path: PathBuf },
}

impl U0Spec {
    pub fn build(&self, grid: &Grid) -> Result<Field> {
        let len = grid.length();
        match self {
            U0Spec::Constant { value } => Ok(Field::constant(*grid, *value)),
            U0Spec::Sine { mean, amplitude, frequency } => {
                let (m, a, k) = (*mean, *amplitude, *frequency);
                Field::from_cell_averages(*grid, |x| m + a * (2.0 * PI * k * x[0] / len).sin())
            }
            U0Spec::Step { left, right, interface } => {
                let (l, r, s) = (*left, *right, *interface);
                Field::from_cell_averages(*grid, |x| if x[0] < s { l } else { r })
            }
            U0Spec::GaussianBump { center, width, amplitude, base } => {
                if !(*width > 0.0) {
                    return Err(Error::Config(format!("bump width must be positive, got {width}")));
                }
                let (c, w, a, b) = (*center, *width, *amplitude, *base);
                let dim = grid.dim();
                Field::from_cell_averages(*grid, |x| {
                    let r2 = (x[0] - c).powi(2) + if dim == 2 { x[1] * x[1] } else { 0.0 };
                    b + a * (-0.5 * r2 / (w * w)).exp()
                })
            }
            U0Spec::File { path } => {
                let f = read_snapshot(path)?;
                f.grid().ensure_same(grid)?;
                Ok(f)
            }
        }
    }
}
