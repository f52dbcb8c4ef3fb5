//! Interaction kernels `K` and their statistics.
//!
//! Samples are stored in displacement order: entry `j` along an axis holds
//! `K` at displacement `wrapped(j) * h`, so that `(K*u)_c = h^d Σ_y K[c-y] u[y]`
//! is a plain circular convolution. The spectral side holds the per-mode
//! multiplier of `u ↦ K*u` in the half-complex layout of [`crate::spectral`].

use std::path::PathBuf;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{tv_of_values, Field, Grid, VectorField};
use crate::spectral::{self, Mode};

/// Which family a kernel belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelTag {
    /// `K*u = ∇S` with `-ΔS + S = u`.
    HksBesselGradient,
    /// `K*u = -∇v` with `-Δv = u - mean(u)`.
    CgvNewtonianGradient,
    /// `K = ∇G_σ` (attractive for positive strength).
    GaussianGradient,
    /// Indicator of `[-a, a]^d` in every component.
    Box,
    CustomSampled,
}

impl KernelTag {
    pub fn name(&self) -> &'static str {
        match self {
            Self::HksBesselGradient => "hks",
            Self::CgvNewtonianGradient => "cgv",
            Self::GaussianGradient => "gaussian-gradient",
            Self::Box => "box",
            Self::CustomSampled => "custom",
        }
    }

    fn is_analytic(&self) -> bool {
        matches!(self, Self::HksBesselGradient | Self::CgvNewtonianGradient | Self::GaussianGradient)
    }
}

/// Request for [`make_kernel`].
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Hks,
    Cgv,
    GaussianGradient { sigma: f64, strength: f64 },
    Box { a: f64 },
    /// Samples in displacement order, one array per component.
    Sampled(Vec<Vec<f64>>),
    /// Snapshot file whose payload holds one field per component.
    File(PathBuf),
}

/// Norms of `K` that feed every bound curve. Approximated from samples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KernelStats {
    /// `‖K‖_{L¹}`.
    pub l1_norm: f64,
    /// `‖K‖_{L∞}`.
    pub linf_norm: f64,
    /// `|∇K|(T^d)`, the sum of component total variations.
    pub tv: f64,
    /// `|div K|(T^d)`.
    pub div_tv: f64,
}

#[derive(Clone, Debug)]
pub struct Kernel {
    grid: Grid,
    samples: VectorField,
    spectral: Vec<Vec<Complex64>>,
    div_spectral: Vec<Complex64>,
    stats: KernelStats,
    tag: KernelTag,
}

impl Kernel {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &VectorField {
        &self.samples
    }

    /// Multiplier of component `axis` in the half-complex layout.
    pub fn multiplier(&self, axis: usize) -> &[Complex64] {
        &self.spectral[axis]
    }

    /// Multiplier of `u ↦ div K*u`.
    pub fn divergence_multiplier(&self) -> &[Complex64] {
        &self.div_spectral
    }

    pub fn stats(&self) -> KernelStats {
        self.stats
    }

    pub fn tag(&self) -> KernelTag {
        self.tag
    }

    /// The identically zero kernel.
    pub fn zero(grid: Grid) -> Self {
        make_kernel(&KernelSpec::Sampled(vec![vec![0.0; grid.len()]; grid.dim()]), &grid)
            .expect("zero kernel is valid")
    }
}

fn analytic_multiplier(spec: &KernelSpec, mode: &Mode, axis: usize) -> Complex64 {
    if mode.nyquist[axis] {
        return Complex64::new(0.0, 0.0);
    }
    let xi = mode.xi[axis];
    let k2 = mode.norm_sq();
    let scale = match spec {
        KernelSpec::Hks => 1.0 / (1.0 + k2),
        KernelSpec::Cgv => {
            if k2 == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            -1.0 / k2
        }
        KernelSpec::GaussianGradient { sigma, strength } => {
            strength * (-0.5 * sigma * sigma * k2).exp()
        }
        _ => unreachable!("not an analytic kernel"),
    };
    Complex64::new(0.0, xi * scale)
}

/// Spectral divergence `Σ_a i ξ_a m_a` with Nyquist modes dropped.
pub(crate) fn divergence_multiplier(grid: &Grid, spectral: &[Vec<Complex64>]) -> Vec<Complex64> {
    spectral::modes(grid)
        .iter()
        .enumerate()
        .map(|(k, mode)| {
            (0..grid.dim())
                .filter(|&a| !mode.nyquist[a])
                .map(|a| Complex64::new(0.0, mode.xi[a]) * spectral[a][k])
                .sum()
        })
        .collect()
}

fn overlap(center: f64, h: f64, a: f64) -> f64 {
    let lo = (center - 0.5 * h).max(-a);
    let hi = (center + 0.5 * h).min(a);
    ((hi - lo) / h).clamp(0.0, 1.0)
}

/// Builds a kernel on `grid`. Analytic kernels are defined by their
/// multipliers and sampled by inverse transform; sampled kernels go the other
/// way and are checked for agreement on a delta field.
pub fn make_kernel(spec: &KernelSpec, grid: &Grid) -> Result<Kernel> {
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let dim = grid.dim();
    let (tag, samples, spectral) = match spec {
        KernelSpec::Hks | KernelSpec::Cgv | KernelSpec::GaussianGradient { .. } => {
            let tag = match spec {
                KernelSpec::Hks => KernelTag::HksBesselGradient,
                KernelSpec::Cgv => KernelTag::CgvNewtonianGradient,
                _ => KernelTag::GaussianGradient,
            };
            if let KernelSpec::GaussianGradient { sigma, strength } = spec {
                if !(sigma.is_finite() && *sigma > 2.0 * h) {
                    return Err(Error::Resolution(format!(
                        "gaussian width {sigma} must exceed two cells (2h = {})",
                        2.0 * h
                    )));
                }
                if !strength.is_finite() {
                    return Err(Error::Config("kernel strength must be finite".into()));
                }
            }
            let modes = spectral::modes(grid);
            let spectral: Vec<Vec<Complex64>> = (0..dim)
                .map(|a| modes.iter().map(|m| analytic_multiplier(spec, m, a)).collect())
                .collect();
            let samples = spectral
                .iter()
                .map(|m| spectral::inverse(grid, m).into_iter().map(|v| v / vol).collect())
                .collect();
            (tag, samples, spectral)
        }
        KernelSpec::Box { a } => {
            if !(a.is_finite() && *a > 0.0 && *a < 0.5 * grid.length()) {
                return Err(Error::Config(format!("box half-width must be in (0, L/2), got {a}")));
            }
            let comp: Vec<f64> = (0..grid.len())
                .map(|idx| {
                    let m = grid.unravel(idx);
                    (0..dim).map(|ax| overlap(grid.wrapped(m[ax]) as f64 * h, h, *a)).product()
                })
                .collect();
            (KernelTag::Box, vec![comp; dim], Vec::new())
        }
        KernelSpec::Sampled(components) => (KernelTag::CustomSampled, components.clone(), Vec::new()),
        KernelSpec::File(path) => {
            let (fgrid, values) = crate::field::read_snapshot_raw(path)?;
            fgrid.ensure_same(grid)?;
            if values.len() != grid.len() * dim {
                return Err(Error::Format(format!(
                    "kernel file {} must hold {dim} field(s)",
                    path.display()
                )));
            }
            let components = values.chunks_exact(grid.len()).map(|c| c.to_vec()).collect();
            (KernelTag::CustomSampled, components, Vec::new())
        }
    };
    let samples = VectorField::new(*grid, samples)?;
    let spectral = if tag.is_analytic() {
        spectral
    } else {
        let spectral: Vec<Vec<Complex64>> = samples
            .components()
            .iter()
            .map(|c| spectral::forward(grid, c).into_iter().map(|z| z * vol).collect())
            .collect();
        check_delta_response(grid, &samples, &spectral)?;
        spectral
    };

    let div_spectral = divergence_multiplier(grid, &spectral);
    let div_values: Vec<f64> = if tag.is_analytic() {
        spectral::inverse(grid, &div_spectral).into_iter().map(|v| v / vol).collect()
    } else {
        crate::field::divergence(&samples)?.into_values()
    };
    let stats = KernelStats {
        l1_norm: samples.l1(),
        linf_norm: samples.linf(),
        tv: samples.components().iter().map(|c| tv_of_values(grid, c)).sum(),
        div_tv: vol * div_values.iter().map(|v| v.abs()).sum::<f64>(),
    };
    Ok(Kernel { grid: *grid, samples, spectral, div_spectral, stats, tag })
}

fn check_delta_response(grid: &Grid, samples: &VectorField, spectral: &[Vec<Complex64>]) -> Result<()> {
    let vol = grid.cell_volume();
    let mut delta = vec![0.0; grid.len()];
    delta[0] = 1.0 / vol;
    let hat = spectral::forward(grid, &delta);
    for (a, m) in spectral.iter().enumerate() {
        let prod: Vec<Complex64> = m.iter().zip(&hat).map(|(x, y)| x * y).collect();
        let resp = spectral::inverse(grid, &prod);
        let direct = samples.component(a);
        let scale = direct.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
        let err = resp.iter().zip(direct).fold(0.0_f64, |s, (x, y)| s.max((x - y).abs()));
        if err > 1e-10 * scale.max(1.0) {
            return Err(Error::InvalidField(format!(
                "kernel samples and multiplier disagree on a delta field (err {err:e})"
            )));
        }
    }
    Ok(())
}

/// Field whose value in cell `idx` is the kernel sample at displacement
/// `x_idx - x_center`, i.e. the kernel re-centered on `center`.
pub fn kernel_centered_at(kernel: &Kernel, axis: usize, center: usize) -> Field {
    let grid = *kernel.grid();
    let comp = kernel.samples().component(axis);
    let c = grid.unravel(center);
    let n = grid.cells_per_axis();
    let values = (0..grid.len())
        .map(|idx| {
            let m = grid.unravel(idx);
            let d0 = (m[0] + n - c[0]) % n;
            let d1 = (m[1] + n - c[1]) % n;
            comp[grid.ravel([d0, d1])]
        })
        .collect();
    Field::new_unchecked(grid, values)
}
