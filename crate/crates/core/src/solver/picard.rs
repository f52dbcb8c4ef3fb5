use num_complex::Complex64;

use crate::convolve::convolve_unchecked;
use crate::error::{Error, Result};
use crate::field::{neumaier_sum, norm_l1, norm_linf, Field};
use crate::spectral;

use super::Problem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardOptions {
    /// Substeps of the Duhamel quadrature on `[0, T_short]`.
    pub substeps: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { substeps: 64 }
    }
}

#[derive(Clone, Debug)]
pub struct PicardResult {
    /// Last iterate evaluated at `T_short`.
    pub field: Field,
    /// `‖vⁿ⁺¹ - vⁿ‖_X` for each performed iteration.
    pub increments: Vec<f64>,
    /// Ratios of consecutive increments; increments at rounding level count
    /// as zero and `0/0` is reported as `0`.
    pub contraction_factors: Vec<f64>,
    /// False once three consecutive factors exceeded one.
    pub contractive: bool,
}

/// Contraction time `ε / (4 C² ‖K‖²_L¹ (R sup|f′| + sup|f|)²)` with
/// `R = 2‖u0‖_{L¹∩L∞}` and both suprema over `[-2R, 2R]`.
pub fn picard_threshold(p: &Problem, c: f64) -> Result<f64> {
    let r = 2.0 * norm_l1(&p.u0)?.max(norm_linf(&p.u0)?);
    let b = p.mobility.bounds(2.0 * r);
    let k = p.kernel.stats().l1_norm;
    let rate = r * b.sup_fprime + b.sup_f;
    Ok(p.epsilon / (4.0 * c * c * k * k * rate * rate))
}

const ROUNDOFF_ULPS: f64 = 16.0;

pub fn picard_iterate(p: &Problem, t_short: f64, iterations: usize) -> Result<PicardResult> {
    picard_iterate_with(p, t_short, iterations, PicardOptions::default())
}

pub fn picard_iterate_with(p: &Problem, t_short: f64, iterations: usize, opts: PicardOptions) -> Result<PicardResult> {
    p.validate()?;
    if p.epsilon <= 0.0 {
        return Err(Error::Unsupported("Picard iteration needs epsilon > 0".into()));
    }
    if !(t_short > 0.0 && t_short.is_finite()) {
        return Err(Error::Config(format!("T_short must be positive, got {t_short}")));
    }
    if opts.substeps == 0 || iterations == 0 {
        return Err(Error::Config("substeps and iterations must be at least 1".into()));
    }
    let map = DuhamelMap::new(p, t_short, opts.substeps);
    let mut v: Vec<Vec<f64>> = vec![p.u0.values().to_vec(); opts.substeps + 1];
    let mut increments = Vec::with_capacity(iterations);
    let mut contraction_factors = Vec::new();
    let mut contractive = true;
    let mut run_above = 0;
    for _ in 0..iterations {
        let next = map.apply(&v)?;
        let mut inc = map.x_norm_of_difference(&next, &v);
        // below this the increment is rounding noise and its ratio meaningless
        if inc <= ROUNDOFF_ULPS * f64::EPSILON * map.x_norm(&next) {
            inc = 0.0;
        }
        if let Some(&last) = increments.last() {
            let factor = if last == 0.0 && inc == 0.0 { 0.0 } else { inc / last };
            contraction_factors.push(factor);
            run_above = if factor > 1.0 { run_above + 1 } else { 0 };
        }
        increments.push(inc);
        v = next;
        if run_above >= 3 || !inc.is_finite() {
            contractive = false;
            break;
        }
    }
    let last = v.pop().expect("substeps >= 1");
    Ok(PicardResult {
        field: Field::new_unchecked(p.grid, last),
        increments,
        contraction_factors,
        contractive,
    })
}

/// `F(v)(t_j) = e^{ε t_j Δ} u0 - Δs Σ_{i≤j} e^{ε (t_j - t_i) Δ} div(f(v_i) K*v_i)`.
struct DuhamelMap<'a> {
    p: &'a Problem,
    ds: f64,
    substeps: usize,
    u0_hat: Vec<Complex64>,
    decay_step: Vec<f64>,
    decay_rate: Vec<f64>,
    derivative: Vec<Vec<Complex64>>,
}

impl<'a> DuhamelMap<'a> {
    fn new(p: &'a Problem, t_short: f64, substeps: usize) -> Self {
        let modes = spectral::modes(&p.grid);
        let ds = t_short / substeps as f64;
        let decay_rate: Vec<f64> = modes.iter().map(|m| p.epsilon * m.norm_sq()).collect();
        let derivative = (0..p.grid.dim())
            .map(|a| {
                modes
                    .iter()
                    .map(|m| if m.nyquist[a] { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, m.xi[a]) })
                    .collect()
            })
            .collect();
        Self {
            p,
            ds,
            substeps,
            u0_hat: spectral::forward(&p.grid, p.u0.values()),
            decay_step: decay_rate.iter().map(|r| (-r * ds).exp()).collect(),
            decay_rate,
            derivative,
        }
    }

    fn source_hat(&self, v: &[f64]) -> Result<Vec<Complex64>> {
        let g = &self.p.grid;
        let len = spectral::spectrum_len(g);
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        if self.p.mobility.is_zero() {
            return Ok(out);
        }
        if self.p.mobility.requires_nonnegative() && v.iter().any(|x| *x < 0.0) {
            return Err(Error::Domain("Picard iterate left the power mobility's domain".into()));
        }
        let fv: Vec<f64> = v.iter().map(|&x| self.p.mobility.value(x)).collect();
        let force = convolve_unchecked(&self.p.kernel, g, v);
        for a in 0..g.dim() {
            let flux: Vec<f64> = fv.iter().zip(force.force.component(a)).map(|(x, y)| x * y).collect();
            let hat = spectral::forward(g, &flux);
            for ((o, d), f) in out.iter_mut().zip(&self.derivative[a]).zip(&hat) {
                *o += d * f;
            }
        }
        Ok(out)
    }

    fn apply(&self, v: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let g = &self.p.grid;
        let mut acc = vec![Complex64::new(0.0, 0.0); spectral::spectrum_len(g)];
        let mut out = Vec::with_capacity(self.substeps + 1);
        out.push(self.p.u0.values().to_vec());
        for (j, vj) in v.iter().enumerate().skip(1) {
            let src = self.source_hat(vj)?;
            let t = j as f64 * self.ds;
            let w: Vec<Complex64> = acc
                .iter_mut()
                .zip(&src)
                .zip(self.u0_hat.iter().zip(self.decay_step.iter().zip(&self.decay_rate)))
                .map(|((s, g), (u, (e, r)))| {
                    *s = *s * *e + g;
                    u * (-r * t).exp() - *s * self.ds
                })
                .collect();
            out.push(spectral::inverse(g, &w));
        }
        Ok(out)
    }

    fn x_norm(&self, a: &[Vec<f64>]) -> f64 {
        let zero = vec![vec![0.0; self.p.grid.len()]; a.len()];
        self.x_norm_of_difference(a, &zero)
    }

    fn x_norm_of_difference(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let vol = self.p.grid.cell_volume();
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let d = x.iter().zip(y).map(|(p, q)| (p - q).abs());
                let l1 = vol * neumaier_sum(d.clone());
                let linf = d.fold(0.0_f64, f64::max);
                l1.max(linf)
            })
            .fold(0.0_f64, f64::max)
    }
}
