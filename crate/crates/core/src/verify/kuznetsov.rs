use crate::convolve::convolve_unchecked;
use crate::error::{Error, Result};
use crate::field::{neumaier_sum, Grid};
use crate::solver::{Problem, State};

use super::sgn;

pub const MAX_KUZNETSOV_CELLS: usize = 128;
pub const MAX_KUZNETSOV_SNAPSHOTS: usize = 64;

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let s = 1.0 - x * x;
        15.0 / 16.0 * s * s
    } else {
        0.0
    }
}

fn bump_prime(x: f64) -> f64 {
    if x.abs() < 1.0 {
        -3.75 * x * (1.0 - x * x)
    } else {
        0.0
    }
}

/// Spatial width `delta` and temporal width `eta` of the doubled-variable
/// test function `φ₁^δ(x - y) φ₂^η(t - s)`, both built from the quartic bump
/// `(15/16)(1 - x²)²` and renormalized to unit discrete mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierPair {
    pub delta: f64,
    pub eta: f64,
}

/// Sampled profile and its derivative on a uniform offset lattice.
#[derive(Clone, Debug)]
pub(crate) struct Profile {
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl MollifierPair {
    pub fn new(delta: f64, eta: f64) -> Result<Self> {
        if !(delta > 0.0 && eta > 0.0 && delta.is_finite() && eta.is_finite()) {
            return Err(Error::Config(format!("mollifier widths must be positive, got delta={delta}, eta={eta}")));
        }
        Ok(Self { delta, eta })
    }

    /// `φ₁^δ` on the 1-D displacement lattice, in displacement order.
    pub fn spatial(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
        if grid.dim() != 1 {
            return Err(Error::Unsupported("spatial mollifier is one-dimensional".into()));
        }
        let h = grid.spacing();
        let limit = 0.5 * grid.length() - h;
        if self.delta >= limit {
            return Err(Error::WrapContamination(format!("delta {} reaches the periodic boundary ({limit})", self.delta)));
        }
        let offsets: Vec<f64> = (0..grid.cells_per_axis()).map(|i| grid.wrapped(i) as f64 * h).collect();
        let p = profile(&offsets, self.delta, h);
        Ok((p.values, p.derivs))
    }

    /// `φ₂^η` at multiples of `dt` in `[-(count-1)dt, (count-1)dt]`, index
    /// `k + count - 1` holding lag `k dt`.
    pub(crate) fn temporal(&self, dt: f64, count: usize) -> Profile {
        let lags: Vec<f64> = (0..2 * count - 1).map(|k| (k as f64 - (count as f64 - 1.0)) * dt).collect();
        // unit mass on the infinite lattice, so truncation at the ends of
        // [0, T] is left to the boundary terms
        let reach = (self.eta / dt).ceil() as i64 + 1;
        let mass = dt * neumaier_sum((-reach..=reach).map(|k| bump(k as f64 * dt / self.eta) / self.eta));
        sampled(&lags, self.eta, 1.0 / mass)
    }
}

fn sampled(points: &[f64], width: f64, c: f64) -> Profile {
    Profile {
        values: points.iter().map(|z| c * bump(z / width) / width).collect(),
        derivs: points.iter().map(|z| c * bump_prime(z / width) / (width * width)).collect(),
    }
}

/// `w^{-1} ρ(z/w)` and its derivative, scaled to unit mass on `points`.
fn profile(points: &[f64], width: f64, spacing: f64) -> Profile {
    let mass = spacing * neumaier_sum(points.iter().map(|z| bump(z / width) / width));
    sampled(points, width, 1.0 / mass)
}

/// The five contributions to `Δ_{δ,η}(T)`; `total()` is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KuznetsovTerms {
    pub final_time: f64,
    pub initial_time: f64,
    pub time_derivative: f64,
    pub transport: f64,
    pub source: f64,
}

impl KuznetsovTerms {
    pub fn total(&self) -> f64 {
        neumaier_sum([self.final_time, self.initial_time, self.time_derivative, self.transport, self.source])
    }
}

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    let mut w = vec![0.0; m];
    for i in 0..m.saturating_sub(1) {
        let d = 0.5 * (times[i + 1] - times[i]);
        w[i] += d;
        w[i + 1] += d;
    }
    w
}

/// Doubled-variable functional of `u` (entropy solution candidate) against
/// `v` (approximation), on `ψ ≡ 1`. One-dimensional only; time integrals by
/// the trapezoid rule over the snapshots, space integrals by the cell rule.
pub fn kuznetsov_delta(u_traj: &[State], v_traj: &[State], p: &Problem, m: MollifierPair) -> Result<KuznetsovTerms> {
    let g = p.grid;
    if g.dim() != 1 {
        return Err(Error::Unsupported("the Kuznetsov functional is one-dimensional".into()));
    }
    if g.cells_per_axis() > MAX_KUZNETSOV_CELLS {
        return Err(Error::Unsupported(format!("n = {} exceeds {MAX_KUZNETSOV_CELLS}", g.cells_per_axis())));
    }
    let count = u_traj.len();
    if count > MAX_KUZNETSOV_SNAPSHOTS {
        return Err(Error::Unsupported(format!("{count} snapshots exceed {MAX_KUZNETSOV_SNAPSHOTS}")));
    }
    if count < 2 || v_traj.len() != count {
        return Err(Error::InsufficientData("trajectories need matching snapshot lists of length >= 2".into()));
    }
    for (a, b) in u_traj.iter().zip(v_traj) {
        g.ensure_same(a.u.grid())?;
        g.ensure_same(b.u.grid())?;
        a.u.ensure_finite()?;
        b.u.ensure_finite()?;
        if a.time != b.time {
            return Err(Error::Shape(format!("snapshot times differ: {} vs {}", a.time, b.time)));
        }
    }
    let times: Vec<f64> = u_traj.iter().map(|s| s.time).collect();
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(Error::InsufficientData("snapshot times must be uniformly spaced".into()));
    }
    let w = trapezoid_weights(&times);
    let (phi1, dphi1) = m.spatial(&g)?;
    let phi2 = m.temporal(dt, count);
    let lag = |i: usize, j: usize| i + count - 1 - j;

    let n = g.len();
    let h = g.spacing();
    let f = &p.mobility;
    let us: Vec<&[f64]> = u_traj.iter().map(|s| s.u.values()).collect();
    let vs: Vec<&[f64]> = v_traj.iter().map(|s| s.u.values()).collect();
    let fu: Vec<Vec<f64>> = us.iter().map(|u| u.iter().map(|&x| f.value(x)).collect()).collect();
    let fv: Vec<Vec<f64>> = vs.iter().map(|v| v.iter().map(|&x| f.value(x)).collect()).collect();
    let forces: Vec<_> = vs.iter().map(|v| convolve_unchecked(&p.kernel, &g, v)).collect();
    let support: Vec<usize> = (0..n).filter(|&z| phi1[z] != 0.0 || dphi1[z] != 0.0).collect();

    let boundary = |j: usize| -> f64 {
        let terms = (0..count).map(|i| {
            let a2 = phi2.values[lag(i, j)];
            if a2 == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for x in 0..n {
                for &z in &support {
                    let y = (x + n - z) % n;
                    acc += phi1[z] * (us[i][x] - vs[j][y]).abs();
                }
            }
            w[i] * a2 * acc
        });
        h * h * neumaier_sum(terms)
    };

    let mut dt_terms = Vec::new();
    let mut tr_terms = Vec::new();
    let mut src_terms = Vec::new();
    for i in 0..count {
        for j in 0..count {
            let a2 = phi2.values[lag(i, j)];
            // ∂_s φ₂(t - s) = -φ₂'(t - s)
            let ds2 = -phi2.derivs[lag(i, j)];
            if a2 == 0.0 && ds2 == 0.0 {
                continue;
            }
            let kv = forces[j].force.component(0);
            let div = forces[j].div_force.values();
            let (mut t3, mut t4, mut t5) = (0.0, 0.0, 0.0);
            for x in 0..n {
                let (ux, fux) = (us[i][x], fu[i][x]);
                for &z in &support {
                    let y = (x + n - z) % n;
                    let vy = vs[j][y];
                    let s = sgn(vy - ux);
                    t3 += phi1[z] * (ux - vy).abs();
                    // ∇_y φ₁(x - y) = -φ₁'(x - y)
                    t4 += -dphi1[z] * kv[y] * s * (fv[j][y] - fux);
                    t5 += phi1[z] * fux * s * div[y];
                }
            }
            let wij = w[i] * w[j];
            dt_terms.push(wij * ds2 * t3);
            tr_terms.push(wij * a2 * t4);
            src_terms.push(-wij * a2 * t5);
        }
    }
    Ok(KuznetsovTerms {
        final_time: -boundary(count - 1),
        initial_time: boundary(0),
        time_derivative: h * h * neumaier_sum(dt_terms),
        transport: h * h * neumaier_sum(tr_terms),
        source: h * h * neumaier_sum(src_terms),
    })
}
