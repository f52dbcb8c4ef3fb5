//! Executable forms of the entropy inequality, the two divergence lemmas,
//! the Kuznetsov functional and the L¹ time modulus.

mod kuznetsov;
mod lemmas;

use crate::convolve::convolve_unchecked;
use crate::error::{Error, Result};
use crate::field::{distance_l1, Field, Grid, VectorField};
use crate::physics::Mobility;
use crate::solver::{central_flux_divergence, Problem, State};

pub use kuznetsov::{kuznetsov_delta, KuznetsovTerms, MollifierPair, MAX_KUZNETSOV_CELLS, MAX_KUZNETSOV_SNAPSHOTS};
pub use lemmas::{check_lemma_a, check_lemma_b, first_moment, random_lemma_instance, LemmaCheck, LemmaInstance};

/// Kruzhkov sign with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Entropy pair `η(u) = |u - k|`, `q(u) = sgn(u - k)(f(u) - f(k))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KruzhkovLevel {
    pub k: f64,
}

impl KruzhkovLevel {
    pub fn new(k: f64) -> Self {
        Self { k }
    }

    pub fn eta(&self, u: f64) -> f64 {
        (u - self.k).abs()
    }

    pub fn q(&self, f: &Mobility, u: f64) -> f64 {
        sgn(u - self.k) * (f.value(u) - f.value(self.k))
    }
}

fn smooth3(grid: &Grid, r: Vec<f64>) -> Vec<f64> {
    let mut cur = r;
    for axis in 0..grid.dim() {
        cur = (0..grid.len())
            .map(|i| 0.25 * cur[grid.neighbor(i, axis, -1)] + 0.5 * cur[i] + 0.25 * cur[grid.neighbor(i, axis, 1)])
            .collect();
    }
    cur
}

/// Smoothed pointwise residual
/// `D_t η + div_h(q V) + sgn(u - k) f(k) div V` at level `k`.
pub(crate) fn kruzhkov_residual(
    grid: &Grid,
    f: &Mobility,
    u: &[f64],
    deta_dt: &[f64],
    k: f64,
    force: &VectorField,
    div_force: &[f64],
) -> Vec<f64> {
    let level = KruzhkovLevel::new(k);
    let q: Vec<f64> = u.iter().map(|&x| level.q(f, x)).collect();
    let flux = central_flux_divergence(grid, &q, force);
    let fk = f.value(k);
    let r = (0..grid.len())
        .map(|i| deta_dt[i] + flux[i] + sgn(u[i] - k) * fk * div_force[i])
        .collect();
    smooth3(grid, r)
}

#[derive(Clone, Debug)]
pub struct EntropyResidual {
    pub max_positive_residual: f64,
    pub residual_field_at_worst: Field,
    pub worst_level: f64,
    pub worst_time: f64,
}

fn uniform_spacing(traj: &[State]) -> Result<f64> {
    let dt = traj[1].time - traj[0].time;
    if !(dt > 0.0) {
        return Err(Error::InsufficientData("snapshot times must increase".into()));
    }
    for w in traj.windows(2) {
        if ((w[1].time - w[0].time) - dt).abs() > 1e-9 * dt {
            return Err(Error::InsufficientData("snapshot times must be uniformly spaced".into()));
        }
    }
    Ok(dt)
}

/// Largest positive smoothed entropy residual over all interior snapshots
/// and levels, with centered time differences.
pub fn entropy_residual(traj: &[State], p: &Problem, levels: &[KruzhkovLevel]) -> Result<EntropyResidual> {
    if traj.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 snapshots, got {}", traj.len())));
    }
    for s in traj {
        p.grid.ensure_same(s.u.grid())?;
        s.u.ensure_finite()?;
    }
    let dt = uniform_spacing(traj)?;
    let g = p.grid;
    let mut best = EntropyResidual {
        max_positive_residual: 0.0,
        residual_field_at_worst: Field::zeros(g),
        worst_level: levels.first().map_or(0.0, |l| l.k),
        worst_time: traj[1].time,
    };
    for n in 1..traj.len() - 1 {
        let (prev, cur, next) = (traj[n - 1].u.values(), traj[n].u.values(), traj[n + 1].u.values());
        let force = convolve_unchecked(&p.kernel, &g, cur);
        for level in levels {
            let deta: Vec<f64> = prev.iter().zip(next).map(|(a, b)| (level.eta(*b) - level.eta(*a)) / (2.0 * dt)).collect();
            let r = kruzhkov_residual(&g, &p.mobility, cur, &deta, level.k, &force.force, force.div_force.values());
            let worst = r.iter().copied().fold(0.0_f64, f64::max);
            if worst > best.max_positive_residual {
                best = EntropyResidual {
                    max_positive_residual: worst,
                    residual_field_at_worst: Field::new_unchecked(g, r),
                    worst_level: level.k,
                    worst_time: traj[n].time,
                };
            }
        }
    }
    Ok(best)
}

/// `max_t ‖u(t + h_lag) - u(t)‖_L¹` over the snapshots.
pub fn time_modulus(traj: &[State], h_lag: f64) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::InsufficientData("time modulus needs at least 2 snapshots".into()));
    }
    let dt = uniform_spacing(traj)?;
    let ratio = h_lag / dt;
    let lag = ratio.round();
    if !(h_lag > 0.0) || (ratio - lag).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::Config(format!("lag {h_lag} is not a positive multiple of the snapshot spacing {dt}")));
    }
    let lag = lag as usize;
    if lag >= traj.len() {
        return Err(Error::InsufficientData(format!("lag {h_lag} exceeds the trajectory span")));
    }
    let mut best = 0.0_f64;
    for i in 0..traj.len() - lag {
        best = best.max(distance_l1(&traj[i + lag].u, &traj[i].u)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{make_kernel, KernelSpec};
    use std::sync::Arc;

    fn constant_traj(g: Grid, c: f64, count: usize) -> Vec<State> {
        (0..count)
            .map(|i| State { time: i as f64 * 0.1, u: Field::constant(g, c), step_count: i, blown_up: false })
            .collect()
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(2.0), 1.0);
        assert_eq!(KruzhkovLevel::new(0.3).q(&Mobility::logistic(), 0.3), 0.0);
    }

    #[test]
    fn constant_state_has_no_residual() {
        let g = Grid::line(64, 1.0).unwrap();
        let k = make_kernel(&KernelSpec::GaussianGradient { sigma: 0.1, strength: 1.0 }, &g).unwrap();
        let p = Problem::new(Field::constant(g, 0.4), Arc::new(k), Mobility::logistic(), 0.0, 1.0).unwrap();
        let levels: Vec<KruzhkovLevel> = [-1.0, 0.0, 0.4, 0.7, 2.0].map(KruzhkovLevel::new).to_vec();
        let r = entropy_residual(&constant_traj(g, 0.4, 4), &p, &levels).unwrap();
        assert!(r.max_positive_residual <= 1e-12);
    }

    #[test]
    fn residual_needs_three_snapshots() {
        let g = Grid::line(16, 1.0).unwrap();
        let p = Problem::new(Field::constant(g, 0.0), Arc::new(crate::physics::Kernel::zero(g)), Mobility::zero(), 0.0, 1.0).unwrap();
        let e = entropy_residual(&constant_traj(g, 0.0, 2), &p, &[KruzhkovLevel::new(0.0)]);
        assert!(matches!(e, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn stationary_modulus_is_zero() {
        let g = Grid::line(16, 1.0).unwrap();
        let t = constant_traj(g, 0.3, 5);
        assert_eq!(time_modulus(&t, 0.2).unwrap(), 0.0);
        assert!(time_modulus(&t, 0.5).is_err());
        assert!(time_modulus(&t, 0.15).is_err());
    }
}
