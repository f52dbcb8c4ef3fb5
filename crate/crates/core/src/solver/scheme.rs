use crate::convolve::{convolve_unchecked, ForceEval};
use crate::error::{Error, Result};
use crate::field::{Field, Grid, VectorField};

use super::diagnostics::{DiagnosticsRow, DiagnosticsSeries, ResidualProbe};
use super::{detect_blowup, BlowupReport, Problem, State};

/// Trajectory at the requested output times plus per-step diagnostics. A run
/// that blows up stops early and ends its trajectory with the flagged state.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Vec<State>,
    pub diagnostics: DiagnosticsSeries,
    pub blowup: Option<BlowupReport>,
}

/// `Σ_a (Q_{i+½} - Q_{i-½}) / h` with `Q_{i+½} = ½(q_i + q_{i+1}) V̄_{i+½}`:
/// the non-dissipative part of the solver's flux differencing.
pub fn central_flux_divergence(grid: &Grid, q: &[f64], force: &VectorField) -> Vec<f64> {
    let inv_h = 1.0 / grid.spacing();
    let mut out = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        let v = force.component(axis);
        for i in 0..grid.len() {
            let j = grid.neighbor(i, axis, 1);
            let flux = 0.5 * (q[i] + q[j]) * 0.5 * (v[i] + v[j]) * inv_h;
            out[i] += flux;
            out[j] -= flux;
        }
    }
    out
}

fn check_domain(p: &Problem, values: &[f64]) -> Result<()> {
    if p.mobility.requires_nonnegative() {
        if let Some(x) = values.iter().find(|x| **x < 0.0) {
            return Err(Error::Domain(format!("power mobility evaluated at negative value {x:e}")));
        }
    }
    Ok(())
}

fn force_of(p: &Problem, values: &[f64]) -> ForceEval {
    convolve_unchecked(&p.kernel, &p.grid, values)
}

/// Semi-discrete right-hand side with the force frozen.
fn rhs(p: &Problem, u: &[f64], force: &VectorField) -> Vec<f64> {
    let g = &p.grid;
    let inv_h = 1.0 / g.spacing();
    let fu: Vec<f64> = u.iter().map(|&x| p.mobility.value(x)).collect();
    let dfu: Vec<f64> = u.iter().map(|&x| p.mobility.derivative(x).abs()).collect();
    let mut out = vec![0.0; g.len()];
    for axis in 0..g.dim() {
        let v = force.component(axis);
        for i in 0..g.len() {
            let j = g.neighbor(i, axis, 1);
            let vbar = 0.5 * (v[i] + v[j]);
            let lam = dfu[i].max(dfu[j]) * vbar.abs();
            let flux = (0.5 * (fu[i] + fu[j]) * vbar - 0.5 * lam * (u[j] - u[i])) * inv_h;
            out[i] -= flux;
            out[j] += flux;
        }
    }
    if p.epsilon > 0.0 {
        let c = p.epsilon * inv_h * inv_h;
        for axis in 0..g.dim() {
            for i in 0..g.len() {
                let j = g.neighbor(i, axis, 1);
                let d = c * (u[j] - u[i]);
                out[i] += d;
                out[j] -= d;
            }
        }
    }
    out
}

/// Advective speed bound at the current state. Per cell it combines the
/// averaged interface dissipation speeds with the compression term
/// `½|f′(u_i)| |V̄_{i+½} - V̄_{i-½}|`, which together make the forward Euler
/// update monotone; `max|f′(u)| · max|V|` is used as a floor.
fn advective_speed(p: &Problem, u: &[f64], force: &VectorField) -> f64 {
    let g = &p.grid;
    let dfu: Vec<f64> = u.iter().map(|&x| p.mobility.derivative(x).abs()).collect();
    let dmax = dfu.iter().fold(0.0_f64, |m, x| m.max(*x));
    let mut speed = 0.0_f64;
    for i in 0..g.len() {
        let mut mono = 0.0;
        let mut vsum = 0.0;
        for axis in 0..g.dim() {
            let v = force.component(axis);
            let (l, r) = (g.neighbor(i, axis, -1), g.neighbor(i, axis, 1));
            let (vl, vr) = (0.5 * (v[l] + v[i]), 0.5 * (v[i] + v[r]));
            let lam_l = dfu[l].max(dfu[i]) * vl.abs();
            let lam_r = dfu[i].max(dfu[r]) * vr.abs();
            mono += 0.5 * (lam_l + lam_r) + 0.5 * dfu[i] * (vr - vl).abs();
            vsum += v[i].abs();
        }
        speed = speed.max(mono.max(dmax * vsum));
    }
    speed
}

fn stable_dt(p: &Problem, u: &[f64], force: &VectorField) -> f64 {
    let h = p.grid.spacing();
    let speed = advective_speed(p, u, force);
    let adv = if speed > 0.0 { p.cfl_advection * h / speed } else { f64::INFINITY };
    let diff = if p.epsilon > 0.0 {
        p.cfl_diffusion * h * h / (2.0 * p.grid.dim() as f64 * p.epsilon)
    } else {
        f64::INFINITY
    };
    adv.min(diff)
}

/// Largest stable step at `s`, clipped to the remaining horizon.
pub fn cfl_dt(s: &State, p: &Problem) -> Result<f64> {
    s.u.ensure_finite()?;
    p.grid.ensure_same(s.u.grid())?;
    let force = force_of(p, s.u.values());
    let remaining = (p.horizon - s.time).max(0.0);
    Ok(stable_dt(p, s.u.values(), &force.force).min(remaining))
}

fn is_blown(p: &Problem, values: &[f64]) -> bool {
    values.iter().any(|x| !x.is_finite() || x.abs() > p.blowup_threshold)
}

fn advance(p: &Problem, s: &State, dt: f64, force0: &VectorField) -> Result<State> {
    let u = s.u.values();
    check_domain(p, u)?;
    let l0 = rhs(p, u, force0);
    let u1: Vec<f64> = u.iter().zip(&l0).map(|(a, b)| a + dt * b).collect();
    let mut next = if is_blown(p, &u1) {
        u1
    } else {
        check_domain(p, &u1)?;
        let force1 = force_of(p, &u1);
        let l1 = rhs(p, &u1, &force1.force);
        u.iter().zip(u1.iter().zip(&l1)).map(|(a, (b, c))| 0.5 * a + 0.5 * (b + dt * c)).collect()
    };
    let blown_up = is_blown(p, &next);
    if !blown_up && p.mobility.requires_nonnegative() {
        // roundoff below zero on vacuum cells would leave the mobility's domain
        for x in next.iter_mut().filter(|x| **x < 0.0 && **x > -1e-14) {
            *x = 0.0;
        }
    }
    Ok(State {
        time: s.time + dt,
        u: Field::new_unchecked(p.grid, next),
        step_count: s.step_count + 1,
        blown_up,
    })
}

/// One SSP-RK2 step of size `dt`.
pub fn step(s: &State, p: &Problem, dt: f64) -> Result<State> {
    p.grid.ensure_same(s.u.grid())?;
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::Config(format!("time step must be finite and >= 0, got {dt}")));
    }
    s.u.ensure_finite()?;
    let force = force_of(p, s.u.values());
    advance(p, s, dt, &force.force)
}

fn validate_times(p: &Problem, times: &[f64]) -> Result<()> {
    for w in times.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Config(format!("output times must be strictly increasing ({} then {})", w[0], w[1])));
        }
    }
    for &t in times {
        if !(t >= 0.0 && t <= p.horizon) {
            return Err(Error::Config(format!("output time {t} outside [0, {}]", p.horizon)));
        }
    }
    Ok(())
}

/// March to the last output time. An empty `output_times` means `[0, horizon]`.
pub fn run(p: &Problem, output_times: &[f64]) -> Result<RunOutput> {
    p.validate()?;
    let times: Vec<f64> = if output_times.is_empty() {
        if p.horizon > 0.0 {
            vec![0.0, p.horizon]
        } else {
            vec![0.0]
        }
    } else {
        output_times.to_vec()
    };
    validate_times(p, &times)?;

    let probe = ResidualProbe::new(p);
    let mut diagnostics = DiagnosticsSeries::default();
    let mut trajectory = Vec::with_capacity(times.len());
    let mut state = p.initial_state();
    let mut next_out = 0;
    let mut prev: Option<(State, ForceEval, f64)> = None;
    let end = *times.last().expect("non-empty output times");
    let snap_tol = 1e-12 * end.max(1.0);

    loop {
        let force = if state.blown_up { None } else { Some(force_of(p, state.u.values())) };
        let residual = match (&prev, &force) {
            (Some((ps, pf, dt)), Some(_)) => probe.max_residual(&ps.u, &state.u, *dt, pf),
            _ => 0.0,
        };
        diagnostics.push(DiagnosticsRow::measure(&state, prev.as_ref().map_or(0.0, |x| x.2), residual, force.as_ref()));
        while next_out < times.len() && (times[next_out] - state.time).abs() <= snap_tol {
            trajectory.push(State { time: times[next_out], ..state.clone() });
            next_out += 1;
        }
        let Some(force) = force else {
            if trajectory.last().is_none_or(|s: &State| !s.blown_up) {
                trajectory.push(state);
            }
            break;
        };
        if next_out >= times.len() {
            break;
        }
        let target = times[next_out];
        let mut dt = stable_dt(p, state.u.values(), &force.force);
        if !(dt > 0.0) {
            return Err(Error::Unsupported(format!("time step collapsed to {dt} at t = {}", state.time)));
        }
        let clipped = state.time + dt >= target - snap_tol;
        if clipped {
            dt = target - state.time;
        }
        let mut next = advance(p, &state, dt, &force.force)?;
        if clipped {
            next.time = target;
        }
        prev = Some((state, force, dt));
        state = next;
    }
    let blowup = detect_blowup(&diagnostics, p);
    Ok(RunOutput { trajectory, diagnostics, blowup })
}
