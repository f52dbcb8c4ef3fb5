use crate::error::{Error, Result};
use crate::field::{norm_linf, total_variation};
use crate::physics::MobilityBounds;
use crate::solver::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Linfty,
    Tv,
}

/// Which kernel terms drive the TV growth rate `A′(t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TvRate {
    /// `sup|f|·|div K| + sup|f′|·|∇K|·M`.
    #[default]
    Full,
    /// `sup|f|·|div K|` only.
    DivOnly,
}

/// Time-indexed bound with the scalars it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: BoundKind,
    pub inputs: Vec<(&'static str, f64)>,
    /// The ODE overflowed: `times` stops short of the request.
    pub truncated: bool,
}

impl BoundCurve {
    /// Linear interpolation; `None` outside the covered range.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let k = self.times.partition_point(|s| *s <= t);
        if k == 0 {
            return Some(self.values[0]);
        }
        if k >= self.times.len() {
            return self.values.last().copied();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        Some(if t1 > t0 { y0 + (y1 - y0) * (t - t0) / (t1 - t0) } else { y1 })
    }

    pub fn input(&self, name: &str) -> Option<f64> {
        self.inputs.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinftyBound {
    pub curve: BoundCurve,
    /// First time with `y = 2 y(0)`; infinite if never reached.
    pub doubling_time: f64,
}

const ODE_TOL: f64 = 1e-13;
const ODE_OVERFLOW: f64 = 1e150;

fn rk4(rhs: &impl Fn(f64) -> f64, y: f64, h: f64) -> f64 {
    let k1 = rhs(y);
    let k2 = rhs(y + 0.5 * h * k1);
    let k3 = rhs(y + 0.5 * h * k2);
    let k4 = rhs(y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Step-doubling RK4 from `t0` to `t1`; returns the accepted nodes.
fn integrate(rhs: &impl Fn(f64) -> f64, t0: f64, y0: f64, t1: f64, h: &mut f64) -> Result<Vec<(f64, f64)>, Vec<(f64, f64)>> {
    let mut nodes = vec![(t0, y0)];
    let (mut t, mut y) = (t0, y0);
    while t < t1 {
        let step = h.min(t1 - t);
        let full = rk4(rhs, y, step);
        let half = rk4(rhs, rk4(rhs, y, 0.5 * step), 0.5 * step);
        let err = (half - full).abs() / 15.0;
        let scale = ODE_TOL * half.abs().max(1.0);
        if !half.is_finite() || half > ODE_OVERFLOW {
            *h = 0.25 * step;
            if *h < 1e-14 * t.max(1e-300) || *h < f64::MIN_POSITIVE {
                return Err(nodes);
            }
            continue;
        }
        if err <= scale {
            t = if step == t1 - t { t1 } else { t + step };
            y = half + (half - full) / 15.0;
            nodes.push((t, y));
        }
        let factor = if err > 0.0 { 0.9 * (scale / err).powf(0.2) } else { 4.0 };
        *h = step * factor.clamp(0.1, 4.0);
        if *h < 1e-14 * t.max(1e-12) {
            return Err(nodes);
        }
    }
    Ok(nodes)
}

/// Solution of `y′ = c y (1 + y^α)`, `y(0) = y0`, at `times`, with the
/// doubling time located by bisection inside the crossing step.
pub fn linfty_bound_curve(u0_linf: f64, alpha: f64, c_times_divtv: f64, times: &[f64]) -> Result<LinftyBound> {
    for (name, v) in [("u0_linf", u0_linf), ("alpha", alpha), ("c_times_divtv", c_times_divtv)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::Config("bound-curve times must be increasing and nonnegative".into()));
    }
    let rhs = |y: f64| c_times_divtv * y * (1.0 + y.abs().powf(alpha));
    let inputs = vec![("u0_linf", u0_linf), ("alpha", alpha), ("c_times_divtv", c_times_divtv)];
    if u0_linf == 0.0 || c_times_divtv == 0.0 {
        return Ok(LinftyBound {
            curve: BoundCurve {
                times: times.to_vec(),
                values: vec![u0_linf; times.len()],
                kind: BoundKind::Linfty,
                inputs,
                truncated: false,
            },
            doubling_time: f64::INFINITY,
        });
    }
    let target = 2.0 * u0_linf;
    let mut h = 1e-3 / (c_times_divtv * (1.0 + u0_linf.powf(alpha)));
    let (mut t, mut y) = (0.0, u0_linf);
    let mut doubling_time = f64::INFINITY;
    let mut out_t = Vec::with_capacity(times.len());
    let mut out_y = Vec::with_capacity(times.len());
    let mut truncated = false;

    let check_crossing = |nodes: &[(f64, f64)], dt: &mut f64| {
        if dt.is_finite() {
            return;
        }
        for w in nodes.windows(2) {
            let ((ta, ya), (tb, yb)) = (w[0], w[1]);
            if ya < target && yb >= target {
                let (mut lo, mut hi) = (ta, tb);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if rk4(&rhs, ya, mid - ta) >= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                *dt = 0.5 * (lo + hi);
                return;
            }
        }
    };

    for &ti in times {
        if ti > t {
            match integrate(&rhs, t, y, ti, &mut h) {
                Ok(nodes) => {
                    check_crossing(&nodes, &mut doubling_time);
                    (t, y) = *nodes.last().expect("non-empty");
                }
                Err(nodes) => {
                    check_crossing(&nodes, &mut doubling_time);
                    truncated = true;
                    break;
                }
            }
        }
        out_t.push(ti);
        out_y.push(y);
    }
    if !truncated && !doubling_time.is_finite() {
        // continue past the requested window to report the doubling time
        let mut horizon = times.last().copied().unwrap_or(0.0).max(1e-3 / c_times_divtv);
        let mut guard = 0;
        while !doubling_time.is_finite() && guard < 200 {
            match integrate(&rhs, t, y, horizon, &mut h) {
                Ok(nodes) => {
                    check_crossing(&nodes, &mut doubling_time);
                    (t, y) = *nodes.last().expect("non-empty");
                }
                Err(nodes) => {
                    check_crossing(&nodes, &mut doubling_time);
                    break;
                }
            }
            horizon *= 2.0;
            guard += 1;
        }
    }
    Ok(LinftyBound {
        curve: BoundCurve { times: out_t, values: out_y, kind: BoundKind::Linfty, inputs, truncated },
        doubling_time,
    })
}

/// Sup of `|f|`, `|f′|` on `[0, M]` when the data are nonnegative and
/// `f(0) = 0` (the sign is then preserved), on `[-M, M]` otherwise.
pub fn mobility_bounds_for(p: &Problem, m: f64) -> MobilityBounds {
    if p.u0.min() >= 0.0 && p.mobility.vanishes_at_zero() {
        p.mobility.bounds_on(0.0, m)
    } else {
        p.mobility.bounds(m)
    }
}

/// L∞ bound curve for a problem: `c = ode_constant · C_f · |div K|`.
pub fn linfty_bound_for(p: &Problem, ode_constant: f64, times: &[f64]) -> Result<LinftyBound> {
    let c = ode_constant * p.mobility.growth_constant() * p.kernel.stats().div_tv;
    linfty_bound_curve(norm_linf(&p.u0)?, p.mobility.growth_exponent(), c, times)
}

/// `e^{A(t)} TV(u0)` with `A′ = sup|f|(M)·|div K| + sup|f′|(M)·|∇K|·M` and
/// `M` the L∞ bound (piecewise linear between its nodes).
pub fn tv_bound_curve(p: &Problem, linf_curve: &BoundCurve, times: &[f64], rate: TvRate) -> Result<BoundCurve> {
    if linf_curve.kind != BoundKind::Linfty {
        return Err(Error::Config("tv_bound_curve needs an L-infinity curve".into()));
    }
    let end = linf_curve.times.last().copied().unwrap_or(f64::NEG_INFINITY);
    if let Some(t) = times.iter().find(|t| **t > end || **t < 0.0) {
        return Err(Error::InsufficientData(format!("L-infinity curve does not cover t = {t}")));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("bound-curve times must be increasing".into()));
    }
    let stats = p.kernel.stats();
    let tv_k = match rate {
        TvRate::Full => stats.tv,
        TvRate::DivOnly => 0.0,
    };
    let integrand = |m: f64| {
        let b = mobility_bounds_for(p, m);
        b.sup_f * stats.div_tv + b.sup_fprime * tv_k * m
    };
    // Simpson on each linear piece of M, refined 16 times
    let piece = |a: f64, b: f64| -> f64 {
        if b <= a {
            return 0.0;
        }
        let m = |s: f64| linf_curve.value_at(s).expect("covered");
        let k = 16;
        let hh = (b - a) / k as f64;
        let mut acc = integrand(m(a)) + integrand(m(b));
        for i in 1..k {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(m(a + i as f64 * hh));
        }
        acc * hh / 3.0
    };
    let mut knots: Vec<f64> = linf_curve.times.clone();
    knots.extend_from_slice(times);
    knots.push(0.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let tv0 = total_variation(&p.u0)?;
    let mut values = Vec::with_capacity(times.len());
    let mut a_acc = 0.0;
    let mut last = 0.0;
    let mut ki = 0;
    for &t in times {
        while ki < knots.len() && knots[ki] <= t {
            a_acc += piece(last, knots[ki]);
            last = knots[ki];
            ki += 1;
        }
        values.push(tv0 * a_acc.exp());
    }
    Ok(BoundCurve {
        times: times.to_vec(),
        values,
        kind: BoundKind::Tv,
        inputs: vec![
            ("div_tv", stats.div_tv),
            ("tv_kernel", tv_k),
            ("tv_u0", tv0),
        ],
        truncated: false,
    })
}
