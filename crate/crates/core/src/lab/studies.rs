use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{distance_l1, norm_l1, norm_linf, Field};
use crate::solver::{run, BlowupReport, Problem, RunOutput, State};

use super::bounds::{linfty_bound_for, mobility_bounds_for, tv_bound_curve, TvRate};

/// Evenly spaced output times `0, T/k, …, T`.
pub fn uniform_times(horizon: f64, intervals: usize) -> Vec<f64> {
    let k = intervals.max(1);
    (0..=k).map(|i| if i == k { horizon } else { horizon * i as f64 / k as f64 }).collect()
}

#[derive(Clone, Debug, Default)]
pub enum RateReference {
    /// Same grid, `ε_ref = min(ε) / 16`.
    #[default]
    SelfFinest,
    /// Snapshots at the study's output times.
    External(Vec<State>),
}

#[derive(Clone, Debug)]
pub struct RateOptions {
    pub reference: RateReference,
    /// Output intervals on `[0, T]` over which the sup distance is taken.
    pub intervals: usize,
    pub execution: Execution,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { reference: RateReference::SelfFinest, intervals: 25, execution: Execution::default() }
    }
}

#[derive(Clone, Debug)]
pub struct RateStudy {
    pub base_problem: Problem,
    pub epsilons: Vec<f64>,
    /// `NaN` for an external reference.
    pub ref_epsilon: f64,
    pub distances: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_constant: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug)]
pub enum RateOutcome {
    Complete(RateStudy),
    /// A member blew up; `completed` holds `(ε, d)` for the clean members.
    BlownUp { epsilon: f64, report: BlowupReport, completed: Vec<(f64, f64)> },
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, R²)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

fn validate_epsilons(eps: &[f64]) -> Result<()> {
    if eps.len() < 4 {
        return Err(Error::Config(format!("rate study needs at least 4 epsilons, got {}", eps.len())));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Config(format!("epsilons must be positive, got {e}")));
    }
    if eps.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Config("epsilons must be strictly decreasing".into()));
    }
    Ok(())
}

fn sup_distance(a: &[State], b: &[State]) -> Result<f64> {
    let mut d = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        d = d.max(distance_l1(&x.u, &y.u)?);
    }
    Ok(d)
}

/// Viscosity-rate study. Runs are independent and fan out over
/// `opts.execution`; results are ordered by ε.
pub fn run_rate_study(p: &Problem, epsilons: &[f64], horizon: f64, opts: &RateOptions) -> Result<RateOutcome> {
    validate_epsilons(epsilons)?;
    let base = Problem { horizon, ..p.clone() };
    base.validate()?;
    let times = uniform_times(horizon, opts.intervals);
    let ref_epsilon = match opts.reference {
        RateReference::SelfFinest => epsilons[epsilons.len() - 1] / 16.0,
        RateReference::External(_) => f64::NAN,
    };
    let mut members: Vec<f64> = epsilons.to_vec();
    if matches!(opts.reference, RateReference::SelfFinest) {
        members.push(ref_epsilon);
    }
    let runs: Vec<Result<RunOutput>> = opts.execution.map(&members, |&e| run(&base.with_epsilon(e), &times));
    let runs: Vec<RunOutput> = runs.into_iter().collect::<Result<_>>()?;

    let reference: Vec<State> = match &opts.reference {
        RateReference::SelfFinest => {
            let r = runs.last().expect("reference run");
            if let Some(report) = r.blowup {
                return Ok(RateOutcome::BlownUp { epsilon: ref_epsilon, report, completed: Vec::new() });
            }
            r.trajectory.clone()
        }
        RateReference::External(t) => {
            if t.len() != times.len() || t.iter().zip(&times).any(|(s, x)| (s.time - x).abs() > 1e-12 * horizon.max(1.0)) {
                return Err(Error::Shape("external reference must have snapshots at the study's output times".into()));
            }
            t.clone()
        }
    };
    let mut distances = Vec::with_capacity(epsilons.len());
    let mut completed = Vec::new();
    for (e, r) in epsilons.iter().zip(&runs) {
        if let Some(report) = r.blowup {
            return Ok(RateOutcome::BlownUp { epsilon: *e, report, completed });
        }
        let d = sup_distance(&r.trajectory, &reference)?;
        completed.push((*e, d));
        distances.push(d);
    }
    if let Some(d) = distances.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::InsufficientData(format!("distance {d} is not positive; the rate is undefined")));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let (slope, intercept, r2) = fit_line(&x, &y);
    Ok(RateOutcome::Complete(RateStudy {
        base_problem: base,
        epsilons: epsilons.to_vec(),
        ref_epsilon,
        distances,
        fitted_slope: slope,
        fitted_constant: intercept.exp(),
        r_squared: r2,
    }))
}

/// [`run_rate_study`] with default options, turning a blown-up member into
/// an error.
pub fn rate_study(p: &Problem, epsilons: &[f64], horizon: f64) -> Result<RateStudy> {
    match run_rate_study(p, epsilons, horizon, &RateOptions::default())? {
        RateOutcome::Complete(s) => Ok(s),
        RateOutcome::BlownUp { report, .. } => Err(Error::Blowup { time: report.time, linf: report.linf_at_trigger }),
    }
}

#[derive(Clone, Debug)]
pub struct StabilityRow {
    pub label: String,
    pub initial_distance: f64,
    pub sup_distance: f64,
    /// `sup_distance / initial_distance`; `None` when skipped.
    pub amplification: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct StabilityTable {
    pub horizon: f64,
    pub epsilon: f64,
    pub prediction: f64,
    pub rows: Vec<StabilityRow>,
}

impl StabilityTable {
    pub fn all_within_prediction(&self) -> bool {
        self.rows.iter().filter_map(|r| r.amplification).all(|a| a <= self.prediction)
    }
}

#[derive(Clone, Debug)]
pub struct StabilityOptions {
    pub intervals: usize,
    pub ode_constant: f64,
    pub tv_rate: TvRate,
    pub execution: Execution,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { intervals: 20, ode_constant: 1.0, tv_rate: TvRate::Full, execution: Execution::default() }
    }
}

/// `exp(T [TV_bound sup|f′| ‖K‖∞ + sup|f| |div K|])` with the TV and L∞
/// bounds propagated to `T`; infinite when the L∞ curve overflows first.
pub fn gronwall_prediction(p: &Problem, horizon: f64, ode_constant: f64, rate: TvRate) -> Result<f64> {
    let times = uniform_times(horizon, 64);
    let linf = linfty_bound_for(p, ode_constant, &times)?;
    if linf.curve.truncated {
        return Ok(f64::INFINITY);
    }
    let tv = tv_bound_curve(p, &linf.curve, &times, rate)?;
    let m = *linf.curve.values.last().expect("non-empty");
    let tv_bound = *tv.values.last().expect("non-empty");
    let b = mobility_bounds_for(p, m);
    let s = p.kernel.stats();
    Ok((horizon * (tv_bound * b.sup_fprime * s.linf_norm + b.sup_f * s.div_tv)).exp())
}

/// L¹ amplification of each labelled perturbation of `u0` at the problem's ε.
pub fn stability_study(p: &Problem, perturbations: &[(String, Field)], horizon: f64, opts: &StabilityOptions) -> Result<StabilityTable> {
    let base = Problem { horizon, ..p.clone() };
    base.validate()?;
    let mass = norm_l1(&base.u0)?;
    for (label, d) in perturbations {
        base.grid.ensure_same(d.grid())?;
        let size = norm_l1(d)?;
        if size > 0.1 * mass * (1.0 + 1e-12) {
            return Err(Error::Config(format!("perturbation '{label}' has L1 size {size} > 0.1 * ||u0||_L1")));
        }
    }
    let times = uniform_times(horizon, opts.intervals);
    let reference = run(&base, &times)?;
    if let Some(r) = reference.blowup {
        return Err(Error::Blowup { time: r.time, linf: r.linf_at_trigger });
    }
    let rows: Vec<Result<StabilityRow>> = opts.execution.map(perturbations, |(label, d)| {
        let initial = norm_l1(d)?;
        if initial == 0.0 {
            return Ok(StabilityRow {
                label: label.clone(),
                initial_distance: 0.0,
                sup_distance: 0.0,
                amplification: None,
                note: Some("zero perturbation: ratio undefined".into()),
            });
        }
        let perturbed = base.with_u0(base.u0.lincomb(1.0, d, 1.0)?)?;
        let out = run(&perturbed, &times)?;
        if let Some(r) = out.blowup {
            return Err(Error::Blowup { time: r.time, linf: r.linf_at_trigger });
        }
        let sup = sup_distance(&out.trajectory, &reference.trajectory)?;
        Ok(StabilityRow {
            label: label.clone(),
            initial_distance: initial,
            sup_distance: sup,
            amplification: Some(sup / initial),
            note: None,
        })
    });
    Ok(StabilityTable {
        horizon,
        epsilon: base.epsilon,
        prediction: gronwall_prediction(&base, horizon, opts.ode_constant, opts.tv_rate)?,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// `u0(· - s h) - u0`.
pub fn shift_perturbation(u0: &Field, cells: isize) -> Field {
    let shifted = u0.shifted(0, cells);
    shifted.lincomb(1.0, u0, -1.0).expect("same grid")
}

/// `θ (u0 - mean(u0))`.
pub fn amplitude_perturbation(u0: &Field, theta: f64) -> Field {
    let mean = u0.values().iter().sum::<f64>() / u0.values().len() as f64;
    u0.map(|x| theta * (x - mean))
}

/// `a exp(-|x - c|² / (2 w²))` along axis 0.
pub fn bump_perturbation(u0: &Field, center: f64, width: f64, amplitude: f64) -> Result<Field> {
    Field::from_cell_averages(*u0.grid(), |x| amplitude * (-0.5 * ((x[0] - center) / width).powi(2)).exp())
}

/// Largest `‖u(t)‖∞` over a trajectory.
pub fn trajectory_linf(traj: &[State]) -> Result<f64> {
    traj.iter().map(|s| norm_linf(&s.u)).try_fold(0.0_f64, |m, x| Ok(m.max(x?)))
}
