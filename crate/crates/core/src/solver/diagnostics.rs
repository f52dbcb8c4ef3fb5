use std::fmt::Write as _;

use crate::convolve::ForceEval;
use crate::field::{neumaier_sum, tv_of_values, Field};
use crate::verify::kruzhkov_residual;

use super::{Problem, State};

pub const DIAGNOSTICS_HEADER: &str = "t,dt,mass,l1,linf,tv,entropy_residual_max,force_linf,blown_up";

/// Per-step record. Quantities are computed without finiteness checks so
/// that a blown-up state still produces a row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub l1: f64,
    pub linf: f64,
    pub tv: f64,
    pub entropy_residual_max: f64,
    pub force_linf: f64,
    pub blown_up: bool,
}

impl DiagnosticsRow {
    pub(crate) fn measure(s: &State, dt: f64, residual: f64, force: Option<&ForceEval>) -> Self {
        let g = s.u.grid();
        let v = s.u.values();
        let vol = g.cell_volume();
        let linf = v.iter().fold(0.0_f64, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x.abs()) });
        Self {
            t: s.time,
            dt,
            mass: vol * neumaier_sum(v.iter().copied()),
            l1: vol * neumaier_sum(v.iter().map(|x| x.abs())),
            linf,
            tv: tv_of_values(g, v),
            entropy_residual_max: residual,
            force_linf: force.map_or(f64::NAN, |f| f.force.linf()),
            blown_up: s.blown_up,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsSeries {
    rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsSeries {
    pub fn from_rows(rows: Vec<DiagnosticsRow>) -> Self {
        Self { rows }
    }

    pub fn push(&mut self, row: DiagnosticsRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[DiagnosticsRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(DIAGNOSTICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.dt,
                r.mass,
                r.l1,
                r.linf,
                r.tv,
                r.entropy_residual_max,
                r.force_linf,
                u8::from(r.blown_up)
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupReport {
    pub time: f64,
    pub linf_at_trigger: f64,
}

/// Earliest row whose L∞ exceeds the threshold or is non-finite.
pub fn detect_blowup(series: &DiagnosticsSeries, p: &Problem) -> Option<BlowupReport> {
    series
        .rows
        .iter()
        .find(|r| r.blown_up || !r.linf.is_finite() || r.linf > p.blowup_threshold)
        .map(|r| BlowupReport { time: r.t, linf_at_trigger: r.linf })
}

/// Step-wise entropy residual at five Kruzhkov levels spread over the range
/// of `u0`, using a one-sided time difference.
pub(crate) struct ResidualProbe<'a> {
    problem: &'a Problem,
    levels: [f64; 5],
}

impl<'a> ResidualProbe<'a> {
    pub(crate) fn new(problem: &'a Problem) -> Self {
        let (lo, hi) = (problem.u0.min(), problem.u0.max());
        let levels = [0.0, 0.25, 0.5, 0.75, 1.0].map(|s| lo + s * (hi - lo));
        Self { problem, levels }
    }

    pub(crate) fn max_residual(&self, before: &Field, after: &Field, dt: f64, force: &ForceEval) -> f64 {
        if !(dt > 0.0) || !after.is_finite() {
            return f64::NAN;
        }
        let g = before.grid();
        let (u0, u1) = (before.values(), after.values());
        self.levels
            .iter()
            .map(|&k| {
                let deta: Vec<f64> = u0.iter().zip(u1).map(|(a, b)| ((b - k).abs() - (a - k).abs()) / dt).collect();
                kruzhkov_residual(g, &self.problem.mobility, u0, &deta, k, &force.force, force.div_force.values())
                    .into_iter()
                    .fold(0.0_f64, f64::max)
            })
            .fold(0.0_f64, f64::max)
    }
}
