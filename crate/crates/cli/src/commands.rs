use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nlclaw::exec::Execution;
use nlclaw::field::{encode_snapshot, norm_l1, norm_linf, total_variation, Field, Grid};
use nlclaw::lab::{
    amplitude_perturbation, bump_perturbation, linfty_bound_for, run_rate_study, shift_perturbation, stability_study,
    tv_bound_curve, RateOptions, RateOutcome, StabilityOptions,
};
use nlclaw::solver::{picard_iterate_with, picard_threshold, run, PicardOptions, Problem, State};
use nlclaw::verify::{check_lemma_a, check_lemma_b, kuznetsov_delta, random_lemma_instance, LemmaCheck, MollifierPair};

use crate::config::{Command, PerturbationSpec, ProblemConfig, RunConfig};

/// How a command finished, mapped onto the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Blowup,
    CheckFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Blowup => 2,
            Status::CheckFailed => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Blowup => "blowup",
            Status::CheckFailed => "check-failed",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Lib(nlclaw::Error),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<nlclaw::Error> for Failure {
    fn from(e: nlclaw::Error) -> Self {
        Failure::Lib(e)
    }
}

/// Files written by a command, relative to the output directory.
pub struct Outputs {
    dir: PathBuf,
    pub written: Vec<String>,
    pub notes: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), written: Vec::new(), notes: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Failure::Io(parent.to_path_buf(), e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Failure::Io(path.clone(), e))?;
        self.written.push(rel.to_string());
        Ok(())
    }
}

pub fn execute(cmd: Command, cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    match cmd {
        Command::Run => run_command(cfg, out),
        Command::RateStudy => rate_command(cfg, out),
        Command::StabilityStudy => stability_command(cfg, out),
        Command::VerifyLemmas => lemmas_command(cfg, out),
        Command::Kuznetsov => kuznetsov_command(cfg, out),
        Command::Bounds => bounds_command(cfg, out),
        Command::Picard => picard_command(cfg, out),
    }
}

fn problem_config(cfg: &RunConfig) -> &ProblemConfig {
    cfg.problem.as_ref().expect("commands other than verify-lemmas always parse a problem")
}

fn two_columns(xs: impl IntoIterator<Item = f64>, ys: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (x, y) in xs.into_iter().zip(ys) {
        let _ = writeln!(s, "{x} {y}");
    }
    s
}

fn cell_centers(g: &Grid) -> Vec<f64> {
    (0..g.len()).map(|i| g.position(i)[0]).collect()
}

fn run_command(cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    let p = problem_config(cfg).build()?;
    let times = cfg.output.resolve(p.horizon);
    let result = run(&p, &times)?;
    out.write("diagnostics.csv", result.diagnostics.to_csv())?;
    for (i, s) in result.trajectory.iter().enumerate() {
        out.write(&format!("snapshots/u_{i:04}.nlf"), encode_snapshot(&p.grid, s.u.values()))?;
    }
    let rows = result.diagnostics.rows();
    let t = || rows.iter().map(|r| r.t);
    out.write("plot/mass.dat", two_columns(t(), rows.iter().map(|r| r.mass)))?;
    out.write("plot/linf.dat", two_columns(t(), rows.iter().map(|r| r.linf)))?;
    out.write("plot/tv.dat", two_columns(t(), rows.iter().map(|r| r.tv)))?;
    if p.grid.dim() == 1 {
        let last = result.trajectory.last().expect("non-empty trajectory");
        out.write("plot/u_final.dat", two_columns(cell_centers(&p.grid), last.u.values().iter().copied()))?;
    }
    Ok(match result.blowup {
        Some(r) => {
            out.notes.push(format!("blew up at t = {} (linf = {})", r.time, r.linf_at_trigger));
            Status::Blowup
        }
        None => Status::Ok,
    })
}

const RATE_SLOPE_RANGE: (f64, f64) = (0.45, 1.1);

fn rate_command(cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    let p = problem_config(cfg).build()?;
    let opts = RateOptions { intervals: cfg.rate.intervals, ..RateOptions::default() };
    let ref_epsilon = cfg.rate.epsilons.last().copied().unwrap_or(f64::NAN) / 16.0;
    let mut csv = String::from("epsilon,distance,ref_epsilon\n");
    match run_rate_study(&p, &cfg.rate.epsilons, p.horizon, &opts)? {
        RateOutcome::Complete(s) => {
            for (e, d) in s.epsilons.iter().zip(&s.distances) {
                let _ = writeln!(csv, "{e},{d},{}", s.ref_epsilon);
            }
            out.write("rate_study.csv", csv)?;
            let fit = format!("slope {}\nconstant {}\nr_squared {}\n", s.fitted_slope, s.fitted_constant, s.r_squared);
            out.write("rate_fit.txt", fit)?;
            let (lo, hi) = RATE_SLOPE_RANGE;
            if (lo..=hi).contains(&s.fitted_slope) {
                Ok(Status::Ok)
            } else {
                out.notes.push(format!("fitted slope {} outside [{lo}, {hi}]", s.fitted_slope));
                Ok(Status::CheckFailed)
            }
        }
        RateOutcome::BlownUp { epsilon, report, completed } => {
            for (e, d) in completed {
                let _ = writeln!(csv, "{e},{d},{ref_epsilon}");
            }
            out.write("rate_study.csv", csv)?;
            out.notes.push(format!(
                "run at epsilon = {epsilon} blew up at t = {} (linf = {}); table is partial",
                report.time, report.linf_at_trigger
            ));
            Ok(Status::Blowup)
        }
    }
}

fn perturbation(u0: &Field, spec: &PerturbationSpec) -> nlclaw::Result<Field> {
    Ok(match *spec {
        PerturbationSpec::Shift { cells } => shift_perturbation(u0, cells as isize),
        PerturbationSpec::Amplitude { theta } => amplitude_perturbation(u0, theta),
        PerturbationSpec::Bump { center, width, amplitude } => bump_perturbation(u0, center, width, amplitude)?,
    })
}

fn stability_command(cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    let p = problem_config(cfg).build()?;
    let perturbations = cfg
        .stability
        .perturbations
        .iter()
        .map(|s| Ok((s.label(), perturbation(&p.u0, s)?)))
        .collect::<nlclaw::Result<Vec<_>>>()?;
    let opts = StabilityOptions {
        intervals: cfg.stability.intervals,
        ode_constant: cfg.ode_constant,
        tv_rate: cfg.stability.tv_rate,
        ..StabilityOptions::default()
    };
    let table = match stability_study(&p, &perturbations, p.horizon, &opts) {
        Err(nlclaw::Error::Blowup { time, linf }) => {
            out.notes.push(format!("blew up at t = {time} (linf = {linf})"));
            return Ok(Status::Blowup);
        }
        other => other?,
    };
    let mut csv = String::from("label,initial_distance,sup_distance,amplification,prediction,note\n");
    for r in &table.rows {
        let amp = r.amplification.map_or(String::new(), |a| a.to_string());
        let note = r.note.as_deref().unwrap_or("");
        let _ = writeln!(csv, "{},{},{},{amp},{},{note}", r.label, r.initial_distance, r.sup_distance, table.prediction);
    }
    out.write("stability.csv", csv)?;
    if table.all_within_prediction() {
        Ok(Status::Ok)
    } else {
        out.notes.push(format!("an amplification exceeds the prediction {}", table.prediction));
        Ok(Status::CheckFailed)
    }
}

fn lemma_csv(rows: &[LemmaCheck]) -> String {
    let mut csv = String::from("trial,lhs,rhs,margin,pass\n");
    for (i, c) in rows.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{},{}", c.lhs, c.rhs, c.margin, u8::from(c.pass));
    }
    csv
}

fn lemmas_command(cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    let grid = Grid::line(cfg.lemmas.size, 1.0)?;
    let checks = Execution::Parallel.map_range(cfg.lemmas.trials, |t| -> nlclaw::Result<(LemmaCheck, LemmaCheck)> {
        let inst = random_lemma_instance(&grid, cfg.seed, t as u64)?;
        Ok((check_lemma_a(&inst)?, check_lemma_b(&inst)?))
    });
    let checks = checks.into_iter().collect::<nlclaw::Result<Vec<_>>>()?;
    let (a, b): (Vec<LemmaCheck>, Vec<LemmaCheck>) = checks.into_iter().unzip();
    out.write("lemma_a.csv", lemma_csv(&a))?;
    out.write("lemma_b.csv", lemma_csv(&b))?;
    let failed = a.iter().chain(&b).filter(|c| !c.pass).count();
    if failed == 0 {
        Ok(Status::Ok)
    } else {
        out.notes.push(format!("{failed} lemma checks violated"));
        Ok(Status::CheckFailed)
    }
}

/// Block average of a 1-D trajectory onto `coarse`.
fn restrict(traj: &[State], coarse: &Grid) -> nlclaw::Result<Vec<State>> {
    traj.iter()
        .map(|s| {
            let ratio = s.u.grid().cells_per_axis() / coarse.cells_per_axis();
            let values = s.u.values().chunks_exact(ratio).map(|c| c.iter().sum::<f64>() / ratio as f64).collect();
            Ok(State { u: Field::new(*coarse, values)?, ..s.clone() })
        })
        .collect()
}

/// Lower limit on `Δ(u, u)` relative to `‖u0‖_L¹`.
const KUZNETSOV_SELF_FLOOR: f64 = -0.05;

fn kuznetsov_command(cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    let pc = problem_config(cfg);
    let k = &cfg.kuznetsov;
    let horizon = (k.snapshots - 1) as f64 * k.dt;
    let coarse = ProblemConfig { horizon, ..pc.clone() }.build()?;
    let fine = ProblemConfig { horizon, n: pc.n * k.refinement, epsilon: 0.0, ..pc.clone() }.build()?;
    let times: Vec<f64> = (0..k.snapshots).map(|i| i as f64 * k.dt).collect();
    let mut trajectories = Vec::with_capacity(2);
    for p in [fine.clone(), fine.with_epsilon(pc.epsilon)] {
        let r = run(&p, &times)?;
        if let Some(b) = r.blowup {
            out.notes.push(format!("run at epsilon = {} blew up at t = {}", p.epsilon, b.time));
            return Ok(Status::Blowup);
        }
        trajectories.push(restrict(&r.trajectory, &coarse.grid)?);
    }
    let (reference, approx) = (&trajectories[0], &trajectories[1]);
    let floor = KUZNETSOV_SELF_FLOOR * norm_l1(&coarse.u0)?;
    let mut csv = String::from("delta,eta,final_time,initial_time,time_derivative,transport,source,total,reference_total\n");
    let mut status = Status::Ok;
    for &delta in &k.deltas {
        let m = MollifierPair::new(delta, k.eta)?;
        let own = kuznetsov_delta(reference, reference, &coarse, m)?.total();
        let t = kuznetsov_delta(reference, approx, &coarse, m)?;
        let _ = writeln!(
            csv,
            "{delta},{},{},{},{},{},{},{},{own}",
            k.eta,
            t.final_time,
            t.initial_time,
            t.time_derivative,
            t.transport,
            t.source,
            t.total()
        );
        if own < floor {
            out.notes.push(format!("reference functional {own} below {floor} at delta = {delta}"));
            status = Status::CheckFailed;
        }
    }
    out.write("kuznetsov.csv", csv)?;
    Ok(status)
}

const LINF_SLACK: f64 = 1.05;
const TV_SLACK: f64 = 1.1;

fn bounds_command(cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    let p = problem_config(cfg).build()?;
    let requested = cfg.output.resolve(p.horizon);
    let linf = linfty_bound_for(&p, cfg.ode_constant, &requested)?;
    let covered = linf.curve.times.last().copied().unwrap_or(0.0);
    let times: Vec<f64> = requested.iter().copied().filter(|t| *t <= covered).collect();
    if times.len() < requested.len() {
        out.notes.push(format!("L-infinity bound overflows before t = {}; comparing up to t = {covered}", p.horizon));
    }
    let tv = tv_bound_curve(&p, &linf.curve, &times, cfg.bounds.tv_rate)?;
    let result = run(&Problem { horizon: times.last().copied().unwrap_or(0.0), ..p.clone() }, &times)?;
    let mut csv = String::from("t,linf,linf_bound,tv,tv_bound\n");
    let mut status = Status::Ok;
    for (s, tv_bound) in result.trajectory.iter().zip(&tv.values) {
        let m = linf.curve.value_at(s.time).expect("covered");
        let (u_linf, u_tv) = (norm_linf(&s.u).unwrap_or(f64::NAN), total_variation(&s.u).unwrap_or(f64::NAN));
        let _ = writeln!(csv, "{},{u_linf},{m},{u_tv},{tv_bound}", s.time);
        if !(u_linf <= LINF_SLACK * m && u_tv <= TV_SLACK * tv_bound) {
            status = Status::CheckFailed;
        }
    }
    out.write("bounds.csv", csv)?;
    let mut info = String::new();
    let _ = writeln!(info, "doubling_time {}", linf.doubling_time);
    let _ = writeln!(info, "tv_rate {:?}", cfg.bounds.tv_rate);
    for (k, v) in linf.curve.inputs.iter().chain(&tv.inputs) {
        let _ = writeln!(info, "{k} {v}");
    }
    let _ = writeln!(info, "note A(t) is reconstructed from the differential inequality for A' and integrated numerically");
    out.write("bounds.txt", info)?;
    if status == Status::CheckFailed {
        out.notes.push(format!("L-infinity above {LINF_SLACK}x or TV above {TV_SLACK}x its bound"));
    }
    if let Some(b) = result.blowup {
        out.notes.push(format!("blew up at t = {}", b.time));
        return Ok(Status::Blowup);
    }
    Ok(status)
}

const PICARD_FACTOR_LIMIT: f64 = 0.6;

fn picard_command(cfg: &RunConfig, out: &mut Outputs) -> Result<Status, Failure> {
    let p = problem_config(cfg).build()?;
    let t_short = match cfg.picard.t_short {
        Some(t) => t,
        None => picard_threshold(&p, 1.0)?,
    };
    let r = picard_iterate_with(&p, t_short, cfg.picard.iterations, PicardOptions { substeps: cfg.picard.substeps })?;
    let mut csv = String::from("iteration,increment,contraction_factor\n");
    for (i, inc) in r.increments.iter().enumerate() {
        let factor = if i == 0 { String::new() } else { r.contraction_factors[i - 1].to_string() };
        let _ = writeln!(csv, "{},{inc},{factor}", i + 1);
    }
    out.write("picard.csv", csv)?;
    out.write("picard_field.nlf", encode_snapshot(&p.grid, r.field.values()))?;
    out.notes.push(format!("t_short = {t_short}"));
    let worst = r.contraction_factors.iter().copied().fold(0.0_f64, f64::max);
    if r.contractive && worst <= PICARD_FACTOR_LIMIT {
        Ok(Status::Ok)
    } else {
        out.notes.push(format!("largest contraction factor {worst} exceeds {PICARD_FACTOR_LIMIT}"));
        Ok(Status::CheckFailed)
    }
}
