//! Run configuration: TOML text to a validated [`RunConfig`], collecting
//! every violation with its line and key.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use nlclaw::field::Grid;
use nlclaw::init::U0Spec;
use nlclaw::lab::{preset_cgv, preset_hks, uniform_times, TvRate};
use nlclaw::physics::{make_kernel, KernelSpec, Mobility};
use nlclaw::solver::{Problem, DEFAULT_BLOWUP_THRESHOLD, DEFAULT_CFL};
use toml::de::{DeTable, DeValue};
use toml::{Spanned, Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Run,
    RateStudy,
    StabilityStudy,
    VerifyLemmas,
    Kuznetsov,
    Bounds,
    Picard,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Run,
        Command::RateStudy,
        Command::StabilityStudy,
        Command::VerifyLemmas,
        Command::Kuznetsov,
        Command::Bounds,
        Command::Picard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::RateStudy => "rate-study",
            Command::StabilityStudy => "stability-study",
            Command::VerifyLemmas => "verify-lemmas",
            Command::Kuznetsov => "kuznetsov",
            Command::Bounds => "bounds",
            Command::Picard => "picard",
        }
    }

    fn needs_problem(self) -> bool {
        self != Command::VerifyLemmas
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<Violation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for v in &self.0 {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Hks,
    Cgv,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MobilitySpec {
    Zero,
    Linear,
    Logistic,
    LogisticPower { alpha: f64 },
    Power { m: f64 },
    Polynomial(Vec<f64>),
}

impl MobilitySpec {
    pub fn build(&self) -> nlclaw::Result<Mobility> {
        match self {
            MobilitySpec::Zero => Ok(Mobility::zero()),
            MobilitySpec::Linear => Ok(Mobility::linear()),
            MobilitySpec::Logistic => Ok(Mobility::logistic()),
            MobilitySpec::LogisticPower { alpha } => Mobility::logistic_power(*alpha),
            MobilitySpec::Power { m } => Mobility::power(*m),
            MobilitySpec::Polynomial(c) => Mobility::polynomial(c.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub preset: Option<Preset>,
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub kernel: Option<KernelSpec>,
    pub mobility: MobilitySpec,
    pub epsilon: f64,
    pub horizon: f64,
    pub u0: U0Spec,
    pub cfl_advection: f64,
    pub cfl_diffusion: f64,
    pub blowup_threshold: f64,
}

impl ProblemConfig {
    pub fn build(&self) -> nlclaw::Result<Problem> {
        let mut p = match self.preset {
            Some(Preset::Hks) => preset_hks(self.n, self.epsilon, self.horizon, &self.u0)?,
            Some(Preset::Cgv) => {
                let m = match self.mobility {
                    MobilitySpec::Power { m } => m,
                    _ => 2.0,
                };
                preset_cgv(self.n, m, self.epsilon, self.horizon, &self.u0)?
            }
            None => {
                let grid = Grid::new(self.dim, self.n, self.length)?;
                let spec = self.kernel.clone().unwrap_or(KernelSpec::Hks);
                let kernel = make_kernel(&spec, &grid)?;
                Problem::new(self.u0.build(&grid)?, Arc::new(kernel), self.mobility.build()?, self.epsilon, self.horizon)?
            }
        };
        p.cfl_advection = self.cfl_advection;
        p.cfl_diffusion = self.cfl_diffusion;
        p.blowup_threshold = self.blowup_threshold;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OutputTimes {
    Intervals(usize),
    Times(Vec<f64>),
}

impl OutputTimes {
    pub fn resolve(&self, horizon: f64) -> Vec<f64> {
        match self {
            OutputTimes::Intervals(k) => uniform_times(horizon, *k),
            OutputTimes::Times(t) => t.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateConfig {
    pub epsilons: Vec<f64>,
    pub intervals: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PerturbationSpec {
    Shift { cells: i64 },
    Amplitude { theta: f64 },
    Bump { center: f64, width: f64, amplitude: f64 },
}

impl PerturbationSpec {
    pub fn label(&self) -> String {
        match self {
            PerturbationSpec::Shift { cells } => format!("shift({cells})"),
            PerturbationSpec::Amplitude { theta } => format!("amplitude({theta})"),
            PerturbationSpec::Bump { center, width, amplitude } => format!("bump({center};{width};{amplitude})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityConfig {
    pub intervals: usize,
    pub tv_rate: TvRate,
    pub perturbations: Vec<PerturbationSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaConfig {
    pub trials: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KuznetsovConfig {
    pub deltas: Vec<f64>,
    pub eta: f64,
    pub snapshots: usize,
    pub dt: f64,
    pub refinement: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig {
    pub t_short: Option<f64>,
    pub iterations: usize,
    pub substeps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsConfig {
    pub intervals: usize,
    pub tv_rate: TvRate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub ode_constant: f64,
    pub problem: Option<ProblemConfig>,
    pub output: OutputTimes,
    pub rate: RateConfig,
    pub stability: StabilityConfig,
    pub lemmas: LemmaConfig,
    pub kuznetsov: KuznetsovConfig,
    pub picard: PicardConfig,
    pub bounds: BoundsConfig,
    /// Parsed document, echoed into the manifest.
    pub raw: Table,
}

const TOP_KEYS: &[&str] = &[
    "command",
    "seed",
    "out",
    "ode_constant",
    "preset",
    "epsilon",
    "horizon",
    "cfl_advection",
    "cfl_diffusion",
    "blowup_threshold",
    "grid",
    "kernel",
    "mobility",
    "u0",
    "output",
    "rate_study",
    "stability",
    "lemmas",
    "kuznetsov",
    "picard",
    "bounds",
];

const PROBLEM_KEYS: &[&str] =
    &["preset", "epsilon", "horizon", "cfl_advection", "cfl_diffusion", "blowup_threshold", "grid", "kernel", "mobility", "u0"];

const ALIASES: &[(&str, &str)] = &[
    ("viscosity", "epsilon"),
    ("viscocity", "epsilon"),
    ("visc", "epsilon"),
    ("eps", "epsilon"),
    ("nu", "epsilon"),
    ("diffusion", "epsilon"),
    ("t_final", "horizon"),
    ("final_time", "horizon"),
    ("t_end", "horizon"),
    ("tmax", "horizon"),
    ("cells", "n"),
    ("resolution", "n"),
    ("l", "length"),
    ("type", "kind"),
];

/// Reads and validates a configuration file. Relative paths inside it are
/// resolved against its directory.
pub fn parse_config_file(path: &Path, command: Command) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors(vec![Violation { line: None, key: path.display().to_string(), message: format!("cannot read: {e}") }])
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base, command)
}

pub fn parse_config(text: &str, base: &Path, command: Command) -> Result<RunConfig, ConfigErrors> {
    let root: Table = match toml::from_str(text) {
        Ok(t) => t,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start));
            return Err(ConfigErrors(vec![Violation { line, key: "<document>".into(), message: e.message().to_string() }]));
        }
    };
    let spans = DeTable::parse(text).ok();
    let mut cx = Cx { text, spans: spans.as_ref().map(|s| s.get_ref()), base, violations: Vec::new() };
    let cfg = cx.run_config(&root, command);
    if cx.violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(cx.violations))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn suggest(key: &str, allowed: &[&str]) -> Option<String> {
    let lower = key.to_ascii_lowercase();
    if let Some((_, target)) = ALIASES.iter().find(|(a, t)| *a == lower && allowed.contains(t)) {
        return Some((*target).to_string());
    }
    allowed
        .iter()
        .map(|a| (strsim::normalized_damerau_levenshtein(&lower, a), *a))
        .filter(|(score, _)| *score >= 0.5)
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, a)| a.to_string())
}

struct Cx<'a> {
    text: &'a str,
    spans: Option<&'a DeTable<'a>>,
    base: &'a Path,
    violations: Vec<Violation>,
}

fn find_key<'t, 'i>(table: &'t DeTable<'i>, key: &str) -> Option<(&'t Spanned<std::borrow::Cow<'i, str>>, &'t Spanned<DeValue<'i>>)> {
    table.iter().find(|(k, _)| k.get_ref().as_ref() == key)
}

impl<'a> Cx<'a> {
    /// Byte span of `path` (table names then key) in the source, if known.
    fn span(&self, path: &[&str]) -> Option<Range<usize>> {
        let mut table = self.spans?;
        let (last, parents) = path.split_last()?;
        for p in parents {
            let (_, v) = find_key(table, p)?;
            table = v.get_ref().as_table()?;
        }
        find_key(table, last).map(|(k, _)| k.span())
    }

    fn push(&mut self, path: &[&str], message: impl Into<String>) {
        let line = self.span(path).map(|s| line_of(self.text, s.start));
        self.violations.push(Violation { line, key: path.join("."), message: message.into() });
    }

    fn check_keys(&mut self, table: &Table, prefix: &[&str], allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                let mut path = prefix.to_vec();
                path.push(key);
                let hint = match suggest(key, allowed) {
                    Some(s) => format!("unknown key (did you mean `{s}`?)"),
                    None => format!("unknown key (expected one of: {})", allowed.join(", ")),
                };
                self.push(&path, hint);
            }
        }
    }

    fn sub<'t>(&mut self, table: &'t Table, prefix: &[&str], key: &str) -> Option<&'t Table> {
        match table.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                self.push(&[prefix, &[key]].concat(), format!("expected a table, got {}", other.type_str()));
                None
            }
        }
    }

    fn float(&mut self, table: &Table, path: &[&str], default: f64, valid: impl Fn(f64) -> Result<(), String>) -> f64 {
        let key = path.last().expect("non-empty path");
        let v = match table.get(*key) {
            None => return default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(other) => {
                self.push(path, format!("expected a number, got {}", other.type_str()));
                return default;
            }
        };
        if let Err(m) = valid(v) {
            self.push(path, format!("{m}, got {v}"));
            return default;
        }
        v
    }

    fn required_float(&mut self, table: &Table, path: &[&str], valid: impl Fn(f64) -> Result<(), String>) -> f64 {
        let key = path.last().expect("non-empty path");
        if !table.contains_key(*key) {
            self.push(path, "required key is missing");
            return f64::NAN;
        }
        self.float(table, path, f64::NAN, valid)
    }

    fn int(&mut self, table: &Table, path: &[&str], default: i64, lo: i64, hi: i64) -> i64 {
        let key = path.last().expect("non-empty path");
        match table.get(*key) {
            None => default,
            Some(Value::Integer(i)) if (lo..=hi).contains(i) => *i,
            Some(Value::Integer(i)) => {
                self.push(path, format!("must lie in [{lo}, {hi}], got {i}"));
                default
            }
            Some(other) => {
                self.push(path, format!("expected an integer, got {}", other.type_str()));
                default
            }
        }
    }

    fn string(&mut self, table: &Table, path: &[&str]) -> Option<String> {
        let key = path.last().expect("non-empty path");
        match table.get(*key) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => {
                self.push(path, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, table: &Table, path: &[&str], options: &[(&str, T)]) -> Option<T> {
        let s = self.string(table, path)?;
        match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.push(path, format!("unknown value `{s}` (expected one of: {})", names.join(", ")));
                None
            }
        }
    }

    fn floats(&mut self, table: &Table, path: &[&str], valid: impl Fn(f64) -> Result<(), String>) -> Option<Vec<f64>> {
        let key = path.last().expect("non-empty path");
        let arr = match table.get(*key) {
            None => return None,
            Some(Value::Array(a)) => a,
            Some(other) => {
                self.push(path, format!("expected an array of numbers, got {}", other.type_str()));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for (i, v) in arr.iter().enumerate() {
            let x = match v {
                Value::Float(x) => *x,
                Value::Integer(n) => *n as f64,
                other => {
                    self.push(path, format!("entry {i}: expected a number, got {}", other.type_str()));
                    continue;
                }
            };
            match valid(x) {
                Ok(()) => out.push(x),
                Err(m) => self.push(path, format!("entry {i}: {m}, got {x}")),
            }
        }
        Some(out)
    }

    fn path_value(&mut self, table: &Table, path: &[&str]) -> Option<PathBuf> {
        let s = self.string(table, path)?;
        let p = self.base.join(&s);
        if !p.is_file() {
            self.push(path, format!("file `{}` does not exist", p.display()));
            return None;
        }
        Some(p)
    }

    fn run_config(&mut self, root: &Table, command: Command) -> RunConfig {
        self.check_keys(root, &[], TOP_KEYS);
        let declared = self.string(root, &["command"]);
        if let Some(c) = declared {
            match c.parse::<Command>() {
                Ok(c) if c != command => {
                    self.push(&["command"], format!("config is for `{}` but `{}` was invoked", c.name(), command.name()))
                }
                Ok(_) => {}
                Err(m) => self.push(&["command"], m),
            }
        }
        let seed = self.int(root, &["seed"], 0, 0, i64::MAX) as u64;
        let out = self.string(root, &["out"]).map(|s| self.base.join(s));
        let ode_constant = self.float(root, &["ode_constant"], 1.0, positive);
        let has_problem = PROBLEM_KEYS.iter().any(|k| root.contains_key(*k));
        let problem = if command.needs_problem() || has_problem { Some(self.problem(root)) } else { None };
        let horizon = problem.as_ref().map_or(1.0, |p| p.horizon);
        RunConfig {
            command: Some(command),
            seed,
            out,
            ode_constant,
            problem,
            output: self.output(root, horizon),
            rate: self.rate(root),
            stability: self.stability(root),
            lemmas: self.lemmas(root),
            kuznetsov: self.kuznetsov(root),
            picard: self.picard(root),
            bounds: self.bounds(root),
            raw: root.clone(),
        }
    }

    fn problem(&mut self, root: &Table) -> ProblemConfig {
        let preset = self.choice(root, &["preset"], &[("hks", Preset::Hks), ("cgv", Preset::Cgv)]);
        let epsilon = self.float(root, &["epsilon"], 1e-3, nonnegative);
        let horizon = self.float(root, &["horizon"], 0.2, nonnegative);
        let cfl_advection = self.float(root, &["cfl_advection"], DEFAULT_CFL, unit_interval);
        let cfl_diffusion = self.float(root, &["cfl_diffusion"], DEFAULT_CFL, unit_interval);
        let blowup_threshold = self.float(root, &["blowup_threshold"], DEFAULT_BLOWUP_THRESHOLD, positive);

        let (mut dim, mut n, mut length) = (1, 256, 1.0);
        if let Some(g) = self.sub(root, &[], "grid") {
            self.check_keys(g, &["grid"], &["dim", "n", "length"]);
            dim = self.int(g, &["grid", "dim"], 1, 1, 2) as usize;
            n = self.int(g, &["grid", "n"], 256, 8, 1 << 20) as usize;
            length = self.float(g, &["grid", "length"], 1.0, positive);
        }
        if preset.is_some() && (dim != 1 || length != 1.0) {
            self.push(&["preset"], "presets live on the unit circle (grid.dim = 1, grid.length = 1)");
        }

        let kernel = match self.sub(root, &[], "kernel") {
            Some(k) if preset.is_some() => {
                let _ = k;
                self.push(&["kernel"], "a preset fixes its kernel; remove this table");
                None
            }
            Some(k) => self.kernel(k),
            None if preset.is_none() => {
                self.violations.push(Violation {
                    line: None,
                    key: "kernel".into(),
                    message: "required table is missing (or set `preset`)".into(),
                });
                None
            }
            None => None,
        };

        let mobility = match self.sub(root, &[], "mobility") {
            Some(m) => {
                let spec = self.mobility(m);
                match (preset, &spec) {
                    (Some(Preset::Hks), _) => {
                        self.push(&["mobility"], "the hks preset fixes the logistic mobility; remove this table");
                    }
                    (Some(Preset::Cgv), MobilitySpec::Power { .. }) | (None, _) => {}
                    (Some(Preset::Cgv), _) => self.push(&["mobility", "kind"], "the cgv preset needs kind = \"power\""),
                }
                spec
            }
            None => MobilitySpec::Logistic,
        };

        let u0 = match self.sub(root, &[], "u0") {
            Some(u) => self.u0(u),
            None => U0Spec::Sine { mean: 0.5, amplitude: 0.4, frequency: 1.0 },
        };
        ProblemConfig {
            preset,
            dim,
            n,
            length,
            kernel,
            mobility,
            epsilon,
            horizon,
            u0,
            cfl_advection,
            cfl_diffusion,
            blowup_threshold,
        }
    }

    fn kernel(&mut self, k: &Table) -> Option<KernelSpec> {
        let p = |key: &'static str| ["kernel", key];
        let tag = self.string(k, &p("tag"));
        let allowed: &[&str] = match tag.as_deref() {
            Some("hks") | Some("cgv") => &["tag"],
            Some("gaussian-gradient") => &["tag", "sigma", "strength"],
            Some("box") => &["tag", "a"],
            Some("file") => &["tag", "path"],
            Some(other) => {
                self.push(&p("tag"), format!("unknown kernel `{other}` (expected hks, cgv, gaussian-gradient, box, file)"));
                return None;
            }
            None => {
                self.push(&["kernel"], "missing `tag`");
                return None;
            }
        };
        self.check_keys(k, &["kernel"], allowed);
        Some(match tag.as_deref().expect("checked") {
            "hks" => KernelSpec::Hks,
            "cgv" => KernelSpec::Cgv,
            "gaussian-gradient" => KernelSpec::GaussianGradient {
                sigma: self.required_float(k, &p("sigma"), positive),
                strength: self.float(k, &p("strength"), 1.0, finite),
            },
            "box" => KernelSpec::Box { a: self.required_float(k, &p("a"), positive) },
            _ => {
                if !k.contains_key("path") {
                    self.push(&p("path"), "required key is missing");
                }
                KernelSpec::File(self.path_value(k, &p("path"))?)
            }
        })
    }

    fn mobility(&mut self, m: &Table) -> MobilitySpec {
        let p = |key: &'static str| ["mobility", key];
        let kind = self.string(m, &p("kind")).unwrap_or_else(|| "logistic".into());
        let (allowed, spec): (&[&str], MobilitySpec) = match kind.as_str() {
            "zero" => (&["kind"], MobilitySpec::Zero),
            "linear" => (&["kind"], MobilitySpec::Linear),
            "logistic" => (&["kind"], MobilitySpec::Logistic),
            "logistic-power" => {
                (&["kind", "alpha"], MobilitySpec::LogisticPower { alpha: self.required_float(m, &p("alpha"), at_least_one) })
            }
            "power" => (&["kind", "m"], MobilitySpec::Power { m: self.float(m, &p("m"), 2.0, positive) }),
            "polynomial" => {
                if !m.contains_key("coefficients") {
                    self.push(&p("coefficients"), "required key is missing");
                }
                let c = self.floats(m, &p("coefficients"), finite).unwrap_or_default();
                (&["kind", "coefficients"], MobilitySpec::Polynomial(c))
            }
            other => {
                self.push(
                    &p("kind"),
                    format!("unknown mobility `{other}` (expected zero, linear, logistic, logistic-power, power, polynomial)"),
                );
                (&["kind", "alpha", "m", "coefficients"], MobilitySpec::Logistic)
            }
        };
        self.check_keys(m, &["mobility"], allowed);
        spec
    }

    fn u0(&mut self, u: &Table) -> U0Spec {
        let p = |key: &'static str| ["u0", key];
        let kind = self.string(u, &p("kind")).unwrap_or_else(|| "sine".into());
        let (allowed, spec): (&[&str], U0Spec) = match kind.as_str() {
            "constant" => (&["kind", "value"], U0Spec::Constant { value: self.required_float(u, &p("value"), finite) }),
            "sine" => (
                &["kind", "mean", "amplitude", "frequency"],
                U0Spec::Sine {
                    mean: self.float(u, &p("mean"), 0.5, finite),
                    amplitude: self.float(u, &p("amplitude"), 0.4, finite),
                    frequency: self.float(u, &p("frequency"), 1.0, finite),
                },
            ),
            "step" => (
                &["kind", "left", "right", "interface"],
                U0Spec::Step {
                    left: self.required_float(u, &p("left"), finite),
                    right: self.required_float(u, &p("right"), finite),
                    interface: self.float(u, &p("interface"), 0.0, finite),
                },
            ),
            "gaussian-bump" => (
                &["kind", "center", "width", "amplitude", "base"],
                U0Spec::GaussianBump {
                    center: self.float(u, &p("center"), 0.0, finite),
                    width: self.required_float(u, &p("width"), positive),
                    amplitude: self.float(u, &p("amplitude"), 1.0, finite),
                    base: self.float(u, &p("base"), 0.0, finite),
                },
            ),
            "file" => {
                if !u.contains_key("path") {
                    self.push(&p("path"), "required key is missing");
                }
                let path = self.path_value(u, &p("path")).unwrap_or_default();
                (&["kind", "path"], U0Spec::File { path })
            }
            other => {
                self.push(&p("kind"), format!("unknown u0 `{other}` (expected constant, sine, step, gaussian-bump, file)"));
                (&["kind", "value", "mean", "amplitude", "frequency", "left", "right", "interface", "center", "width", "base", "path"], U0Spec::Constant { value: 0.0 })
            }
        };
        self.check_keys(u, &["u0"], allowed);
        spec
    }

    fn output(&mut self, root: &Table, horizon: f64) -> OutputTimes {
        let Some(o) = self.sub(root, &[], "output") else { return OutputTimes::Intervals(20) };
        self.check_keys(o, &["output"], &["times", "intervals"]);
        if o.contains_key("times") && o.contains_key("intervals") {
            self.push(&["output", "times"], "give either `times` or `intervals`, not both");
        }
        if let Some(t) = self.floats(o, &["output", "times"], nonnegative) {
            if t.is_empty() || t.windows(2).any(|w| !(w[0] < w[1])) {
                self.push(&["output", "times"], "must be a non-empty strictly increasing list");
            } else if t[t.len() - 1] > horizon * (1.0 + 1e-12) {
                self.push(&["output", "times"], format!("last time {} exceeds the horizon {horizon}", t[t.len() - 1]));
            }
            return OutputTimes::Times(t);
        }
        OutputTimes::Intervals(self.int(o, &["output", "intervals"], 20, 1, 1_000_000) as usize)
    }

    fn rate(&mut self, root: &Table) -> RateConfig {
        let default = vec![4e-3, 2e-3, 1e-3, 5e-4];
        let Some(r) = self.sub(root, &[], "rate_study") else { return RateConfig { epsilons: default, intervals: 25 } };
        self.check_keys(r, &["rate_study"], &["epsilons", "intervals"]);
        let epsilons = self.floats(r, &["rate_study", "epsilons"], positive).unwrap_or(default);
        if epsilons.len() < 4 || epsilons.windows(2).any(|w| !(w[0] > w[1])) {
            self.push(&["rate_study", "epsilons"], "need at least 4 strictly decreasing values");
        }
        RateConfig { epsilons, intervals: self.int(r, &["rate_study", "intervals"], 25, 1, 100_000) as usize }
    }

    fn tv_rate(&mut self, t: &Table, section: &'static str) -> TvRate {
        self.choice(t, &[section, "tv_rate"], &[("full", TvRate::Full), ("div-only", TvRate::DivOnly)])
            .unwrap_or_default()
    }

    fn stability(&mut self, root: &Table) -> StabilityConfig {
        let defaults = vec![
            PerturbationSpec::Shift { cells: 1 },
            PerturbationSpec::Amplitude { theta: 0.05 },
            PerturbationSpec::Bump { center: 0.2, width: 0.03, amplitude: 0.05 },
        ];
        let Some(s) = self.sub(root, &[], "stability") else {
            return StabilityConfig { intervals: 20, tv_rate: TvRate::Full, perturbations: defaults };
        };
        self.check_keys(s, &["stability"], &["intervals", "tv_rate", "perturbations"]);
        let intervals = self.int(s, &["stability", "intervals"], 20, 1, 100_000) as usize;
        let tv_rate = self.tv_rate(s, "stability");
        let perturbations = match s.get("perturbations") {
            None => defaults,
            Some(Value::Array(items)) => {
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let key = format!("perturbations[{i}]");
                    let path = ["stability", key.as_str()];
                    let Value::Table(t) = item else {
                        self.push(&["stability", "perturbations"], format!("entry {i}: expected a table"));
                        continue;
                    };
                    let at = |k: &'static str| -> [&str; 3] { ["stability", "perturbations", k] };
                    match self.string(t, &at("kind")).as_deref() {
                        Some("shift") => {
                            self.check_keys(t, &path, &["kind", "cells"]);
                            out.push(PerturbationSpec::Shift { cells: self.int(t, &at("cells"), 1, -1 << 20, 1 << 20) });
                        }
                        Some("amplitude") => {
                            self.check_keys(t, &path, &["kind", "theta"]);
                            out.push(PerturbationSpec::Amplitude { theta: self.required_float(t, &at("theta"), finite) });
                        }
                        Some("bump") => {
                            self.check_keys(t, &path, &["kind", "center", "width", "amplitude"]);
                            out.push(PerturbationSpec::Bump {
                                center: self.float(t, &at("center"), 0.0, finite),
                                width: self.required_float(t, &at("width"), positive),
                                amplitude: self.required_float(t, &at("amplitude"), finite),
                            });
                        }
                        Some(other) => self.push(
                            &["stability", "perturbations"],
                            format!("entry {i}: unknown kind `{other}` (expected shift, amplitude, bump)"),
                        ),
                        None => self.push(&["stability", "perturbations"], format!("entry {i}: missing `kind`")),
                    }
                }
                out
            }
            Some(other) => {
                self.push(&["stability", "perturbations"], format!("expected an array of tables, got {}", other.type_str()));
                defaults
            }
        };
        StabilityConfig { intervals, tv_rate, perturbations }
    }

    fn lemmas(&mut self, root: &Table) -> LemmaConfig {
        let Some(l) = self.sub(root, &[], "lemmas") else { return LemmaConfig { trials: 100, size: 64 } };
        self.check_keys(l, &["lemmas"], &["trials", "size"]);
        LemmaConfig {
            trials: self.int(l, &["lemmas", "trials"], 100, 1, 1_000_000) as usize,
            size: self.int(l, &["lemmas", "size"], 64, 8, 4096) as usize,
        }
    }

    fn kuznetsov(&mut self, root: &Table) -> KuznetsovConfig {
        let default = KuznetsovConfig { deltas: vec![0.04, 0.08], eta: 0.03, snapshots: 32, dt: 0.01, refinement: 16 };
        let Some(k) = self.sub(root, &[], "kuznetsov") else { return default };
        self.check_keys(k, &["kuznetsov"], &["deltas", "eta", "snapshots", "dt", "refinement"]);
        let deltas = self.floats(k, &["kuznetsov", "deltas"], positive).unwrap_or(default.deltas);
        if deltas.is_empty() {
            self.push(&["kuznetsov", "deltas"], "need at least one value");
        }
        KuznetsovConfig {
            deltas,
            eta: self.float(k, &["kuznetsov", "eta"], default.eta, positive),
            snapshots: self.int(k, &["kuznetsov", "snapshots"], 32, 2, nlclaw::verify::MAX_KUZNETSOV_SNAPSHOTS as i64) as usize,
            dt: self.float(k, &["kuznetsov", "dt"], default.dt, positive),
            refinement: self.int(k, &["kuznetsov", "refinement"], 16, 1, 64) as usize,
        }
    }

    fn picard(&mut self, root: &Table) -> PicardConfig {
        let Some(p) = self.sub(root, &[], "picard") else {
            return PicardConfig { t_short: None, iterations: 6, substeps: 64 };
        };
        self.check_keys(p, &["picard"], &["t_short", "iterations", "substeps"]);
        PicardConfig {
            t_short: p.contains_key("t_short").then(|| self.float(p, &["picard", "t_short"], f64::NAN, positive)),
            iterations: self.int(p, &["picard", "iterations"], 6, 1, 1000) as usize,
            substeps: self.int(p, &["picard", "substeps"], 64, 1, 100_000) as usize,
        }
    }

    fn bounds(&mut self, root: &Table) -> BoundsConfig {
        let Some(b) = self.sub(root, &[], "bounds") else { return BoundsConfig { intervals: 20, tv_rate: TvRate::Full } };
        self.check_keys(b, &["bounds"], &["intervals", "tv_rate"]);
        BoundsConfig {
            intervals: self.int(b, &["bounds", "intervals"], 20, 1, 100_000) as usize,
            tv_rate: self.tv_rate(b, "bounds"),
        }
    }
}

fn finite(x: f64) -> Result<(), String> {
    if x.is_finite() {
        Ok(())
    } else {
        Err("must be finite".into())
    }
}

fn positive(x: f64) -> Result<(), String> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err("must be > 0".into())
    }
}

fn nonnegative(x: f64) -> Result<(), String> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err("must be >= 0".into())
    }
}

fn unit_interval(x: f64) -> Result<(), String> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err("must lie in (0, 1]".into())
    }
}

fn at_least_one(x: f64) -> Result<(), String> {
    if x.is_finite() && x >= 1.0 {
        Ok(())
    } else {
        Err("must be >= 1".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, c: Command) -> Result<RunConfig, ConfigErrors> {
        parse_config(text, Path::new("."), c)
    }

    #[test]
    fn minimal_hks_config_gets_defaults() {
        let cfg = parse("preset = \"hks\"\n", Command::Run).unwrap();
        let p = cfg.problem.unwrap();
        assert_eq!(p.preset, Some(Preset::Hks));
        assert_eq!((p.n, p.epsilon, p.horizon), (256, 1e-3, 0.2));
        assert_eq!(cfg.output, OutputTimes::Intervals(20));
        assert!(p.build().is_ok());
    }

    #[test]
    fn negative_epsilon_names_the_key() {
        let e = parse("preset = \"hks\"\nepsilon = -1\n", Command::Run).unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].key, "epsilon");
        assert_eq!(e.0[0].line, Some(2));
        assert!(e.0[0].message.contains(">= 0"));
    }

    #[test]
    fn misspelled_viscosity_suggests_epsilon() {
        let e = parse("preset = \"hks\"\nviscocity = 0.1\n", Command::Run).unwrap_err();
        assert!(e.0[0].message.contains("did you mean `epsilon`"), "{e}");
    }

    #[test]
    fn all_violations_are_reported() {
        let text = "epsilon = -1\nhorizon = \"x\"\n[grid]\nn = 2\ncolour = 1\n[kernel]\ntag = \"gaussian-gradient\"\nsigma = 0\n";
        let e = parse(text, Command::Run).unwrap_err();
        let keys: Vec<&str> = e.0.iter().map(|v| v.key.as_str()).collect();
        assert_eq!(keys, ["epsilon", "horizon", "grid.colour", "grid.n", "kernel.sigma"], "{e}");
        assert_eq!(e.0[2].line, Some(5));
        assert_eq!(e.0[4].line, Some(8));
    }

    #[test]
    fn missing_files_are_violations() {
        let text = "[kernel]\ntag = \"hks\"\n[u0]\nkind = \"file\"\npath = \"no/such/file.bin\"\n";
        let e = parse(text, Command::Run).unwrap_err();
        assert_eq!(e.0[0].key, "u0.path");
        assert!(e.0[0].message.contains("does not exist"));
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let e = parse("command = \"picard\"\npreset = \"hks\"\n", Command::Run).unwrap_err();
        assert_eq!(e.0[0].key, "command");
    }

    #[test]
    fn lemmas_need_no_problem() {
        let cfg = parse("[lemmas]\ntrials = 10\n", Command::VerifyLemmas).unwrap();
        assert!(cfg.problem.is_none());
        assert_eq!(cfg.lemmas, LemmaConfig { trials: 10, size: 64 });
    }

    #[test]
    fn perturbation_tables_parse() {
        let text = "preset = \"hks\"\n[[stability.perturbations]]\nkind = \"shift\"\ncells = 2\n[[stability.perturbations]]\nkind = \"bump\"\nwidth = 0.02\namplitude = 0.01\n";
        let cfg = parse(text, Command::StabilityStudy).unwrap();
        assert_eq!(
            cfg.stability.perturbations,
            vec![PerturbationSpec::Shift { cells: 2 }, PerturbationSpec::Bump { center: 0.0, width: 0.02, amplitude: 0.01 }]
        );
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let e = parse("preset = \"hks\"\nepsilon = = 2\n", Command::Run).unwrap_err();
        assert_eq!(e.0[0].line, Some(2));
    }
}
