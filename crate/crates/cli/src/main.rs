//! `nlclaw`: batch front end. Every command reads a TOML configuration,
//! writes its tables into the output directory together with
//! `manifest.json`, and exits with 0 (ok), 1 (bad input or failure),
//! 2 (blowup) or 3 (an acceptance check failed).

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use commands::{execute, Outputs, Status};
use config::{parse_config, parse_config_file, Command, RunConfig};

#[derive(Parser)]
#[command(name = "nlclaw", version, about = "Viscous nonlocal conservation laws: runs, studies and estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one problem and write diagnostics, snapshots and plot data.
    Run(Common),
    /// Fit the vanishing-viscosity rate over a list of epsilons.
    RateStudy(Common),
    /// L1 amplification of perturbations against the Gronwall prediction.
    StabilityStudy(Common),
    /// Check the two divergence lemmas on random instances.
    VerifyLemmas(LemmaArgs),
    /// Kuznetsov-type functional between an inviscid and a viscous run.
    Kuznetsov(Common),
    /// Compare a run with its L-infinity and TV bound curves.
    Bounds(Common),
    /// Picard iteration for the mild formulation.
    Picard(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    trials: Option<usize>,
    /// Cells of the 1-D grid the instances live on.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args, Serialize)]
struct Overrides {
    /// Output directory (default: `out` from the config, else `nlclaw-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ode_constant: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    version: &'a str,
    wall_seconds: f64,
    status: &'a str,
    outputs: &'a [String],
    notes: &'a [String],
    inputs: Inputs<'a>,
}

#[derive(Serialize)]
struct Inputs<'a> {
    config_path: Option<String>,
    config: &'a toml::Table,
    overrides: &'a Overrides,
    trials: Option<usize>,
    size: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Status, String> {
    let (command, config_path, overrides, trials, size) = match cli.command {
        Cmd::Run(c) => (Command::Run, Some(c.config), c.overrides, None, None),
        Cmd::RateStudy(c) => (Command::RateStudy, Some(c.config), c.overrides, None, None),
        Cmd::StabilityStudy(c) => (Command::StabilityStudy, Some(c.config), c.overrides, None, None),
        Cmd::VerifyLemmas(a) => (Command::VerifyLemmas, a.config, a.overrides, a.trials, a.size),
        Cmd::Kuznetsov(c) => (Command::Kuznetsov, Some(c.config), c.overrides, None, None),
        Cmd::Bounds(c) => (Command::Bounds, Some(c.config), c.overrides, None, None),
        Cmd::Picard(c) => (Command::Picard, Some(c.config), c.overrides, None, None),
    };
    let (mut cfg, bytes) = match &config_path {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            (parse_config_file(path, command).map_err(|e| e.to_string())?, bytes)
        }
        None => (parse_config("", Path::new("."), command).map_err(|e| e.to_string())?, Vec::new()),
    };
    apply_overrides(&mut cfg, &overrides, trials, size)?;

    let out_dir = overrides.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("nlclaw-out"));
    let mut outputs = Outputs::new(&out_dir);
    let start = Instant::now();
    let status = execute(command, &cfg, &mut outputs).map_err(|e| e.to_string())?;
    let manifest = Manifest {
        command: command.name(),
        config_hash: hex(&Sha256::digest(&bytes)),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_seconds: start.elapsed().as_secs_f64(),
        status: status.name(),
        outputs: &outputs.written,
        notes: &outputs.notes,
        inputs: Inputs {
            config_path: config_path.map(|p| p.display().to_string()),
            config: &cfg.raw,
            overrides: &overrides,
            trials,
            size,
        },
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    json.push('\n');
    let path = outputs.dir().join("manifest.json");
    std::fs::write(&path, json).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    for n in &outputs.notes {
        eprintln!("{}: {n}", command.name());
    }
    Ok(status)
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides, trials: Option<usize>, size: Option<usize>) -> Result<(), String> {
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(c) = o.ode_constant {
        if !(c.is_finite() && c > 0.0) {
            return Err(format!("--ode-constant must be > 0, got {c}"));
        }
        cfg.ode_constant = c;
    }
    if let Some(t) = trials {
        if t == 0 {
            return Err("--trials must be at least 1".into());
        }
        cfg.lemmas.trials = t;
    }
    if let Some(s) = size {
        if s < 8 {
            return Err(format!("--size must be at least 8, got {s}"));
        }
        cfg.lemmas.size = s;
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
