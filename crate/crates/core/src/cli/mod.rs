//! Declarative experiment configuration, orchestration and artifact output.
//!
//! ```text
//! eoslab <kind> [CONFIG] [--set key=value]... [--seed N] [--out DIR] [--threads N]
//! eoslab run CONFIG [...]
//! eoslab validate [CONFIG] [--kind KIND] [--set key=value]...
//! ```
//!
//! Every run writes its data files, `config.toml` (the fully resolved
//! config) and `manifest.json` (config, seed, version, thread count,
//! wall-clock, SHA-256 of each data file). Data files are byte-identical for
//! the same config and seed regardless of thread count; only the manifest's
//! wall-clock and thread fields vary.
//!
//! Exit codes: 0 success (including runs that diverged, which are flagged in
//! the artifacts), 1 config error, 2 runtime error.

mod artifacts;
mod config;
mod experiments;
pub mod params;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};

pub use artifacts::{read_manifest, sha256_hex, ArtifactRecord, Manifest, MANIFEST_NAME};
pub use config::{load, params_from_toml, ConfigRequest, ExperimentConfig, ExperimentKind, Loaded, Params, OUT_ENV};

use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Runs a resolved experiment into `out_dir`, on `threads` workers if given.
pub fn run(config: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<Manifest> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build a pool of {n} threads: {e}")))?;
            pool.install(|| run_here(config, out_dir))
        }
        None => run_here(config, out_dir),
    }
}

fn run_here(config: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    let start = Instant::now();
    let mut out = artifacts::OutputDir::create(out_dir)?;
    out.write_bytes("config.toml", config.to_toml()?.as_bytes())?;
    let notes = experiments::run_params(&config.params, config.seed, &mut out)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind().name().to_string(),
        seed: config.seed,
        threads: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config: config.to_json()?,
        artifacts: out.records().to_vec(),
        flags: notes.flags,
        warnings: notes.warnings,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join(MANIFEST_NAME), text)?;
    Ok(manifest)
}

/// Schema check without execution.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Resolved config as TOML.
    pub resolved: String,
}

impl ValidationReport {
    pub fn render(&self) -> String {
        let mut s = String::from("violations:");
        if self.violations.is_empty() {
            s.push_str(" none\n");
        } else {
            s.push('\n');
            for v in &self.violations {
                s.push_str(&format!("  - {v}\n"));
            }
        }
        s.push_str("resolved config:\n");
        s.push_str(&self.resolved);
        s
    }
}

pub fn validate(config: &ExperimentConfig) -> Result<ValidationReport> {
    Ok(ValidationReport {
        violations: config.violations(),
        resolved: config.to_toml()?,
    })
}

fn common_args(cmd: Command) -> Command {
    cmd.arg(Arg::new("config").value_name("CONFIG").value_parser(clap::value_parser!(PathBuf)).help("TOML config file"))
        .arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("Override a config key; dotted keys reach nested tables"),
        )
        .arg(Arg::new("seed").long("seed").value_parser(clap::value_parser!(u64)).help("Master seed"))
}

fn run_args(cmd: Command) -> Command {
    common_args(cmd)
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .value_parser(clap::value_parser!(PathBuf))
                .help(format!("Output directory (default ${OUT_ENV}/<kind> or runs/<kind>)")),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .value_parser(clap::value_parser!(usize))
                .help("Worker threads"),
        )
}

pub fn command() -> Command {
    let mut cmd = Command::new("eoslab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Stability-threshold experiments for weight-perturbed gradient descent")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for kind in ExperimentKind::ALL {
        cmd = cmd.subcommand(run_args(Command::new(kind.name()).about(format!("Run the {kind} experiment"))));
    }
    cmd.subcommand(run_args(Command::new("run").about("Run the experiment named by the config's kind")))
        .subcommand(
            common_args(Command::new("validate").about("Check a config and print it fully resolved")).arg(
                Arg::new("kind")
                    .long("kind")
                    .value_name("KIND")
                    .help("Experiment kind when the config does not name one"),
            ),
        )
}

fn request(kind: Option<ExperimentKind>, m: &ArgMatches, with_out: bool) -> Result<ConfigRequest> {
    let mut req = ConfigRequest {
        kind,
        sets: m.get_many::<String>("set").map(|v| v.cloned().collect()).unwrap_or_default(),
        seed: m.get_one::<u64>("seed").copied(),
        out: if with_out { m.get_one::<PathBuf>("out").cloned() } else { None },
        ..ConfigRequest::default()
    };
    if let Some(path) = m.get_one::<PathBuf>("config") {
        req = req.with_file(path)?;
    }
    Ok(req)
}

fn default_out(kind: ExperimentKind) -> PathBuf {
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(kind.name())
}

fn dispatch(m: &ArgMatches) -> Result<i32> {
    let (name, sub) = m.subcommand().ok_or_else(|| Error::Config("missing subcommand".into()))?;
    if name == "validate" {
        let kind = sub.get_one::<String>("kind").map(|k| k.parse()).transpose()?;
        let loaded = load(&request(kind, sub, false)?)?;
        print!("{}", validate(&loaded.config)?.render());
        return Ok(EXIT_OK);
    }
    let kind = if name == "run" { None } else { Some(name.parse()?) };
    let loaded = load(&request(kind, sub, true)?)?;
    let out = loaded.out.clone().unwrap_or_else(|| default_out(loaded.config.kind()));
    let manifest = run(&loaded.config, &out, sub.get_one::<usize>("threads").copied())?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    for f in &manifest.flags {
        eprintln!("flag: {f}");
    }
    println!("{}", out.join(MANIFEST_NAME).display());
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&matches) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
