//! `mixlimit`: run a sweep and write its rows as CSV.
//!
//! ```text
//! mixlimit <experiment> [--config <path>] [--set key=value]... [--replay cell,rep]
//!          [--out <path>] [--threads N] [--fixed-input]
//! ```
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mixlimit_core::experiments::{self, Experiment, SweepConfig};
use mixlimit_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "mixlimit",
    version,
    about = "Deterministic Monte Carlo sweeps over random networks"
)]
struct Cli {
    /// mmd_sweep, cov_sweep, histogram, oracle_check or clt_check.
    #[arg(value_parser = parse_experiment)]
    experiment: Experiment,

    /// Flat `key = value` config file; built-in defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Override one config key (repeatable, applied after the file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Run only grid cell CELL, repeat REP.
    #[arg(long, value_name = "CELL,REP", value_parser = parse_replay)]
    replay: Option<(usize, usize)>,

    /// Output CSV path; overrides `output_path`. Standard output when neither is set.
    #[arg(long, short)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,

    /// Use the configured fixed input instead of fresh N(0,1) inputs.
    #[arg(long)]
    fixed_input: bool,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_replay(s: &str) -> Result<(usize, usize), String> {
    let (c, r) = s
        .split_once(',')
        .ok_or_else(|| format!("expected CELL,REP, got `{s}`"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad index `{v}` in `{s}`"))
    };
    Ok((num(c)?, num(r)?))
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if matches!(e, Error::Io(_)) {
            Failure::Io(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn load_config(cli: &Cli) -> Result<SweepConfig, Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = cli.overrides.clone();
    if cli.fixed_input {
        overrides.push("fixed_input=true".into());
    }
    Ok(SweepConfig::from_text(cli.experiment, &text, &overrides)?)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::Config(format!("cannot start thread pool: {e}")))?;
    let rows = pool.install(|| experiments::run(&cfg, cli.replay))?;
    let csv = experiments::to_csv_string(&rows);

    let target = cli
        .out
        .clone()
        .or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
    match target {
        Some(path) => fs::write(&path, csv)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .lock()
            .write_all(csv.as_bytes())
            .map_err(|e| Failure::Io(format!("cannot write output: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mixlimit: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
