use clap::{Parser, ValueEnum};
use junction_cli::{resolve_workers, run, Command, ExperimentConfig, Failure, Pool, WORKERS_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Solve,
    Cost,
    Optimize,
    Audit,
    Crosscheck,
    #[value(name = "reproduce-prop511")]
    ReproduceProp511,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Cost => Command::Cost,
            Cmd::Optimize => Command::Optimize,
            Cmd::Audit => Command::Audit,
            Cmd::Crosscheck => Command::Crosscheck,
            Cmd::ReproduceProp511 => Command::ReproduceProp511,
        }
    }
}

/// Junction flux-limiter experiments.
///
/// Exit codes: 0 when every audit passes, 1 when an audit fails, 2 for an
/// invalid configuration, a violated experiment hypothesis or a run error.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    command: Cmd,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to run.out_dir of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to run.parallel_workers, then $JUNCTION_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

fn fail(msg: &str) -> ExitCode {
    eprint!("{msg}");
    if !msg.ends_with('\n') {
        eprintln!();
    }
    ExitCode::from(2)
}

fn failure(f: &Failure) -> ExitCode {
    eprint!("{f}");
    ExitCode::from(f.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(&format!("reading {}: {e}", cli.config.display())),
    };
    let config = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(&format!("invalid configuration {}:\n{e}", cli.config.display())),
    };
    let out = match cli.out.clone().or_else(|| config.run.out_dir.clone().map(PathBuf::from)) {
        Some(o) => o,
        None => return fail("no output directory: pass --out or set run.out_dir"),
    };
    let env = std::env::var(WORKERS_ENV).ok();
    let workers = match resolve_workers(cli.workers, &config, env.as_deref()) {
        Ok(n) => n,
        Err(e) => return fail(&e),
    };
    let pool = match Pool::new(workers) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    match run(cli.command.into(), &config, &out, &pool) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(f) => failure(&f),
    }
}
