//! Experiment runner for the junction flux-limiter toolkit: TOML
//! configuration, a rayon worker pool, and the named experiments that write
//! CSV and JSON outputs.

pub mod commands;
pub mod config;
pub mod exec;
pub mod output;
pub mod prop;

pub use commands::{run, Failure, Outcome};
pub use config::{Command, ExperimentConfig};
pub use exec::Pool;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "JUNCTION_WORKERS";

/// Worker count: the flag, then `run.parallel_workers`, then
/// [`WORKERS_ENV`], then the available parallelism.
pub fn resolve_workers(flag: Option<usize>, config: &ExperimentConfig, env: Option<&str>) -> Result<usize, String> {
    if let Some(n) = flag.or(config.run.parallel_workers) {
        return Ok(n.max(1));
    }
    if let Some(v) = env {
        return match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("{WORKERS_ENV} = {v:?} is not a positive integer")),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
