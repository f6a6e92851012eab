//! Command-line front end: runs scenarios into output directories, runs the
//! acceptance suite and compares runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod output;
pub mod plot;

pub use error::CliError;

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "DBS_TRAJ_THREADS";

/// Sizes the global thread pool from `DBS_TRAJ_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Input(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}
