//! Command-line driver: configuration, run modes and file output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, Mode, RunConfig};
pub use error::CliError;
pub use run::{run, Outcome};

/// Environment variable capping the worker thread count (0 = automatic).
pub const THREADS_ENV: &str = "ECONFLOW_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`].
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV}: expected a thread count, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("{THREADS_ENV}: {e}")))
}
