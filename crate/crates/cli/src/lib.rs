//! Command-line front end: configuration, report emission and dispatch.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod run;

pub use config::{Command, RunArgs, RunConfig};
pub use report::Report;
pub use run::{run, RunOutput};

/// Environment variable holding the worker thread count; 0 or unset means
/// one thread per core.
pub const THREADS_ENV: &str = "BAYES_MHD_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(bayes_mhd::Error),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Output(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<bayes_mhd::Error> for CliError {
    fn from(e: bayes_mhd::Error) -> Self {
        use bayes_mhd::Error as E;
        match e {
            E::InvalidConfig(_)
            | E::InvalidInput(_)
            | E::InvalidInterval { .. }
            | E::Parse { .. }
            | E::Io(_)
            | E::DegenerateData
            | E::OutOfUnitInterval { .. } => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

/// Reads [`THREADS_ENV`] and sizes the global pool. Returns the thread count.
pub fn configure_threads() -> Result<usize, CliError> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Validation(format!("{THREADS_ENV}={v} is not a non-negative integer")))?,
        _ => 0,
    };
    // A pool may already exist (tests); the existing one is then kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}
