//! Experiment runner for the `thickening` toolkit.
//!
//! An experiment is named in a flat config file ([`config`]), looked up in
//! the [`experiments::REGISTRY`], and produces a fixed sequence of
//! [`record::ResultRecord`]s. Records are self-describing: each carries the
//! full parameter echo and seed, so [`replay`] can recompute it.

pub mod config;
pub mod experiments;
pub mod record;
pub mod replay;

use std::fmt::Write as _;

use thickening::LabError;
use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiments::run_experiment;
pub use record::ResultRecord;

pub const EXIT_OK: i32 = 0;
/// An asserted inequality failed, or a replay did not reproduce.
pub const EXIT_FAILED: i32 = 1;
/// Unreadable input files.
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "LAB_THREADS";

#[derive(Debug, Error)]
pub enum LabRunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] LabError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl LabRunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabRunError::Core(LabError::DegenerateEstimate(_)) => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
/// Results never depend on the worker count.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, LabRunError> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| LabRunError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Exit status implied by a record stream.
pub fn status_of(records: &[ResultRecord]) -> i32 {
    if records.iter().any(ResultRecord::failed) {
        EXIT_FAILED
    } else {
        EXIT_OK
    }
}

/// Human-readable table of a record stream.
pub fn summary_table(records: &[ResultRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:<20} {:<26} {:<28} {:>8} {:>14} {:>11} {:>14}  result",
        "experiment", "family", "label", "metric", "x", "estimate", "stderr", "bound"
    );
    for r in records {
        let opt = |v: Option<f64>, w: usize| match v {
            Some(v) => format!("{v:>w$.6}"),
            None => format!("{:>w$}", "-"),
        };
        let verdict = match r.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(
            s,
            "{:<20} {:<20} {:<26} {:<28} {} {:>14.6e} {} {}  {}",
            r.experiment,
            r.family.as_deref().unwrap_or("-"),
            r.label.as_deref().unwrap_or("-"),
            r.metric,
            opt(r.x, 8),
            r.estimate,
            opt(r.stderr, 11),
            opt(r.bound, 14),
            verdict
        );
    }
    let failed = records.iter().filter(|r| r.failed()).count();
    let checked = records.iter().filter(|r| r.pass.is_some()).count();
    let _ = writeln!(s, "{} records, {checked} checked, {failed} failed", records.len());
    s
}
