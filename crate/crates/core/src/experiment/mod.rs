//! Experiment drivers behind the command-line front end.
//!
//! Each command turns a [`RunConfig`] into a set of named output files. Results are
//! deterministic for a fixed config: trials draw from seeds derived from `base_seed`
//! and the trial index only, and aggregates are reduced in a fixed order.

mod config;
mod runners;
mod svg;

pub use config::*;
pub use runners::*;
pub use svg::success_curve_svg;

use serde::Serialize;

use crate::error::{Error, Result};

/// How a finished command went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// At least one trial hit the iteration cap.
    NotConverged,
    /// A validation check failed.
    ChecksFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 2,
            Status::ChecksFailed => 3,
        }
    }
}

/// Files produced by a command, keyed by path relative to the output directory.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub status: Status,
}

impl Outputs {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

/// Run the experiment named in the config.
pub fn run(cfg: &RunConfig) -> Result<Outputs> {
    match cfg.experiment {
        ExperimentKind::Solve => cmd_solve(cfg),
        ExperimentKind::Sweep => cmd_sweep(cfg),
        ExperimentKind::Geometry => cmd_geometry(cfg),
        ExperimentKind::Validate => cmd_validate(cfg),
    }
}

/// [`run`] on a dedicated pool of `jobs` threads.
pub fn run_with_jobs(cfg: &RunConfig, jobs: usize) -> Result<Outputs> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    pool.install(|| run(cfg))
}
