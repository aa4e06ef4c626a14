//! Scenario runs, constant calibration and report output on top of
//! `otlab-core`.

pub mod calibrate;
pub mod emit;
pub mod pipeline;
pub mod scenario;

pub use calibrate::{calibrate, calibrate_constant, calibrate_prepared};
pub use emit::{emit_reports, read_reports, Format};
pub use pipeline::{prepare, run_all, run_scenario, Prepared, RunReport};
pub use scenario::{Constants, KMode, MeasureSpec, Scenario};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario {scenario}: {stage} stage failed: {message}")]
    Stage { scenario: String, stage: &'static str, message: String },
    #[error("no scenario meets the preconditions of {0}")]
    NoApplicableScenario(String),
    #[error("{0} fails for every constant up to {1:e}")]
    NeverHolds(String, f64),
    #[error("unknown inequality {0}")]
    UnknownInequality(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            HarnessError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

/// Caps the global pool at `OTLAB_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("OTLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
