//! Experiment orchestration and persistence behind the `qic` binary.

pub mod config;
pub mod experiments;
pub mod output;
pub mod sampling;
pub mod validate;

use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig, NRange, TargetSpec};
pub use experiments::{run_bp_stats, run_entropy, run_fit, run_generalize, run_majority_ratios, run_sweep};
pub use output::{resolve_out_dir, RunOutput, OUT_DIR_ENV};
pub use sampling::SamplingReport;
pub use validate::{run_validate, run_validate_with, ValidateOptions};

use crate::error::Result;

/// What a finished run wrote and whether it passed its checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatus {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    /// False if any optimized result broke the worst-case bound or, for
    /// `validate`, any suite failed.
    pub passed: bool,
}

/// Runs the configured experiment and writes its outputs into `dir`.
pub fn run_and_write(cfg: &ExperimentConfig, dir: &Path) -> Result<RunStatus> {
    cfg.validate()?;
    fn finish<R: serde::Serialize>(out: RunOutput<R>, dir: &Path, extra_ok: bool) -> Result<RunStatus> {
        let (csv, sidecar) = out.write(dir)?;
        Ok(RunStatus { csv, sidecar, passed: extra_ok && out.all_within_bound() })
    }
    match cfg.experiment {
        Experiment::Fit => finish(run_fit(cfg)?, dir, true),
        Experiment::Sweep => finish(run_sweep(cfg)?, dir, true),
        Experiment::Generalize => finish(run_generalize(cfg)?, dir, true),
        Experiment::MajorityRatios => finish(run_majority_ratios(cfg)?, dir, true),
        Experiment::BpStats => finish(run_bp_stats(cfg)?, dir, true),
        Experiment::Entropy => finish(run_entropy(cfg)?, dir, true),
        Experiment::Validate => {
            let out = run_validate(cfg)?;
            let ok = out.rows.iter().all(|r| r.passed);
            finish(out, dir, ok)
        }
    }
}
