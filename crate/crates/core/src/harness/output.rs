use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use crate::error::Result;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QIC_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "qic-results";

/// Wall time for one cell. Rows point at it through their `cell` column, so
/// the CSV itself stays byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellTiming {
    pub cell: usize,
    pub label: String,
    pub seconds: f64,
}

/// One optimized circuit, kept for the bound-compliance audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub cell: usize,
    pub ansatz: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub distance: f64,
    pub bound: f64,
    pub converged: bool,
}

impl FitRecord {
    pub fn within_bound(&self) -> bool {
        self.distance <= self.bound + 1e-9
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<R> {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub rows: Vec<R>,
    pub timings: Vec<CellTiming>,
    pub fits: Vec<FitRecord>,
    /// Experiment-specific extras for the sidecar.
    pub extra: serde_json::Value,
}

impl<R: Serialize> RunOutput<R> {
    pub fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "cells": self.timings,
            "total_seconds": self.timings.iter().map(|t| t.seconds).sum::<f64>(),
            "bound_violations": self.fits.iter().filter(|f| !f.within_bound()).collect::<Vec<_>>(),
            "extra": self.extra,
        })
    }

    /// Writes `<experiment>.csv` and `<experiment>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let json_path = dir.join(format!("{}.json", self.experiment));
        fs::write(&csv_path, self.csv()?)?;
        fs::write(&json_path, serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok((csv_path, json_path))
    }

    pub fn all_within_bound(&self) -> bool {
        self.fits.iter().all(FitRecord::within_bound)
    }
}

/// `--out`, then the config, then [`OUT_DIR_ENV`], then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
