use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::MIN_SAMPLES;
use crate::ansatz::{AnsatzKind, EXPONENTIAL_MAX_INPUTS, STATEVECTOR_MAX_INPUTS};
use crate::error::{QicError, Result};
use crate::optimizer::OptimizeConfig;
use crate::targets::{GaussianParams, TargetDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fit,
    Sweep,
    Generalize,
    MajorityRatios,
    BpStats,
    Entropy,
    Validate,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Fit,
        Experiment::Sweep,
        Experiment::Generalize,
        Experiment::MajorityRatios,
        Experiment::BpStats,
        Experiment::Entropy,
        Experiment::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fit => "fit",
            Experiment::Sweep => "sweep",
            Experiment::Generalize => "generalize",
            Experiment::MajorityRatios => "majority_ratios",
            Experiment::BpStats => "bp_stats",
            Experiment::Entropy => "entropy",
            Experiment::Validate => "validate",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = QicError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| QicError::Config(format!("unknown experiment {s:?}")))
    }
}

/// Inclusive range of input-qubit counts. Written as `"3"` or `"2-8"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRange", into = "String")]
pub struct NRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawRange {
    One(usize),
    Text(String),
}

impl TryFrom<RawRange> for NRange {
    type Error = QicError;

    fn try_from(raw: RawRange) -> Result<Self> {
        match raw {
            RawRange::One(n) => NRange::new(n, n),
            RawRange::Text(s) => s.parse(),
        }
    }
}

impl From<NRange> for String {
    fn from(r: NRange) -> String {
        r.to_string()
    }
}

impl NRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min < 1 || min > max {
            return Err(QicError::Config(format!("invalid N range {min}-{max}")));
        }
        Ok(Self { min, max })
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.min..=self.max
    }
}

impl fmt::Display for NRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.min == self.max {
            write!(f, "{}", self.min)
        } else {
            write!(f, "{}-{}", self.min, self.max)
        }
    }
}

impl FromStr for NRange {
    type Err = QicError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || QicError::Config(format!("cannot parse N range {s:?}"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once('-') {
            Some((lo, hi)) => NRange::new(num(lo)?, num(hi)?),
            None => NRange::single(num(s)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Gaussian {
        #[serde(default)]
        params: GaussianParams,
    },
    Majority,
    /// A fresh random target per seed.
    Random,
    Csv {
        path: PathBuf,
    },
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec::Gaussian {
            params: GaussianParams::default(),
        }
    }
}

impl TargetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::Gaussian { .. } => "gaussian",
            TargetSpec::Majority => "majority",
            TargetSpec::Random => "random",
            TargetSpec::Csv { .. } => "csv",
        }
    }

    pub fn build(&self, n_inputs: usize, seed: u64) -> Result<TargetDistribution> {
        match self {
            TargetSpec::Gaussian { params } => TargetDistribution::gaussian(n_inputs, params),
            TargetSpec::Majority => TargetDistribution::majority(n_inputs),
            TargetSpec::Random => TargetDistribution::random(n_inputs, seed),
            TargetSpec::Csv { path } => {
                let t = TargetDistribution::read_csv(path)?;
                if t.n_inputs() != n_inputs {
                    return Err(QicError::Config(format!(
                        "{} holds an N={} target, N={n_inputs} requested",
                        path.display(),
                        t.n_inputs()
                    )));
                }
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub ansatz: Vec<AnsatzKind>,
    pub n: NRange,
    pub target: TargetSpec,
    /// Fractions of inputs hidden from the optimizer; `0` hides nothing.
    pub mask_fractions: Vec<f64>,
    /// One repetition per seed. Each seed drives the target, mask,
    /// initialization and sampling streams of its cell, and overrides
    /// `optimizer.seed`.
    pub seeds: Vec<u64>,
    pub optimizer: OptimizeConfig,
    /// Monte-Carlo draws for gradient and entropy statistics.
    pub samples: usize,
    /// Outcomes drawn per sampling report.
    pub draws: usize,
    /// For `bp_stats` and `entropy`: sweep the parameter count from linear
    /// to quadratic at the largest N instead of sweeping N.
    pub param_sweep: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Fit,
            ansatz: vec![AnsatzKind::Linear],
            n: NRange { min: 3, max: 3 },
            target: TargetSpec::default(),
            mask_fractions: vec![0.0],
            seeds: vec![0],
            optimizer: OptimizeConfig::default(),
            samples: crate::analysis::DEFAULT_SAMPLES,
            draws: 1024,
            param_sweep: false,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        let target = match experiment {
            Experiment::MajorityRatios => TargetSpec::Majority,
            _ => TargetSpec::default(),
        };
        Self {
            experiment,
            target,
            ..Default::default()
        }
    }

    /// Reads a JSON config. Relative target paths resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| QicError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| QicError::Config(format!("{}: {e}", path.display())))?;
        if let TargetSpec::Csv { path: csv } = &mut cfg.target {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ansatz.is_empty() {
            return Err(QicError::Config("no ansatz kind given".into()));
        }
        if self.seeds.is_empty() {
            return Err(QicError::Config("no seeds given".into()));
        }
        if self.mask_fractions.is_empty() {
            return Err(QicError::Config("no mask fractions given".into()));
        }
        if let Some(f) = self.mask_fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(QicError::Config(format!("mask fraction {f} outside [0, 1)")));
        }
        if self.samples < MIN_SAMPLES {
            return Err(QicError::Config(format!(
                "samples must be at least {MIN_SAMPLES}, got {}",
                self.samples
            )));
        }
        if self.draws == 0 {
            return Err(QicError::Config("draws must be positive".into()));
        }
        for kind in &self.ansatz {
            let cap = match kind {
                AnsatzKind::Exponential => EXPONENTIAL_MAX_INPUTS,
                _ => STATEVECTOR_MAX_INPUTS,
            };
            if self.n.max > cap {
                return Err(QicError::Config(format!(
                    "N={} exceeds the {kind} cap of {cap}",
                    self.n.max
                )));
            }
        }
        if let TargetSpec::Csv { path } = &self.target {
            if !path.is_file() {
                return Err(QicError::Config(format!(
                    "target file {} not found",
                    path.display()
                )));
            }
        }
        self.optimizer
            .validate()
            .map_err(|e| QicError::Config(e.to_string()))
    }

    /// Optimizer settings for one cell.
    pub fn optimizer_for(&self, seed: u64) -> OptimizeConfig {
        OptimizeConfig {
            seed,
            ..self.optimizer.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_range_forms() {
        assert_eq!("3".parse::<NRange>().unwrap(), NRange { min: 3, max: 3 });
        assert_eq!("2-8".parse::<NRange>().unwrap(), NRange { min: 2, max: 8 });
        assert!("8-2".parse::<NRange>().is_err());
        assert!("0".parse::<NRange>().is_err());
        assert!("x".parse::<NRange>().is_err());
        let r: NRange = serde_json::from_str("4").unwrap();
        assert_eq!(r, NRange::single(4).unwrap());
        let r: NRange = serde_json::from_str("\"4-6\"").unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"4-6\"");
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ExperimentConfig {
            experiment: Experiment::Sweep,
            ansatz: vec![AnsatzKind::Linear, AnsatzKind::Quadratic],
            n: NRange::new(2, 5).unwrap(),
            target: TargetSpec::Majority,
            seeds: vec![1, 2],
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn sparse_config_uses_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"experiment": "majority_ratios", "n": 4, "target": {"kind": "majority"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.draws, 1024);
        assert_eq!(cfg.ansatz, vec![AnsatzKind::Linear]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = ExperimentConfig::new(Experiment::Fit);
        assert!(cfg.validate().is_ok());
        cfg.mask_fractions = vec![1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::Fit);
        cfg.ansatz = vec![AnsatzKind::Exponential];
        cfg.n = NRange::single(13).unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::Fit);
        cfg.target = TargetSpec::Csv { path: "/nonexistent/target.csv".into() };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::Fit);
        cfg.samples = 10;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn experiment_names_parse() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!("majority-ratios".parse::<Experiment>().unwrap(), Experiment::MajorityRatios);
    }
}
