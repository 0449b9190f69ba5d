use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qic::ansatz::AnsatzKind;
use qic::harness::{resolve_out_dir, run_and_write, Experiment, ExperimentConfig, NRange, TargetSpec};
use qic::{QicError, Result};

#[derive(Parser)]
#[command(name = "qic", version, about = "Fit and analyse quantum imputation circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one circuit and dump target vs output probabilities.
    Fit(Flags),
    /// Optimized distance across N and ansatz families.
    Sweep {
        #[command(flatten)]
        flags: Flags,
        /// Random targets, N = 2..16, 100 repetitions. Takes hours.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Seen, unseen and full distances after training on a masked target.
    Generalize(Flags),
    /// Sampled rule-following ratios on a masked majority target.
    MajorityRatios(Flags),
    /// Gradient mean and variance under random parameters.
    BpStats(Flags),
    /// Mean target-qubit entropy under random parameters.
    Entropy(Flags),
    /// Run the invariant suites; exits 1 on any failure.
    Validate(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long)]
    repetitions: Option<u64>,
    /// Output directory (default: $QIC_OUT_DIR, else ./qic-results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated: linear, quadratic, exponential.
    #[arg(long, value_delimiter = ',')]
    ansatz: Vec<AnsatzKind>,
    /// Single value (`4`) or inclusive range (`2-8`).
    #[arg(long)]
    n: Option<NRange>,
    /// Comma-separated mask fractions in [0, 1).
    #[arg(long, value_delimiter = ',')]
    fraction: Vec<f64>,
    /// gaussian, majority, random, or a path to a target CSV.
    #[arg(long)]
    target: Option<String>,
    /// Monte-Carlo samples for bp-stats and entropy.
    #[arg(long)]
    samples: Option<usize>,
    /// Sampled outcomes for majority-ratios.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Sweep parameter count from linear to quadratic at the largest N.
    #[arg(long)]
    param_sweep: bool,
}

fn parse_target(s: &str) -> TargetSpec {
    match s {
        "gaussian" => TargetSpec::default(),
        "majority" => TargetSpec::Majority,
        "random" => TargetSpec::Random,
        path => TargetSpec::Csv { path: path.into() },
    }
}

fn resolve(experiment: Experiment, flags: &Flags) -> Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != experiment {
                return Err(QicError::Config(format!(
                    "{} describes a {} experiment, not {experiment}",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(experiment),
    };
    if let Some(seed) = flags.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(k) = flags.repetitions {
        let start = cfg.seeds[0];
        cfg.seeds = (start..start + k).collect();
    }
    if !flags.ansatz.is_empty() {
        cfg.ansatz = flags.ansatz.clone();
    }
    if let Some(n) = flags.n {
        cfg.n = n;
    }
    if !flags.fraction.is_empty() {
        cfg.mask_fractions = flags.fraction.clone();
    }
    if let Some(t) = &flags.target {
        cfg.target = parse_target(t);
    }
    if let Some(s) = flags.samples {
        cfg.samples = s;
    }
    if let Some(d) = flags.draws {
        cfg.draws = d;
    }
    if let Some(r) = flags.restarts {
        cfg.optimizer.restarts = r;
    }
    cfg.param_sweep |= flags.param_sweep;
    if let Some(out) = &flags.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let (experiment, flags, paper_scale) = match cli.command {
        Command::Fit(f) => (Experiment::Fit, f, false),
        Command::Sweep { flags, paper_scale } => (Experiment::Sweep, flags, paper_scale),
        Command::Generalize(f) => (Experiment::Generalize, f, false),
        Command::MajorityRatios(f) => (Experiment::MajorityRatios, f, false),
        Command::BpStats(f) => (Experiment::BpStats, f, false),
        Command::Entropy(f) => (Experiment::Entropy, f, false),
        Command::Validate(f) => (Experiment::Validate, f, false),
    };
    let mut cfg = resolve(experiment, &flags)?;
    if paper_scale {
        cfg.target = TargetSpec::Random;
        cfg.n = NRange::new(2, 16)?;
        cfg.ansatz = vec![AnsatzKind::Linear, AnsatzKind::Quadratic];
        cfg.seeds = (0..100).collect();
    }
    let dir = resolve_out_dir(flags.out.as_deref(), &cfg);
    let status = run_and_write(&cfg, &dir)?;
    println!("wrote {}", status.csv.display());
    println!("wrote {}", status.sidecar.display());
    if !status.passed {
        eprintln!("checks failed; see {}", status.sidecar.display());
    }
    Ok(status.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
