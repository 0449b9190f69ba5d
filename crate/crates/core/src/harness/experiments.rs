use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Experiment, ExperimentConfig, TargetSpec};
use super::output::{CellTiming, FitRecord, RunOutput};
use super::sampling::{expected_ratios, sample_report};
use crate::analysis::{self, ExpFit};
use crate::ansatz::{Ansatz, AnsatzKind, ConditionalOutput};
use crate::bitphase::Bitstring;
use crate::error::{QicError, Result};
use crate::metrics::{joint_distance, restricted_distance, worst_case_bound, Support};
use crate::optimizer::{minimize, objective, solve_exponential, OptimizeConfig, OptimizeResult};
use crate::targets::TargetDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    n: usize,
    kind: AnsatzKind,
    fraction: f64,
    seed: u64,
}

impl Cell {
    fn label(&self) -> String {
        format!("N={} {} f={} seed={}", self.n, self.kind, self.fraction, self.seed)
    }
}

/// Every `(N, ansatz, fraction, seed)` combination, in output order.
fn grid(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for n in cfg.n.iter() {
        for &kind in &cfg.ansatz {
            for &fraction in &cfg.mask_fractions {
                for &seed in &cfg.seeds {
                    cells.push(Cell { n, kind, fraction, seed });
                }
            }
        }
    }
    cells
}

/// Runs cells in parallel and returns results in input order with timings.
fn run_cells<C, T, F>(cells: &[C], label: impl Fn(&C) -> String, f: F) -> Result<(Vec<T>, Vec<CellTiming>)>
where
    C: Sync,
    T: Send,
    F: Fn(&C) -> Result<T> + Sync,
{
    let timed: Vec<(Result<T>, f64)> = cells
        .par_iter()
        .map(|c| {
            let start = Instant::now();
            let r = f(c);
            (r, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut out = Vec::with_capacity(cells.len());
    let mut timings = Vec::with_capacity(cells.len());
    for (i, ((r, seconds), c)) in timed.into_iter().zip(cells).enumerate() {
        out.push(r?);
        timings.push(CellTiming { cell: i, label: label(c), seconds });
    }
    Ok((out, timings))
}

/// Optimizes `ansatz` on `target`; the exponential family is solved directly.
pub fn fit_circuit(ansatz: &Ansatz, target: &TargetDistribution, config: &OptimizeConfig) -> Result<OptimizeResult> {
    if ansatz.kind() == AnsatzKind::Exponential {
        let params = solve_exponential(target, ansatz.n_inputs())?;
        return Ok(OptimizeResult {
            final_distance: objective(ansatz, &params, target)?,
            best_params: params,
            iterations_used: 0,
            converged: true,
            restart_index: 0,
        });
    }
    minimize(ansatz, target, config)
}

/// A fitted circuit on the training target, plus the untouched reference.
struct Trained {
    ansatz: Ansatz,
    reference: TargetDistribution,
    train: TargetDistribution,
    result: OptimizeResult,
    out: ConditionalOutput,
    bound: f64,
}

impl Trained {
    fn new(cfg: &ExperimentConfig, cell: &Cell) -> Result<Self> {
        let reference = cfg.target.build(cell.n, cell.seed)?;
        let train = if cell.fraction > 0.0 {
            reference.mask_fraction(cell.fraction, cell.seed)?
        } else {
            reference.clone()
        };
        let ansatz = Ansatz::new(cell.kind, cell.n)?;
        let result = fit_circuit(&ansatz, &train, &cfg.optimizer_for(cell.seed))?;
        let out = ansatz.conditional_output(&result.best_params)?;
        let bound = worst_case_bound(ansatz.param_count(), cell.n)?;
        Ok(Self { ansatz, reference, train, result, out, bound })
    }

    fn record(&self, cell_index: usize, seed: u64) -> FitRecord {
        FitRecord {
            cell: cell_index,
            ansatz: self.ansatz.kind().name(),
            n: self.ansatz.n_inputs(),
            m: self.ansatz.param_count(),
            seed,
            distance: self.result.final_distance,
            bound: self.bound,
            converged: self.result.converged,
        }
    }
}

fn output<R>(cfg: &ExperimentConfig, rows: Vec<R>, timings: Vec<CellTiming>, fits: Vec<FitRecord>, extra: serde_json::Value) -> RunOutput<R> {
    RunOutput {
        experiment: cfg.experiment,
        config: cfg.clone(),
        rows,
        timings,
        fits,
        extra,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub experiment: &'static str,
    pub cell: usize,
    pub seed: u64,
    pub ansatz: String,
    pub n: usize,
    pub m: usize,
    pub fraction: f64,
    /// `prob` or `summary`.
    pub row: &'static str,
    pub bitstring: Option<String>,
    pub output_bit: Option<u8>,
    pub seen: Option<bool>,
    pub target_prob: Option<f64>,
    pub output_prob: Option<f64>,
    pub distance: Option<f64>,
    pub hellinger: Option<f64>,
    pub seen_hellinger: Option<f64>,
    pub bound: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

/// Target against optimized output for every `(b, a)`, then one summary row
/// per cell.
pub fn run_fit(cfg: &ExperimentConfig) -> Result<RunOutput<FitRow>> {
    let cells = grid(cfg);
    let (trained, timings) = run_cells(&cells, Cell::label, |c| Trained::new(cfg, c))?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (i, (cell, t)) in cells.iter().zip(&trained).enumerate() {
        let base = FitRow {
            experiment: Experiment::Fit.name(),
            cell: i,
            seed: cell.seed,
            ansatz: cell.kind.name(),
            n: cell.n,
            m: t.ansatz.param_count(),
            fraction: cell.fraction,
            row: "prob",
            bitstring: None,
            output_bit: None,
            seen: None,
            target_prob: None,
            output_prob: None,
            distance: None,
            hellinger: None,
            seen_hellinger: None,
            bound: None,
            iterations: None,
            converged: None,
        };
        let joint = t.out.joint();
        for (idx, (&target_prob, &output_prob)) in t.reference.probs().iter().zip(&joint).enumerate() {
            let b = idx >> 1;
            rows.push(FitRow {
                bitstring: Some(Bitstring::new(b as u32, cell.n)?.to_string()),
                output_bit: Some((idx & 1) as u8),
                seen: Some(t.train.is_seen(b)),
                target_prob: Some(target_prob),
                output_prob: Some(output_prob),
                ..base.clone()
            });
        }
        rows.push(FitRow {
            row: "summary",
            distance: Some(t.result.final_distance),
            hellinger: Some(joint_distance(&t.reference, &t.out)?.hellinger),
            seen_hellinger: Some(
                restricted_distance(&t.train, t.train.seen_mask(), &t.out, Support::Seen)?.hellinger,
            ),
            bound: Some(t.bound),
            iterations: Some(t.result.iterations_used),
            converged: Some(t.result.converged),
            ..base
        });
        fits.push(t.record(i, cell.seed));
    }
    Ok(output(cfg, rows, timings, fits, serde_json::Value::Null))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: &'static str,
    pub cell: usize,
    /// First seed of the group.
    pub seed: u64,
    pub repetitions: usize,
    pub ansatz: String,
    pub n: usize,
    pub m: usize,
    pub target: &'static str,
    pub fraction: f64,
    pub mean_distance: f64,
    /// Unbiased; zero for a single repetition.
    pub variance_distance: f64,
    pub min_distance: f64,
    pub max_distance: f64,
    pub bound: f64,
    pub violations: usize,
}

/// Optimized distance per `(N, ansatz, fraction)`, aggregated over seeds.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutput<SweepRow>> {
    let groups: Vec<Cell> = grid(cfg).into_iter().filter(|c| c.seed == cfg.seeds[0]).collect();
    let (results, timings) = run_cells(
        &groups,
        |g| format!("N={} {} f={}", g.n, g.kind, g.fraction),
        |g| {
            cfg.seeds
                .iter()
                .map(|&seed| Trained::new(cfg, &Cell { seed, ..*g }))
                .collect::<Result<Vec<_>>>()
        },
    )?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (i, (g, reps)) in groups.iter().zip(&results).enumerate() {
        let ds: Vec<f64> = reps.iter().map(|t| t.result.final_distance).collect();
        let k = ds.len() as f64;
        let mean = ds.iter().sum::<f64>() / k;
        let var = if ds.len() > 1 {
            ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let records: Vec<FitRecord> = reps
            .iter()
            .zip(&cfg.seeds)
            .map(|(t, &seed)| t.record(i, seed))
            .collect();
        rows.push(SweepRow {
            experiment: Experiment::Sweep.name(),
            cell: i,
            seed: g.seed,
            repetitions: ds.len(),
            ansatz: g.kind.name(),
            n: g.n,
            m: reps[0].ansatz.param_count(),
            target: cfg.target.name(),
            fraction: g.fraction,
            mean_distance: mean,
            variance_distance: var,
            min_distance: ds.iter().cloned().fold(f64::INFINITY, f64::min),
            max_distance: ds.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            bound: reps[0].bound,
            violations: records.iter().filter(|r| !r.within_bound()).count(),
        });
        fits.extend(records);
    }
    Ok(output(cfg, rows, timings, fits, serde_json::Value::Null))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizeRow {
    pub experiment: &'static str,
    pub cell: usize,
    pub seed: u64,
    pub ansatz: String,
    pub n: usize,
    pub m: usize,
    pub target: &'static str,
    pub fraction: f64,
    pub seen_inputs: usize,
    pub unseen_inputs: usize,
    /// Optimized distance on the training target.
    pub objective: f64,
    pub seen_distance: f64,
    /// Empty when nothing was hidden.
    pub unseen_distance: Option<f64>,
    pub full_distance: f64,
    pub bound: f64,
}

/// Trains on the seen inputs and measures how well the hidden ones are
/// reproduced.
pub fn run_generalize(cfg: &ExperimentConfig) -> Result<RunOutput<GeneralizeRow>> {
    let cells = grid(cfg);
    let (trained, timings) = run_cells(&cells, Cell::label, |c| Trained::new(cfg, c))?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (i, (cell, t)) in cells.iter().zip(&trained).enumerate() {
        let split = t.train.seen_mask();
        let seen_inputs = t.train.seen_count();
        let unseen_inputs = split.len() - seen_inputs;
        let distance = |support| restricted_distance(&t.reference, split, &t.out, support).map(|r| r.hellinger);
        rows.push(GeneralizeRow {
            experiment: Experiment::Generalize.name(),
            cell: i,
            seed: cell.seed,
            ansatz: cell.kind.name(),
            n: cell.n,
            m: t.ansatz.param_count(),
            target: cfg.target.name(),
            fraction: cell.fraction,
            seen_inputs,
            unseen_inputs,
            objective: t.result.final_distance,
            seen_distance: distance(Support::Seen)?,
            unseen_distance: if unseen_inputs > 0 { Some(distance(Support::Unseen)?) } else { None },
            full_distance: distance(Support::Full)?,
            bound: t.bound,
        });
        fits.push(t.record(i, cell.seed));
    }
    Ok(output(cfg, rows, timings, fits, serde_json::Value::Null))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub experiment: &'static str,
    pub cell: usize,
    pub seed: u64,
    pub ansatz: String,
    pub n: usize,
    pub m: usize,
    pub fraction: f64,
    pub n_o: usize,
    pub n_p: usize,
    pub n_n: usize,
    pub n_a: usize,
    pub ratio_p: f64,
    pub ratio_n: f64,
    pub ratio_a: f64,
    pub expected_ratio_p: f64,
    pub expected_ratio_n: f64,
    pub expected_ratio_a: f64,
    pub distance: f64,
    pub bound: f64,
}

/// Samples the trained circuit and counts outcomes that follow the rule,
/// split by whether their input was seen.
pub fn run_majority_ratios(cfg: &ExperimentConfig) -> Result<RunOutput<RatioRow>> {
    if matches!(cfg.target, TargetSpec::Gaussian { .. } | TargetSpec::Random) {
        return Err(QicError::Config(format!(
            "majority_ratios needs a rule-based target (majority or csv), got {}",
            cfg.target.name()
        )));
    }
    let cells = grid(cfg);
    let (trained, timings) = run_cells(&cells, Cell::label, |c| Trained::new(cfg, c))?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (i, (cell, t)) in cells.iter().zip(&trained).enumerate() {
        let split = t.train.seen_mask();
        let report = sample_report(&t.reference, split, &t.out, cfg.draws, cell.seed)?;
        let expected = expected_ratios(&t.reference, split, &t.out)?;
        let [ratio_p, ratio_n, ratio_a] = report.ratios();
        rows.push(RatioRow {
            experiment: Experiment::MajorityRatios.name(),
            cell: i,
            seed: cell.seed,
            ansatz: cell.kind.name(),
            n: cell.n,
            m: t.ansatz.param_count(),
            fraction: cell.fraction,
            n_o: report.n_o,
            n_p: report.n_p,
            n_n: report.n_n,
            n_a: report.n_a,
            ratio_p,
            ratio_n,
            ratio_a,
            expected_ratio_p: expected.p,
            expected_ratio_n: expected.n,
            expected_ratio_a: expected.a,
            distance: t.result.final_distance,
            bound: t.bound,
        });
        fits.push(t.record(i, cell.seed));
    }
    Ok(output(cfg, rows, timings, fits, serde_json::Value::Null))
}

/// `(N, ansatz)` pairs to analyse: either every N in range, or every
/// linear-to-quadratic step at the largest N.
fn analysis_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    let kinds: Vec<(usize, AnsatzKind)> = if cfg.param_sweep {
        let n = cfg.n.max;
        (0..=n * (n - 1) / 2)
            .map(|pairs| (n, AnsatzKind::PartialQuadratic { pairs }))
            .collect()
    } else {
        cfg.n
            .iter()
            .flat_map(|n| cfg.ansatz.iter().map(move |&k| (n, k)))
            .collect()
    };
    for (n, kind) in kinds {
        for &seed in &cfg.seeds {
            cells.push(Cell { n, kind, fraction: 0.0, seed });
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpRow {
    pub experiment: &'static str,
    pub cell: usize,
    pub seed: u64,
    pub ansatz: String,
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub mean_abs_gradient: f64,
    pub gradient_variance: f64,
    pub log2_variance: f64,
    /// Variance of the last gradient component, for comparison.
    pub last_param_variance: f64,
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Gradient statistics under random parameters.
pub fn run_bp_stats(cfg: &ExperimentConfig) -> Result<RunOutput<BpRow>> {
    let cells = analysis_cells(cfg);
    let (stats, timings) = run_cells(&cells, Cell::label, |c| {
        let ansatz = Ansatz::new(c.kind, c.n)?;
        let target = cfg.target.build(c.n, c.seed)?;
        let first = analysis::gradient_statistics(&ansatz, &target, cfg.samples, c.seed)?;
        let last = analysis::gradient_statistics_at(&ansatz, &target, cfg.samples, c.seed, ansatz.param_count() - 1)?;
        Ok((first, last.gradient_variance))
    })?;
    let rows: Vec<BpRow> = cells
        .iter()
        .zip(&stats)
        .enumerate()
        .map(|(i, (c, (s, last)))| BpRow {
            experiment: Experiment::BpStats.name(),
            cell: i,
            seed: c.seed,
            ansatz: c.kind.name(),
            n: c.n,
            m: s.params,
            samples: s.sample_count,
            mean_abs_gradient: s.mean_abs_gradient,
            gradient_variance: s.gradient_variance,
            log2_variance: s.gradient_variance.log2(),
            last_param_variance: *last,
        })
        .collect();

    let mut trends = Vec::new();
    for &seed in &cfg.seeds {
        if cfg.param_sweep {
            let vars: Vec<f64> = rows.iter().filter(|r| r.seed == seed).map(|r| r.gradient_variance).collect();
            let max = vars.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = vars.iter().cloned().fold(f64::INFINITY, f64::min);
            trends.push(serde_json::json!({ "seed": seed, "n": cfg.n.max, "max_min_ratio": max / min }));
        } else {
            for kind in &cfg.ansatz {
                let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                    .iter()
                    .filter(|r| r.seed == seed && r.ansatz == kind.name())
                    .map(|r| (r.n as f64, r.log2_variance))
                    .unzip();
                if xs.len() >= 2 {
                    trends.push(serde_json::json!({
                        "seed": seed,
                        "ansatz": kind.name(),
                        "log2_variance_slope": regression_slope(&xs, &ys),
                    }));
                }
            }
        }
    }
    Ok(output(cfg, rows, timings, Vec::new(), serde_json::json!({ "trends": trends })))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub experiment: &'static str,
    pub cell: usize,
    pub seed: u64,
    pub ansatz: String,
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub mean_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCurveFit {
    pub seed: u64,
    pub ansatz: String,
    pub fit: ExpFit,
}

/// Mean target-qubit entropy under random parameters, with a decay fit per
/// `(seed, ansatz)` curve of at least four points.
pub fn run_entropy(cfg: &ExperimentConfig) -> Result<RunOutput<EntropyRow>> {
    let cells = analysis_cells(cfg);
    let (stats, timings) = run_cells(&cells, Cell::label, |c| {
        analysis::mean_entropy(&Ansatz::new(c.kind, c.n)?, cfg.samples, c.seed)
    })?;
    let rows: Vec<EntropyRow> = cells
        .iter()
        .zip(&stats)
        .enumerate()
        .map(|(i, (c, s))| EntropyRow {
            experiment: Experiment::Entropy.name(),
            cell: i,
            seed: c.seed,
            ansatz: c.kind.name(),
            n: c.n,
            m: s.params,
            samples: s.sample_count,
            mean_entropy: s.mean_entropy,
        })
        .collect();
    let mut fits = Vec::new();
    if !cfg.param_sweep {
        for &seed in &cfg.seeds {
            for kind in &cfg.ansatz {
                let points: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.seed == seed && r.ansatz == kind.name())
                    .map(|r| (r.n as f64, r.mean_entropy))
                    .collect();
                if points.len() >= 4 {
                    fits.push(EntropyCurveFit {
                        seed,
                        ansatz: kind.name(),
                        fit: analysis::fit_entropy_curve(&points)?,
                    });
                }
            }
        }
    }
    Ok(output(cfg, rows, timings, Vec::new(), serde_json::json!({ "fits": fits })))
}
