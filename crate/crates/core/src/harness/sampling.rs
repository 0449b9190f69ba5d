use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::ansatz::ConditionalOutput;
use crate::error::{check_dim, QicError, Result};
use crate::rng::{stream_rng, Stream};
use crate::targets::TargetDistribution;

/// Counts of sampled `(b, a)` outcomes that follow the rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingReport {
    /// Outcomes drawn.
    pub n_o: usize,
    /// Correct outcomes whose input was seen during training.
    pub n_p: usize,
    /// Correct outcomes whose input was hidden.
    pub n_n: usize,
    pub n_a: usize,
}

impl SamplingReport {
    pub fn ratios(&self) -> [f64; 3] {
        let o = self.n_o as f64;
        [self.n_p as f64 / o, self.n_n as f64 / o, self.n_a as f64 / o]
    }
}

/// Exact probabilities of the three classes under the circuit's joint output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRatios {
    pub p: f64,
    pub n: f64,
    pub a: f64,
}

/// Whether output `a` on input `b` follows the rule: the reference puts mass
/// on it. A seen input with a rule-breaking output counts as incorrect.
fn follows_rule(rule: &TargetDistribution, b: usize, a: usize) -> Result<bool> {
    let cond = rule
        .conditional(b)
        .ok_or_else(|| QicError::Domain(format!("rule undefined on input {b}")))?;
    Ok(cond[a] > 0.0)
}

fn check(rule: &TargetDistribution, seen: &[bool], out: &ConditionalOutput) -> Result<()> {
    check_dim(rule.n_inputs(), out.n_inputs())?;
    check_dim(rule.input_count(), seen.len())
}

/// Draws `draws` outcomes from the joint output (uniform input, circuit
/// conditional) and classifies them against `rule`.
pub fn sample_report(
    rule: &TargetDistribution,
    seen: &[bool],
    out: &ConditionalOutput,
    draws: usize,
    seed: u64,
) -> Result<SamplingReport> {
    check(rule, seen, out)?;
    let joint = out.joint();
    let dist = WeightedIndex::new(&joint)
        .map_err(|e| QicError::Internal(format!("output distribution: {e}")))?;
    let mut rng = stream_rng(seed, Stream::Sampling, 0);
    let (mut n_p, mut n_n) = (0, 0);
    for _ in 0..draws {
        let idx = dist.sample(&mut rng);
        let (b, a) = (idx >> 1, idx & 1);
        if follows_rule(rule, b, a)? {
            if seen[b] {
                n_p += 1;
            } else {
                n_n += 1;
            }
        }
    }
    Ok(SamplingReport {
        n_o: draws,
        n_p,
        n_n,
        n_a: n_p + n_n,
    })
}

/// Exhaustive counterpart of [`sample_report`].
pub fn expected_ratios(
    rule: &TargetDistribution,
    seen: &[bool],
    out: &ConditionalOutput,
) -> Result<ExpectedRatios> {
    check(rule, seen, out)?;
    let joint = out.joint();
    let (mut p, mut n) = (0.0, 0.0);
    for (idx, mass) in joint.iter().enumerate() {
        let (b, a) = (idx >> 1, idx & 1);
        if follows_rule(rule, b, a)? {
            if seen[b] {
                p += mass;
            } else {
                n += mass;
            }
        }
    }
    Ok(ExpectedRatios { p, n, a: p + n })
}
