//! Hellinger distances between target and circuit-output distributions.

use serde::{Deserialize, Serialize};

use crate::ansatz::ConditionalOutput;
use crate::error::{check_dim, QicError, Result};
use crate::targets::TargetDistribution;

/// Inputs larger than this away from unit mass are rejected; smaller drifts
/// are renormalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Full,
    Seen,
    Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub hellinger: f64,
    pub bhattacharyya: f64,
    pub support: Support,
}

fn checked_mass(p: &[f64]) -> Result<f64> {
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(QicError::Domain("distribution has negative or non-finite entries".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(QicError::Domain(format!("distribution sums to {total}, not 1")));
    }
    Ok(total)
}

/// `√(1 − Σ √(p_x q_x))` over two distributions on the same outcomes.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<DistanceReport> {
    hellinger_on(p, q, Support::Full)
}

fn hellinger_on(p: &[f64], q: &[f64], support: Support) -> Result<DistanceReport> {
    check_dim(p.len(), q.len())?;
    let (sp, sq) = (checked_mass(p)?, checked_mass(q)?);
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum::<f64>() / (sp * sq).sqrt();
    let bc = bc.clamp(0.0, 1.0);
    Ok(DistanceReport {
        hellinger: (1.0 - bc).sqrt(),
        bhattacharyya: bc,
        support,
    })
}

/// Signed state overlap between the target amplitudes `√p(a|b)` and the
/// circuit amplitudes, averaged over seen inputs.
pub fn state_overlap(target: &TargetDistribution, out: &ConditionalOutput) -> Result<f64> {
    check_dim(target.n_inputs(), out.n_inputs())?;
    let mut sum = 0.0;
    for (b, [a0, a1]) in out.amps().iter().enumerate() {
        if let Some([p0, p1]) = target.conditional(b) {
            sum += p0.sqrt() * a0 + p1.sqrt() * a1;
        }
    }
    Ok(sum / target.seen_count() as f64)
}

/// `(1 − F, 1 + F)` for the seen-set overlap `F`, each computed as a mean
/// squared amplitude difference so neither loses precision near zero.
pub fn overlap_gaps(target: &TargetDistribution, out: &ConditionalOutput) -> Result<(f64, f64)> {
    check_dim(target.n_inputs(), out.n_inputs())?;
    let (mut minus, mut plus) = (0.0, 0.0);
    for (b, [a0, a1]) in out.amps().iter().enumerate() {
        if let Some([p0, p1]) = target.conditional(b) {
            let (u0, u1) = (p0.sqrt(), p1.sqrt());
            minus += (u0 - a0).powi(2) + (u1 - a1).powi(2);
            plus += (u0 + a0).powi(2) + (u1 + a1).powi(2);
        }
    }
    let scale = 0.5 / target.seen_count() as f64;
    Ok((minus * scale, plus * scale))
}

/// `√(1 − |⟨φ_T|ψ⟩|)` with the overlap restricted to (and renormalized over)
/// the seen inputs.
pub fn state_distance(target: &TargetDistribution, out: &ConditionalOutput) -> Result<f64> {
    let (minus, plus) = overlap_gaps(target, out)?;
    Ok(minus.min(plus).max(0.0).sqrt())
}

/// Largest optimal distance an `M`-parameter circuit can leave on `N` inputs.
pub fn worst_case_bound(params: usize, n_inputs: usize) -> Result<f64> {
    let inputs = 1usize
        .checked_shl(n_inputs as u32)
        .ok_or_else(|| QicError::Domain(format!("N={n_inputs} too large")))?;
    if params > inputs {
        return Err(QicError::Domain(format!(
            "{params} parameters exceed the {inputs} blocks of N={n_inputs}"
        )));
    }
    Ok((1.0 - params as f64 / inputs as f64).max(0.0).sqrt())
}

/// Hellinger distance between target and circuit output restricted to the
/// inputs selected by `split` (`Seen`: `split[b]` true; `Unseen`: false;
/// `Full`: all), each side renormalized to unit mass on that slice.
///
/// `reference` supplies `p(a|b)` and must have mass on every selected input.
pub fn restricted_distance(
    reference: &TargetDistribution,
    split: &[bool],
    out: &ConditionalOutput,
    support: Support,
) -> Result<DistanceReport> {
    check_dim(reference.n_inputs(), out.n_inputs())?;
    check_dim(reference.input_count(), split.len())?;
    let selected: Vec<usize> = (0..split.len())
        .filter(|&b| match support {
            Support::Full => true,
            Support::Seen => split[b],
            Support::Unseen => !split[b],
        })
        .collect();
    if selected.is_empty() {
        return Err(QicError::Domain(format!("{support:?} support is empty")));
    }
    let scale = 1.0 / selected.len() as f64;
    let mut p = Vec::with_capacity(2 * selected.len());
    let mut q = Vec::with_capacity(2 * selected.len());
    for &b in &selected {
        let cond = reference.conditional(b).ok_or_else(|| {
            QicError::Domain(format!("reference target has no mass on input {b}"))
        })?;
        let [o0, o1] = out.conditional(b);
        let o_total = o0 + o1;
        p.extend([cond[0] * scale, cond[1] * scale]);
        q.extend([o0 / o_total * scale, o1 / o_total * scale]);
    }
    hellinger_on(&p, &q, support)
}

/// Full-support distance between a target's joint and the circuit's joint.
pub fn joint_distance(target: &TargetDistribution, out: &ConditionalOutput) -> Result<DistanceReport> {
    hellinger(target.probs(), &out.joint())
}
