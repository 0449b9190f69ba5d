//! Landscape statistics: gradient magnitude and variance under random
//! parameters, and the entanglement entropy of the target qubit.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzKind, ParameterVector};
use crate::error::{QicError, Result};
use crate::optimizer::quasi_newton::{self, QuasiNewtonOptions};
use crate::optimizer::{gradient, Gradient};
use crate::rng::{stream_rng, Stream};
use crate::targets::TargetDistribution;

pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientStats {
    pub n_inputs: usize,
    pub params: usize,
    pub sample_count: usize,
    pub mean_abs_gradient: f64,
    pub gradient_variance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyStats {
    pub n_inputs: usize,
    pub params: usize,
    pub sample_count: usize,
    pub mean_entropy: f64,
    pub seed: u64,
}

/// Least-squares fit of `S̄(N) ≈ 1 − a^{−b (N − c)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    /// `b · ln a`, the decay rate per input qubit.
    pub rate: f64,
    pub converged: bool,
    /// No decay to fit, or a fit outside `a > 1, b > 0`.
    pub degenerate: bool,
}

fn check_samples(sample_count: usize) -> Result<()> {
    if sample_count < MIN_SAMPLES {
        return Err(QicError::Domain(format!(
            "at least {MIN_SAMPLES} samples are required, got {sample_count}"
        )));
    }
    Ok(())
}

fn random_params(ansatz: &Ansatz, seed: u64, draw: usize) -> ParameterVector {
    let mut rng = stream_rng(seed, Stream::MonteCarlo, draw as u32);
    (0..ansatz.param_count())
        .map(|_| rng.gen_range(0.0..2.0 * PI))
        .collect::<Vec<_>>()
        .into()
}

/// Mean of `|∂C/∂α_0|` and variance of `∂C/∂α_0` over uniform random parameters.
pub fn gradient_statistics(
    ansatz: &Ansatz,
    target: &TargetDistribution,
    sample_count: usize,
    seed: u64,
) -> Result<GradientStats> {
    gradient_statistics_at(ansatz, target, sample_count, seed, 0)
}

/// As [`gradient_statistics`], for the component `index` of the gradient.
pub fn gradient_statistics_at(
    ansatz: &Ansatz,
    target: &TargetDistribution,
    sample_count: usize,
    seed: u64,
    index: usize,
) -> Result<GradientStats> {
    check_samples(sample_count)?;
    if index >= ansatz.param_count() {
        return Err(QicError::Index(format!(
            "parameter {index} out of range for {} parameters",
            ansatz.param_count()
        )));
    }
    let samples: Vec<f64> = (0..sample_count)
        .into_par_iter()
        .map(|draw| {
            let p = random_params(ansatz, seed, draw);
            Ok(match gradient(ansatz, &p, target)? {
                Gradient::Vector(g) => g[index],
                Gradient::AtOptimum => 0.0,
            })
        })
        .collect::<Result<_>>()?;
    let (mean_abs, variance) = moments(&samples);
    Ok(GradientStats {
        n_inputs: ansatz.n_inputs(),
        params: ansatz.param_count(),
        sample_count,
        mean_abs_gradient: mean_abs,
        gradient_variance: variance,
        seed,
    })
}

/// `(mean |x|, unbiased variance of x)`.
pub(crate) fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean_abs, var)
}

/// One [`GradientStats`] per circuit from linear (`M = N + 1`) to full
/// quadratic, adding pair-controlled gates in lexicographic order.
pub fn gradient_statistics_vs_params(
    n_inputs: usize,
    target: &TargetDistribution,
    sample_count: usize,
    seed: u64,
) -> Result<Vec<GradientStats>> {
    let pairs = n_inputs * n_inputs.saturating_sub(1) / 2;
    (0..=pairs)
        .map(|k| {
            let ansatz = Ansatz::new(AnsatzKind::PartialQuadratic { pairs: k }, n_inputs)?;
            gradient_statistics(&ansatz, target, sample_count, seed)
        })
        .collect()
}

/// Reduced state of the target qubit with the inputs traced out, under a
/// uniform input register: `(1/2^N) Σ_b v_b v_bᵀ`.
pub fn target_density(ansatz: &Ansatz, params: &ParameterVector) -> Result<[[f64; 2]; 2]> {
    let out = ansatz.conditional_output(params)?;
    let scale = 1.0 / out.amps().len() as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for [x, y] in out.amps() {
        a += x * x;
        b += y * y;
        c += x * y;
    }
    Ok([[a * scale, c * scale], [c * scale, b * scale]])
}

/// Base-2 von Neumann entropy of a real symmetric 2×2 density matrix.
pub fn entropy_bits(rho: &[[f64; 2]; 2]) -> f64 {
    let tr = rho[0][0] + rho[1][1];
    let diff = rho[0][0] - rho[1][1];
    let disc = (diff * diff + 4.0 * rho[0][1] * rho[0][1]).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Entanglement entropy between the target qubit and the input register.
pub fn target_entropy(ansatz: &Ansatz, params: &ParameterVector) -> Result<f64> {
    Ok(entropy_bits(&target_density(ansatz, params)?))
}

/// Monte-Carlo mean of [`target_entropy`] over uniform random parameters.
pub fn mean_entropy(ansatz: &Ansatz, sample_count: usize, seed: u64) -> Result<EntropyStats> {
    check_samples(sample_count)?;
    let values: Vec<f64> = (0..sample_count)
        .into_par_iter()
        .map(|draw| target_entropy(ansatz, &random_params(ansatz, seed, draw)))
        .collect::<Result<_>>()?;
    Ok(EntropyStats {
        n_inputs: ansatz.n_inputs(),
        params: ansatz.param_count(),
        sample_count,
        mean_entropy: values.iter().sum::<f64>() / sample_count as f64,
        seed,
    })
}

/// Start point for [`fit_entropy_curve`]. The model depends on `a` and `b`
/// only through `b · ln a`, so the start also picks which `(a, b)` pair on
/// the optimal curve is reported.
pub const FIT_START: [f64; 3] = [1.2, 3.2, 0.8];

fn decay_model(x: f64, p: &[f64]) -> f64 {
    1.0 - p[0].powf(-p[1] * (x - p[2]))
}

/// Fits `1 − a^{−b (N − c)}` to `(N, S̄)` points, starting from [`FIT_START`].
pub fn fit_entropy_curve(points: &[(f64, f64)]) -> Result<ExpFit> {
    fit_entropy_curve_from(points, FIT_START)
}

pub fn fit_entropy_curve_from(points: &[(f64, f64)], start: [f64; 3]) -> Result<ExpFit> {
    if points.len() < 4 {
        return Err(QicError::Domain(format!(
            "need at least 4 points to fit, got {}",
            points.len()
        )));
    }
    let sse = |p: &[f64]| -> (f64, Vec<f64>) {
        let (a, b, c) = (p[0], p[1], p[2]);
        if !(a > 0.0) {
            return (f64::INFINITY, vec![0.0; 3]);
        }
        let ln_a = a.ln();
        let mut value = 0.0;
        let mut grad = vec![0.0; 3];
        for &(x, y) in points {
            let decay = a.powf(-b * (x - c));
            let r = 1.0 - decay - y;
            value += r * r;
            // ∂model/∂a = b (x − c) decay / a, ∂/∂b = (x − c) ln a · decay,
            // ∂/∂c = −b ln a · decay
            grad[0] += 2.0 * r * b * (x - c) * decay / a;
            grad[1] += 2.0 * r * (x - c) * ln_a * decay;
            grad[2] += -2.0 * r * b * ln_a * decay;
        }
        (value, grad)
    };
    let out = quasi_newton::minimize(
        sse,
        &start,
        &QuasiNewtonOptions {
            max_iterations: 10_000,
            gradient_tolerance: 1e-12,
            value_floor: 0.0,
        },
    );
    let (a, b, c) = (out.x[0], out.x[1], out.x[2]);
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let spread = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let degenerate = spread < 1e-9 || !(a > 1.0 && b > 0.0) || !out.value.is_finite();
    Ok(ExpFit {
        a,
        b,
        c,
        residual: out.value,
        rate: b * a.ln(),
        converged: out.converged,
        degenerate,
    })
}

/// Evaluates a fitted curve at `n`.
pub fn fitted_entropy(fit: &ExpFit, n: f64) -> f64 {
    decay_model(n, &[fit.a, fit.b, fit.c])
}
