//! Parameter fitting: the state-distance objective, its analytic gradient,
//! multi-start quasi-Newton minimization and the exact exponential solve.

pub mod quasi_newton;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzKind, ParameterVector};
use crate::error::{check_dim, QicError, Result};
use crate::metrics::worst_case_bound;
use crate::rng::{stream_rng, Stream};
use crate::targets::TargetDistribution;
use quasi_newton::QuasiNewtonOptions;

/// Below this objective value the gradient is not defined and the fit is
/// treated as exact.
pub const OPTIMUM_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Zeros,
    /// Every angle uniform in `[0, 2π)`.
    #[default]
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    /// `None` means `500 · M`.
    pub max_iterations: Option<usize>,
    pub gradient_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init_scheme: InitScheme,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            max_iterations: None,
            gradient_tolerance: 1e-8,
            restarts: 10,
            seed: 0,
            init_scheme: InitScheme::UniformRandom,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == Some(0) {
            return Err(QicError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(QicError::Config("gradient_tolerance must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(QicError::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best_params: ParameterVector,
    pub final_distance: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub restart_index: usize,
}

impl OptimizeResult {
    /// Whether the distance respects the worst-case bound for this ansatz.
    pub fn within_bound(&self, ansatz: &Ansatz) -> bool {
        match worst_case_bound(ansatz.param_count(), ansatz.n_inputs()) {
            Ok(bound) => self.final_distance <= bound + 1e-9,
            Err(_) => false,
        }
    }
}

/// Result of [`gradient`].
#[derive(Debug, Clone, PartialEq)]
pub enum Gradient {
    Vector(Vec<f64>),
    /// The objective is below [`OPTIMUM_THRESHOLD`]; the fit is exact.
    AtOptimum,
}

/// Target amplitudes `√p(a|b)` over seen inputs, paired with an ansatz.
struct Evaluator<'a> {
    ansatz: &'a Ansatz,
    target: Vec<Option<[f64; 2]>>,
    gap_scale: f64,
}

#[derive(Debug, Clone)]
struct Evaluation {
    /// `1 − F`
    minus: f64,
    /// `1 + F`
    plus: f64,
    /// `∂F/∂α`
    d_overlap: Option<Vec<f64>>,
}

impl Evaluation {
    fn overlap_sign(&self) -> f64 {
        if self.minus <= self.plus {
            1.0
        } else {
            -1.0
        }
    }

    /// `1 − |F|`
    fn squared_distance(&self) -> f64 {
        self.minus.min(self.plus).max(0.0)
    }
}

impl<'a> Evaluator<'a> {
    fn new(ansatz: &'a Ansatz, target: &TargetDistribution) -> Result<Self> {
        check_dim(ansatz.n_inputs(), target.n_inputs())?;
        let amps = (0..target.input_count())
            .map(|b| target.conditional(b).map(|[p0, p1]| [p0.sqrt(), p1.sqrt()]))
            .collect();
        Ok(Self {
            ansatz,
            target: amps,
            gap_scale: 0.5 / target.seen_count() as f64,
        })
    }

    fn evaluate(&self, alpha: &[f64], with_gradient: bool) -> Evaluation {
        let masks = self.ansatz.masks();
        let m = masks.len();
        let mut signs = vec![false; m];
        let mut d_overlap = with_gradient.then(|| vec![0.0; m]);
        let (mut minus, mut plus) = (0.0, 0.0);
        for (b, target) in self.target.iter().enumerate() {
            let Some([u0, u1]) = *target else { continue };
            let bv = b as u32;
            let mut parity = false;
            let mut angle = 0.0;
            for k in 0..m {
                let mask = masks[k];
                parity ^= mask != 0 && bv & mask == mask;
                signs[k] = parity;
                angle += if parity { -alpha[k] } else { alpha[k] };
            }
            let (s, c) = angle.sin_cos();
            let (v0, v1, dv0, dv1) = if parity { (s, c, c, -s) } else { (c, s, -s, c) };
            minus += (u0 - v0).powi(2) + (u1 - v1).powi(2);
            plus += (u0 + v0).powi(2) + (u1 + v1).powi(2);
            if let Some(grad) = d_overlap.as_mut() {
                let d_block = u0 * dv0 + u1 * dv1;
                for (g, &neg) in grad.iter_mut().zip(&signs) {
                    *g += if neg { -d_block } else { d_block };
                }
            }
        }
        if let Some(grad) = d_overlap.as_mut() {
            // F = (1/K) Σ u·v, so ∂F = 2 · gap_scale · Σ u·∂v
            grad.iter_mut().for_each(|g| *g *= 2.0 * self.gap_scale);
        }
        Evaluation {
            minus: minus * self.gap_scale,
            plus: plus * self.gap_scale,
            d_overlap,
        }
    }

    /// `1 − |F|` and its gradient `−sign(F) ∂F`: the smooth surrogate that
    /// shares its minimizers with the distance.
    fn squared_with_gradient(&self, alpha: &[f64]) -> (f64, Vec<f64>) {
        let e = self.evaluate(alpha, true);
        let sign = e.overlap_sign();
        let grad = e.d_overlap.as_ref().expect("requested").iter().map(|g| -sign * g).collect();
        (e.squared_distance(), grad)
    }
}

/// `√(1 − |F|)` for the circuit at `params` against `target`, with the
/// overlap `F` averaged over seen inputs only.
pub fn objective(ansatz: &Ansatz, params: &ParameterVector, target: &TargetDistribution) -> Result<f64> {
    check_dim(ansatz.param_count(), params.len())?;
    let e = Evaluator::new(ansatz, target)?.evaluate(params.as_slice(), false);
    Ok(e.squared_distance().sqrt())
}

/// Analytic gradient of [`objective`].
pub fn gradient(ansatz: &Ansatz, params: &ParameterVector, target: &TargetDistribution) -> Result<Gradient> {
    check_dim(ansatz.param_count(), params.len())?;
    let e = Evaluator::new(ansatz, target)?.evaluate(params.as_slice(), true);
    let c = e.squared_distance().sqrt();
    if c < OPTIMUM_THRESHOLD {
        return Ok(Gradient::AtOptimum);
    }
    let sign = e.overlap_sign();
    Ok(Gradient::Vector(
        e.d_overlap
            .expect("requested")
            .into_iter()
            .map(|g| -sign * g / (2.0 * c))
            .collect(),
    ))
}

fn initial_point(ansatz: &Ansatz, config: &OptimizeConfig, restart: usize) -> Vec<f64> {
    match config.init_scheme {
        InitScheme::Zeros => vec![0.0; ansatz.param_count()],
        InitScheme::UniformRandom => {
            let mut rng = stream_rng(config.seed, Stream::Init, restart as u32);
            (0..ansatz.param_count()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect()
        }
    }
}

/// Multi-start quasi-Newton minimization of [`objective`].
///
/// Restarts run in parallel; the lowest distance wins, ties going to the
/// lowest restart index.
pub fn minimize(ansatz: &Ansatz, target: &TargetDistribution, config: &OptimizeConfig) -> Result<OptimizeResult> {
    config.validate()?;
    let eval = Evaluator::new(ansatz, target)?;
    let opts = QuasiNewtonOptions {
        max_iterations: config.max_iterations.unwrap_or(500 * ansatz.param_count()),
        gradient_tolerance: config.gradient_tolerance,
        value_floor: OPTIMUM_THRESHOLD * OPTIMUM_THRESHOLD,
    };
    let runs: Vec<OptimizeResult> = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            let x0 = initial_point(ansatz, config, restart);
            let out = quasi_newton::minimize(|x| eval.squared_with_gradient(x), &x0, &opts);
            OptimizeResult {
                final_distance: out.value.max(0.0).sqrt(),
                best_params: out.x.into(),
                iterations_used: out.iterations,
                converged: out.converged,
                restart_index: restart,
            }
        })
        .collect();
    runs.into_iter()
        .reduce(|best, r| if r.final_distance < best.final_distance { r } else { best })
        .ok_or_else(|| QicError::Internal("no restarts ran".into()))
}

/// Angle each input's block must reach, given whether it carries a flip.
/// Unseen inputs are aimed at `π/4`, the even split.
fn required_block_angles(target: &TargetDistribution, flips: &[bool]) -> Vec<f64> {
    target
        .target_angles()
        .into_iter()
        .zip(flips)
        .map(|(theta, &flip)| {
            let theta = theta.unwrap_or(FRAC_PI_4);
            // X R_y(φ)|0⟩ = (sin φ, cos φ), so φ = π/2 − θ̄ under a flip
            if flip {
                FRAC_PI_2 - theta
            } else {
                theta
            }
        })
        .collect()
}

/// Exact parameters for the exponential circuit: solves the `2^N × 2^N`
/// sign system so every block hits its target angle.
pub fn solve_exponential(target: &TargetDistribution, n_inputs: usize) -> Result<ParameterVector> {
    check_dim(n_inputs, target.n_inputs())?;
    let ansatz = Ansatz::new(AnsatzKind::Exponential, n_inputs)?;
    let flips: Vec<bool> = ansatz
        .blocks(&ParameterVector::zeros(ansatz.param_count()))?
        .iter()
        .map(|r| r.flip)
        .collect();
    let rhs = DVector::from_vec(required_block_angles(target, &flips));
    let rows = ansatz.sign_matrix();
    let dim = rows.len();
    let system = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| QicError::Internal(format!("exponential sign system singular at N={n_inputs}")))?;
    Ok(solution.iter().copied().collect::<Vec<_>>().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::BlockRotation;
    use crate::metrics::state_distance;

    fn random_params(ansatz: &Ansatz, seed: u64) -> ParameterVector {
        let mut rng = stream_rng(seed, Stream::MonteCarlo, 9);
        (0..ansatz.param_count())
            .map(|_| rng.gen_range(0.0..2.0 * PI))
            .collect::<Vec<_>>()
            .into()
    }

    /// Central differences of the objective, step `h`.
    fn finite_difference(ansatz: &Ansatz, p: &ParameterVector, t: &TargetDistribution, h: f64) -> Vec<f64> {
        (0..p.len())
            .map(|k| {
                let mut up = p.clone();
                let mut down = p.clone();
                up.0[k] += h;
                down.0[k] -= h;
                (objective(ansatz, &up, t).unwrap() - objective(ansatz, &down, t).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn objective_matches_state_distance() {
        let a = Ansatz::new(AnsatzKind::Quadratic, 4).unwrap();
        let t = TargetDistribution::random(4, 1).unwrap().mask_fraction(0.3, 2).unwrap();
        let p = random_params(&a, 3);
        let direct = state_distance(&t, &a.conditional_output(&p).unwrap()).unwrap();
        assert!((objective(&a, &p, &t).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn objective_by_hand_for_majority_at_zero() {
        // N=2 linear at α=0: blocks are |0⟩ for even parity, |1⟩ for odd
        let a = Ansatz::new(AnsatzKind::Linear, 2).unwrap();
        let t = TargetDistribution::majority(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // b=00 → target (1,0), out (1,0): 1; b=01 → target (h,h), out (0,1): h;
        // b=10 → same as 01: h; b=11 → target (0,1), out (1,0): 0
        let f = (1.0 + h + h + 0.0) / 4.0;
        let expect = (1.0 - f).sqrt();
        let got = objective(&a, &ParameterVector::zeros(3), &t).unwrap();
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn objective_is_two_pi_periodic() {
        let a = Ansatz::new(AnsatzKind::Quadratic, 3).unwrap();
        let t = TargetDistribution::gaussian(3, &Default::default()).unwrap();
        let p = random_params(&a, 5);
        let base = objective(&a, &p, &t).unwrap();
        for k in 0..p.len() {
            let mut q = p.clone();
            q.0[k] += 2.0 * PI;
            assert!((objective(&a, &q, &t).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for kind in [AnsatzKind::Linear, AnsatzKind::Quadratic, AnsatzKind::Exponential] {
            for n in 1..=5 {
                let a = Ansatz::new(kind, n).unwrap();
                let t = TargetDistribution::random(n, 40 + n as u64).unwrap();
                for seed in 0..3 {
                    let p = random_params(&a, seed);
                    let Gradient::Vector(g) = gradient(&a, &p, &t).unwrap() else { panic!("optimum") };
                    let fd = finite_difference(&a, &p, &t, 1e-6);
                    for (x, y) in g.iter().zip(&fd) {
                        assert!((x - y).abs() < 1e-6, "{kind} N={n}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_mirrors_about_single_input_optimum() {
        // one input bit, two blocks; swapping which block carries the mismatch
        // mirrors the α_1 derivative and leaves the α_0 derivative intact
        let a = Ansatz::new(AnsatzKind::Linear, 1).unwrap();
        let rows_a = [[1.0, 0.0], [0.5, 0.5]];
        let ta = TargetDistribution::from_conditionals(1, &rows_a, vec![true, true]).unwrap();
        // block 0 is R_y(α0+α1) → (cos, sin); block 1 is X R_y(α0−α1) → (sin, cos)
        // choose α so block 0 sits at 0 and block 1 shows (h, h)
        let p = ParameterVector(vec![FRAC_PI_4 / 2.0, -FRAC_PI_4 / 2.0]);
        let out = a.blocks(&p).unwrap();
        assert_eq!(out[0], BlockRotation { flip: false, angle: 0.0 });
        let Gradient::AtOptimum = gradient(&a, &p, &ta).unwrap() else {
            panic!("exact fit expected")
        };
        // perturb α1 to leave the optimum; mirrored target swaps the α1 sign
        let p2 = ParameterVector(vec![FRAC_PI_4 / 2.0, -FRAC_PI_4 / 2.0 + 0.3]);
        let p2m = ParameterVector(vec![FRAC_PI_4 / 2.0, -FRAC_PI_4 / 2.0 - 0.3]);
        let Gradient::Vector(g) = gradient(&a, &p2, &ta).unwrap() else { panic!() };
        let Gradient::Vector(gm) = gradient(&a, &p2m, &ta).unwrap() else { panic!() };
        assert!((g[1] + gm[1]).abs() < 1e-12, "{g:?} {gm:?}");
        assert!((g[0] - gm[0]).abs() < 1e-12, "{g:?} {gm:?}");
    }

    #[test]
    fn exponential_solve_small_cases() {
        // N=1 closed form
        let rows = [[0.8, 0.2], [0.35, 0.65]];
        let t = TargetDistribution::from_conditionals(1, &rows, vec![true, true]).unwrap();
        let p = solve_exponential(&t, 1).unwrap();
        let th = t.target_angles();
        let th0 = th[0].unwrap();
        let th1 = FRAC_PI_2 - th[1].unwrap();
        assert!((p.0[0] - (th0 + th1) / 2.0).abs() < 1e-14);
        assert!((p.0[1] - (th0 - th1) / 2.0).abs() < 1e-14);

        for n in 1..=6 {
            let a = Ansatz::new(AnsatzKind::Exponential, n).unwrap();
            let t = TargetDistribution::random(n, 100 + n as u64).unwrap();
            let p = solve_exponential(&t, n).unwrap();
            assert!(objective(&a, &p, &t).unwrap() < 1e-10, "N={n}");
            assert_eq!(gradient(&a, &p, &t).unwrap(), Gradient::AtOptimum);
        }
    }

    #[test]
    fn exponential_solve_round_trip() {
        let n = 3;
        let a = Ansatz::new(AnsatzKind::Exponential, n).unwrap();
        let star = random_params(&a, 77);
        let out = a.conditional_output(&star).unwrap();
        let rows: Vec<[f64; 2]> = (0..8).map(|b| out.conditional(b)).collect();
        let t = TargetDistribution::from_conditionals(n, &rows, vec![true; 8]).unwrap();
        let p = solve_exponential(&t, n).unwrap();
        let recovered = a.conditional_output(&p).unwrap();
        for b in 0..8 {
            let (x, y) = (recovered.conditional(b), out.conditional(b));
            assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
        }
        // block angles, flip-adjusted, land on the target angles mod 2π
        let th = t.target_angles();
        for (b, r) in a.blocks(&p).unwrap().iter().enumerate() {
            let aimed = if r.flip { FRAC_PI_2 - r.angle } else { r.angle };
            let diff = (aimed - th[b].unwrap()).rem_euclid(2.0 * PI);
            assert!(diff < 1e-10 || 2.0 * PI - diff < 1e-10);
        }
    }

    #[test]
    fn minimize_is_deterministic_and_bounded() {
        let a = Ansatz::new(AnsatzKind::Linear, 3).unwrap();
        let t = TargetDistribution::gaussian(3, &Default::default()).unwrap();
        let cfg = OptimizeConfig { restarts: 4, seed: 11, ..Default::default() };
        let r1 = minimize(&a, &t, &cfg).unwrap();
        let r2 = minimize(&a, &t, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.within_bound(&a));
        assert!(r1.final_distance < worst_case_bound(4, 3).unwrap());
        let check = objective(&a, &r1.best_params, &t).unwrap();
        assert!((check - r1.final_distance).abs() < 1e-12);
    }

    #[test]
    fn minimize_reaches_exact_fit_with_exponential() {
        let a = Ansatz::new(AnsatzKind::Exponential, 2).unwrap();
        let t = TargetDistribution::random(2, 3).unwrap();
        let r = minimize(&a, &t, &OptimizeConfig { restarts: 3, ..Default::default() }).unwrap();
        assert!(r.final_distance < 1e-6, "{r:?}");
    }

    #[test]
    fn majority_prefers_quadratic() {
        let t = TargetDistribution::majority(3).unwrap();
        let cfg = OptimizeConfig::default();
        let lin = minimize(&Ansatz::new(AnsatzKind::Linear, 3).unwrap(), &t, &cfg).unwrap();
        let qua = minimize(&Ansatz::new(AnsatzKind::Quadratic, 3).unwrap(), &t, &cfg).unwrap();
        assert!(qua.final_distance < lin.final_distance);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizeConfig { restarts: 0, ..Default::default() }.validate().is_err());
        assert!(OptimizeConfig { gradient_tolerance: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizeConfig { max_iterations: Some(0), ..Default::default() }.validate().is_err());
    }
}
