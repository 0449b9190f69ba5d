//! Dense BFGS with a backtracking Armijo line search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiNewtonOptions {
    pub max_iterations: usize,
    /// Stop once the gradient's Euclidean norm drops below this.
    pub gradient_tolerance: f64,
    /// Stop once the objective drops to or below this.
    pub value_floor: f64,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            gradient_tolerance: 1e-8,
            value_floor: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiNewtonOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Consecutive accepted steps that leave the value unchanged to machine
/// precision before giving up.
const STALL_LIMIT: usize = 20;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &QuasiNewtonOptions) -> QuasiNewtonOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut value, mut grad) = f(&x);
    // inverse Hessian approximation, row-major
    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut stalled = 0;

    loop {
        let gnorm = norm(&grad);
        if gnorm < opts.gradient_tolerance || value <= opts.value_floor {
            return QuasiNewtonOutcome { x, value, gradient_norm: gnorm, iterations, converged: true };
        }
        if iterations >= opts.max_iterations {
            return QuasiNewtonOutcome { x, value, gradient_norm: gnorm, iterations, converged: false };
        }
        iterations += 1;

        let mut dir = mat_vec(&h, &grad, n);
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            h = identity(n);
            fresh = true;
            dir = grad.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (tv, tg) = f(&trial);
            if tv.is_finite() && tv <= value + ARMIJO * step * slope {
                accepted = Some((trial, tv, tg));
                break;
            }
            step *= BACKTRACK;
        }

        let Some((next_x, next_value, next_grad)) = accepted else {
            if fresh {
                // steepest descent made no progress either
                return QuasiNewtonOutcome { x, value, gradient_norm: gnorm, iterations, converged: false };
            }
            h = identity(n);
            fresh = true;
            continue;
        };
        assert!(next_value <= value, "line search accepted an ascent step");
        if value - next_value <= f64::EPSILON * value.abs() {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                let gradient_norm = norm(&next_grad);
                return QuasiNewtonOutcome {
                    x: next_x,
                    value: next_value,
                    gradient_norm,
                    iterations,
                    converged: gradient_norm < opts.gradient_tolerance,
                };
            }
        } else {
            stalled = 0;
        }

        let s: Vec<f64> = next_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) && sy > 0.0 {
            if fresh {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h, &s, &y, sy, n);
            fresh = false;
        }
        x = next_x;
        value = next_value;
        grad = next_grad;
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1 / sᵀy`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
