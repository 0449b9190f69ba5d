//! Gate-by-gate reference simulation of the imputation circuit.
//!
//! Shares nothing with the closed-form path except the parameter layout: the
//! register is a plain `2^{N+1}` real amplitude vector and each gate is applied
//! as a linear map on it. Qubit 0 is the target; input `b_i` lives on qubit
//! `N + 1 - i`, so a basis index reads `(b << 1) | a`.

use std::f64::consts::FRAC_1_SQRT_2;

use super::{Ansatz, ParameterVector};
use crate::error::{check_dim, QicError, Result};

pub const ORACLE_MAX_INPUTS: usize = 10;

#[derive(Debug, Clone)]
enum Gate {
    /// Real single-qubit gate `[[m00, m01], [m10, m11]]` on `qubit`.
    Single { qubit: usize, m: [[f64; 2]; 2] },
    /// NOT on `target` when every control qubit is `|1⟩`.
    ControlledNot { controls: Vec<usize>, target: usize },
}

impl Gate {
    fn hadamard(qubit: usize) -> Self {
        let h = FRAC_1_SQRT_2;
        Gate::Single {
            qubit,
            m: [[h, h], [h, -h]],
        }
    }

    fn ry(qubit: usize, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Gate::Single {
            qubit,
            m: [[c, -s], [s, c]],
        }
    }

    fn apply(&self, state: &mut [f64]) {
        match self {
            Gate::Single { qubit, m } => {
                let bit = 1usize << qubit;
                for i in 0..state.len() {
                    if i & bit == 0 {
                        let (x0, x1) = (state[i], state[i | bit]);
                        state[i] = m[0][0] * x0 + m[0][1] * x1;
                        state[i | bit] = m[1][0] * x0 + m[1][1] * x1;
                    }
                }
            }
            Gate::ControlledNot { controls, target } => {
                let cmask = controls.iter().fold(0usize, |acc, q| acc | (1 << q));
                let tbit = 1usize << target;
                for i in 0..state.len() {
                    if i & tbit == 0 && i & cmask == cmask {
                        state.swap(i, i | tbit);
                    }
                }
            }
        }
    }
}

/// Amplitudes obtained by applying Hadamards to the inputs, then
/// `R_y(α_0)`, then each controlled NOT followed by its rotation, in slot order.
pub fn gate_level_oracle(ansatz: &Ansatz, params: &ParameterVector) -> Result<Vec<f64>> {
    let n = ansatz.n_inputs();
    if n > ORACLE_MAX_INPUTS {
        return Err(QicError::Resource(format!(
            "gate-level oracle limited to N <= {ORACLE_MAX_INPUTS}, got {n}"
        )));
    }
    check_dim(ansatz.param_count(), params.len())?;

    let input_qubit = |i: usize| n + 1 - i;
    let mut circuit: Vec<Gate> = (1..=n).map(|i| Gate::hadamard(input_qubit(i))).collect();
    for (slot, &alpha) in ansatz.index_map().iter().zip(params.as_slice()) {
        let controls = slot.controls();
        if !controls.is_empty() {
            circuit.push(Gate::ControlledNot {
                controls: controls.into_iter().map(input_qubit).collect(),
                target: 0,
            });
        }
        circuit.push(Gate::ry(0, alpha));
    }

    let mut state = vec![0.0; 1usize << (n + 1)];
    state[0] = 1.0;
    for gate in &circuit {
        gate.apply(&mut state);
    }
    Ok(state)
}
