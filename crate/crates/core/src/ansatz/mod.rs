//! Circuit families and their closed-form block-diagonal action.
//!
//! Every imputation circuit applies `R_y(α_0)` to the target qubit, then a
//! sequence of controlled NOTs onto the target, each followed by its own
//! `R_y(α_k)`. Commuting the rotations to the front gives, for every input
//! bitstring `b`, a 2×2 block `X^flip · R_y(θ_b)` where `θ_b` is a signed sum of
//! the parameters and the signs are parities of the controlled gates that fire
//! before each rotation.

pub mod oracle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitphase::{self, Bitstring};
use crate::error::{check_dim, QicError, Result};

pub use oracle::{gate_level_oracle, ORACLE_MAX_INPUTS};

/// Largest input register for the analytical statevector.
pub const STATEVECTOR_MAX_INPUTS: usize = 20;

/// Largest input register for the exponential family (`2^N` parameters and an
/// `O(4^N)` angle map).
pub const EXPONENTIAL_MAX_INPUTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    Linear,
    Quadratic,
    Exponential,
    /// Linear circuit plus the first `pairs` pair-controlled gates in
    /// lexicographic order; interpolates between linear and quadratic.
    PartialQuadratic { pairs: usize },
}

impl AnsatzKind {
    pub fn name(&self) -> String {
        match self {
            AnsatzKind::Linear => "linear".into(),
            AnsatzKind::Quadratic => "quadratic".into(),
            AnsatzKind::Exponential => "exponential".into(),
            AnsatzKind::PartialQuadratic { pairs } => format!("linear+{pairs}"),
        }
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for AnsatzKind {
    type Err = QicError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(AnsatzKind::Linear),
            "quadratic" | "qua" => Ok(AnsatzKind::Quadratic),
            "exponential" | "exp" => Ok(AnsatzKind::Exponential),
            other => Err(QicError::Config(format!("unknown ansatz kind {other:?}"))),
        }
    }
}

/// Number of rotation parameters of a circuit family on `n_inputs` input qubits.
pub fn param_count(kind: AnsatzKind, n_inputs: usize) -> Result<usize> {
    if n_inputs < 1 {
        return Err(QicError::Domain("at least one input qubit is required".into()));
    }
    let n = n_inputs;
    Ok(match kind {
        AnsatzKind::Linear => n + 1,
        AnsatzKind::Quadratic => (n * n + n + 2) / 2,
        AnsatzKind::Exponential => {
            if n >= usize::BITS as usize {
                return Err(QicError::Resource(format!("2^{n} parameters")));
            }
            1usize << n
        }
        AnsatzKind::PartialQuadratic { pairs } => {
            let max_pairs = n * (n - 1) / 2;
            if pairs > max_pairs {
                return Err(QicError::Domain(format!(
                    "{pairs} pair gates requested, only {max_pairs} exist for N={n}"
                )));
            }
            n + 1 + pairs
        }
    })
}

/// The gate that a parameter slot follows. Control indices are 1-based input
/// positions (`1` is the most significant input bit).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    /// The leading rotation, preceded by no gate.
    Initial,
    Single(usize),
    Pair(usize, usize),
    /// Three or more controls, ascending.
    Multi(Vec<usize>),
}

impl Slot {
    pub fn controls(&self) -> Vec<usize> {
        match self {
            Slot::Initial => vec![],
            Slot::Single(n) => vec![*n],
            Slot::Pair(n, m) => vec![*n, *m],
            Slot::Multi(c) => c.clone(),
        }
    }

    fn from_controls(controls: Vec<usize>) -> Self {
        match controls.len() {
            0 => Slot::Initial,
            1 => Slot::Single(controls[0]),
            2 => Slot::Pair(controls[0], controls[1]),
            _ => Slot::Multi(controls),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Initial => write!(f, "a0"),
            other => {
                let c: Vec<String> = other.controls().iter().map(|i| i.to_string()).collect();
                write!(f, "a{}", c.join(","))
            }
        }
    }
}

/// Rotation angles, one per parameter slot, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// One 2×2 block `X^flip · R_y(angle)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRotation {
    pub flip: bool,
    pub angle: f64,
}

impl BlockRotation {
    /// Target-qubit amplitudes `(amp0, amp1)` after acting on `|0⟩`.
    #[inline]
    pub fn amplitudes(&self) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        if self.flip {
            [s, c]
        } else {
            [c, s]
        }
    }

    /// Derivative of [`amplitudes`](Self::amplitudes) with respect to the angle.
    #[inline]
    pub fn amplitude_derivatives(&self) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        if self.flip {
            [c, -s]
        } else {
            [-s, c]
        }
    }
}

/// Target-qubit amplitudes conditioned on each input bitstring.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalOutput {
    n_inputs: usize,
    amps: Vec<[f64; 2]>,
}

impl ConditionalOutput {
    pub fn new(n_inputs: usize, amps: Vec<[f64; 2]>) -> Result<Self> {
        check_dim(1usize << n_inputs, amps.len())?;
        Ok(Self { n_inputs, amps })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn amps(&self) -> &[[f64; 2]] {
        &self.amps
    }

    /// `p(a | b) = amp_a(b)^2`.
    pub fn conditional(&self, b: usize) -> [f64; 2] {
        let [a0, a1] = self.amps[b];
        [a0 * a0, a1 * a1]
    }

    /// Joint output distribution under a uniform input register, indexed `(b << 1) | a`.
    pub fn joint(&self) -> Vec<f64> {
        let scale = 1.0 / self.amps.len() as f64;
        self.amps
            .iter()
            .flat_map(|[a0, a1]| [a0 * a0 * scale, a1 * a1 * scale])
            .collect()
    }
}

/// A circuit family instance on a fixed number of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    kind: AnsatzKind,
    n_inputs: usize,
    slots: Vec<Slot>,
    /// Control mask of the gate preceding each slot, over bitstring values.
    masks: Vec<u32>,
}

impl Ansatz {
    pub fn new(kind: AnsatzKind, n_inputs: usize) -> Result<Self> {
        let count = param_count(kind, n_inputs)?;
        if n_inputs > bitphase::MAX_WIDTH {
            return Err(QicError::Resource(format!(
                "N={n_inputs} exceeds the bitstring width cap {}",
                bitphase::MAX_WIDTH
            )));
        }
        if kind == AnsatzKind::Exponential && n_inputs > EXPONENTIAL_MAX_INPUTS {
            return Err(QicError::Resource(format!(
                "exponential ansatz limited to N <= {EXPONENTIAL_MAX_INPUTS}, got {n_inputs}"
            )));
        }
        let n = n_inputs;
        let mut slots = vec![Slot::Initial];
        slots.extend((1..=n).map(Slot::Single));
        match kind {
            AnsatzKind::Linear => {}
            AnsatzKind::Quadratic => slots.extend(lex_pairs(n).map(|(i, j)| Slot::Pair(i, j))),
            AnsatzKind::PartialQuadratic { pairs } => {
                slots.extend(lex_pairs(n).take(pairs).map(|(i, j)| Slot::Pair(i, j)))
            }
            AnsatzKind::Exponential => {
                for order in 2..=n {
                    slots.extend(combinations(n, order).into_iter().map(Slot::from_controls));
                }
            }
        }
        debug_assert_eq!(slots.len(), count);
        let masks = slots
            .iter()
            .map(|s| {
                s.controls()
                    .iter()
                    .fold(0u32, |m, &i| m | (1u32 << (n - i)))
            })
            .collect();
        Ok(Self {
            kind,
            n_inputs,
            slots,
            masks,
        })
    }

    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn param_count(&self) -> usize {
        self.slots.len()
    }

    /// Gate order of the parameter slots.
    pub fn index_map(&self) -> &[Slot] {
        &self.slots
    }

    pub(crate) fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn input_count(&self) -> usize {
        1usize << self.n_inputs
    }

    fn check_params(&self, params: &ParameterVector) -> Result<()> {
        check_dim(self.param_count(), params.len())
    }

    /// Sign exponent of slot `k` for input `b`, from the parity kernels.
    fn slot_phase(&self, b: &Bitstring, k: usize) -> u8 {
        let n = self.n_inputs;
        match &self.slots[k] {
            Slot::Initial => 0,
            Slot::Single(i) => bitphase::partial_sum_unchecked(b, *i),
            Slot::Pair(i, j) => {
                bitphase::partial_sum_unchecked(b, n)
                    ^ bitphase::pair_prefix_phase(b, *i, *j).expect("valid pair slot")
            }
            Slot::Multi(_) => {
                // every gate up to and including slot k
                let value = b.value();
                self.masks[..=k]
                    .iter()
                    .filter(|&&m| m != 0 && value & m == m)
                    .count() as u8
                    & 1
            }
        }
    }

    /// Whether the block for `b` carries a residual NOT, from the parity kernels.
    fn flip_phase(&self, b: &Bitstring) -> u8 {
        let n = self.n_inputs;
        let linear = bitphase::partial_sum_unchecked(b, n);
        match self.kind {
            AnsatzKind::Linear => linear,
            AnsatzKind::Quadratic if n >= 2 => {
                linear ^ bitphase::pair_phase(b, n - 1, n).expect("n >= 2")
            }
            AnsatzKind::Quadratic => linear,
            AnsatzKind::PartialQuadratic { pairs } => match lex_pairs(n).take(pairs).last() {
                Some((i, j)) => linear ^ bitphase::pair_prefix_phase(b, i, j).expect("valid pair"),
                None => linear,
            },
            AnsatzKind::Exponential => (1..=n).fold(0u8, |acc, order| {
                let limits: Vec<usize> = (n - order + 1..=n).collect();
                acc ^ bitphase::exp_phase(b, &limits).expect("valid limits")
            }),
        }
    }

    /// Closed-form block for input `b`.
    pub fn block_rotation(&self, params: &ParameterVector, b: &Bitstring) -> Result<BlockRotation> {
        self.check_params(params)?;
        check_dim(self.n_inputs, b.width())?;
        let angle = params
            .0
            .iter()
            .enumerate()
            .map(|(k, &a)| if self.slot_phase(b, k) == 0 { a } else { -a })
            .sum();
        Ok(BlockRotation {
            flip: self.flip_phase(b) == 1,
            angle,
        })
    }

    /// Blocks for every input, indexed by bitstring value.
    ///
    /// Walks the gate sequence once per input, toggling the sign parity each
    /// time a gate fires; `O(M · 2^N)`.
    pub fn blocks(&self, params: &ParameterVector) -> Result<Vec<BlockRotation>> {
        self.check_params(params)?;
        let alpha = params.as_slice();
        Ok((0..self.input_count() as u32)
            .map(|b| {
                let mut parity = false;
                let mut angle = 0.0;
                for (&mask, &a) in self.masks.iter().zip(alpha) {
                    parity ^= mask != 0 && b & mask == mask;
                    angle += if parity { -a } else { a };
                }
                BlockRotation { flip: parity, angle }
            })
            .collect())
    }

    /// Visits the sign of every `(input, slot)` pair; `f(b, k, negative)`.
    pub(crate) fn for_each_sign(&self, mut f: impl FnMut(usize, usize, bool)) {
        for b in 0..self.input_count() {
            let bv = b as u32;
            let mut parity = false;
            for (k, &mask) in self.masks.iter().enumerate() {
                parity ^= mask != 0 && bv & mask == mask;
                f(b, k, parity);
            }
        }
    }

    /// Dense `2^N × M` matrix of `±1` mapping parameters to block angles.
    pub fn sign_matrix(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.param_count()]; self.input_count()];
        self.for_each_sign(|b, k, neg| rows[b][k] = if neg { -1.0 } else { 1.0 });
        rows
    }

    pub fn conditional_output(&self, params: &ParameterVector) -> Result<ConditionalOutput> {
        let amps = self.blocks(params)?.iter().map(|r| r.amplitudes()).collect();
        ConditionalOutput::new(self.n_inputs, amps)
    }

    /// Full `(N+1)`-qubit state with a uniformly prepared input register,
    /// indexed `(b << 1) | a`.
    pub fn statevector(&self, params: &ParameterVector) -> Result<Vec<f64>> {
        if self.n_inputs > STATEVECTOR_MAX_INPUTS {
            return Err(QicError::Resource(format!(
                "statevector limited to N <= {STATEVECTOR_MAX_INPUTS}, got {}",
                self.n_inputs
            )));
        }
        let out = self.conditional_output(params)?;
        let norm = 1.0 / (self.input_count() as f64).sqrt();
        Ok(out
            .amps()
            .iter()
            .flat_map(|[a0, a1]| [a0 * norm, a1 * norm])
            .collect())
    }
}

fn lex_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=n).flat_map(move |i| (i + 1..=n).map(move |j| (i, j)))
}

/// All ascending `order`-subsets of `1..=n` in lexicographic order.
fn combinations(n: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (1..=order).collect();
    if order > n {
        return out;
    }
    loop {
        out.push(current.clone());
        // rightmost position that can still advance
        let mut i = order;
        while i > 0 && current[i - 1] == n - order + i {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        current[i - 1] += 1;
        for j in i..order {
            current[j] = current[j - 1] + 1;
        }
    }
}
