//! Integer parity kernels over input bitstrings.
//!
//! Bits are numbered from 1 and `b_1` is the most significant bit of the
//! `width`-bit representation, so `Bitstring::new(0b101, 3)` has
//! `b_1 = 1, b_2 = 0, b_3 = 1`. All phases are returned as `0` or `1`.

use serde::{Deserialize, Serialize};

use crate::error::{QicError, Result};

/// Widest supported input register.
pub const MAX_WIDTH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bitstring {
    value: u32,
    width: usize,
}

impl Bitstring {
    pub fn new(value: u32, width: usize) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH {
            return Err(QicError::Domain(format!(
                "bitstring width must be in 1..={MAX_WIDTH}, got {width}"
            )));
        }
        if (value as u64) >= (1u64 << width) {
            return Err(QicError::Domain(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        Ok(Self { value, width })
    }

    /// Parses a string of `0`/`1` characters, first character is `b_1`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.len() > MAX_WIDTH {
            return Err(QicError::Domain(format!(
                "bitstring length must be in 1..={MAX_WIDTH}, got {}",
                s.len()
            )));
        }
        let mut value = 0u32;
        for c in s.chars() {
            let bit = match c {
                '0' => 0,
                '1' => 1,
                other => {
                    return Err(QicError::Domain(format!(
                        "invalid bit character {other:?} in {s:?}"
                    )))
                }
            };
            value = (value << 1) | bit;
        }
        Self::new(value, s.len())
    }

    #[inline]
    pub fn value(&self) -> u32 {
        self.value
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Bit `b_i` for `1 <= i <= width`.
    #[inline]
    pub fn bit(&self, i: usize) -> u32 {
        debug_assert!(i >= 1 && i <= self.width);
        (self.value >> (self.width - i)) & 1
    }

    /// Mask of the bits `b_from ..= b_to` (1-based, inclusive); empty when `from > to`.
    #[inline]
    fn range_mask(&self, from: usize, to: usize) -> u32 {
        if from > to {
            return 0;
        }
        let len = to - from + 1;
        let ones = if len >= 32 { u32::MAX } else { (1u32 << len) - 1 };
        ones << (self.width - to)
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n > self.width {
            Err(QicError::Index(format!(
                "index {n} exceeds bitstring width {}",
                self.width
            )))
        } else {
            Ok(())
        }
    }
}

impl std::fmt::Display for Bitstring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:0width$b}", self.value, width = self.width)
    }
}

/// `S_n(b)`: parity of `b_1 .. b_n`, with `S_0 = 0`.
pub fn partial_sum(b: &Bitstring, n: usize) -> Result<u8> {
    b.check_index(n)?;
    Ok(partial_sum_unchecked(b, n))
}

#[inline]
pub(crate) fn partial_sum_unchecked(b: &Bitstring, n: usize) -> u8 {
    ((b.value & b.range_mask(1, n)).count_ones() & 1) as u8
}

/// `Q_{n,m}(b)`: parity of `sum_{i=1..n} sum_{j=i+1..m} b_i b_j`.
pub fn pair_phase(b: &Bitstring, n: usize, m: usize) -> Result<u8> {
    if n < 1 || n >= m || m > b.width {
        return Err(QicError::Index(format!(
            "pair phase needs 1 <= n < m <= {}, got n={n}, m={m}",
            b.width
        )));
    }
    Ok(pair_phase_unchecked(b, n, m))
}

#[inline]
fn pair_phase_unchecked(b: &Bitstring, n: usize, m: usize) -> u8 {
    let mut acc = 0u32;
    for i in 1..=n {
        if b.bit(i) == 1 {
            acc ^= (b.value & b.range_mask(i + 1, m)).count_ones() & 1;
        }
    }
    acc as u8
}

/// Parity of `b_i b_j` summed over every pair `(i, j)`, `i < j`, that precedes or
/// equals `(n, m)` in lexicographic order. This is the number of pair-controlled
/// NOTs that have fired once the circuit reaches the rotation after gate `(n, m)`.
pub fn pair_prefix_phase(b: &Bitstring, n: usize, m: usize) -> Result<u8> {
    if n < 1 || n >= m || m > b.width {
        return Err(QicError::Index(format!(
            "pair prefix needs 1 <= n < m <= {}, got n={n}, m={m}",
            b.width
        )));
    }
    // all pairs with first index < n, then (n, n+1) ..= (n, m)
    let earlier = if n >= 2 {
        pair_phase_unchecked(b, n - 1, b.width)
    } else {
        0
    };
    let current = if b.bit(n) == 1 {
        ((b.value & b.range_mask(n + 1, m)).count_ones() & 1) as u8
    } else {
        0
    };
    Ok(earlier ^ current)
}

/// `E_J(n_1, ..., n_J; b)`: parity of the nested ordered sum of `J`-fold bit
/// products with `a_1 < a_2 < ... < a_J` and `a_k <= n_k`. `J = limits.len()`.
pub fn exp_phase(b: &Bitstring, limits: &[usize]) -> Result<u8> {
    let order = limits.len();
    if order == 0 || order > b.width {
        return Err(QicError::Index(format!(
            "exponential phase order must be in 1..={}, got {order}",
            b.width
        )));
    }
    if limits[0] < 1 || limits.windows(2).any(|w| w[0] > w[1]) || limits[order - 1] > b.width {
        return Err(QicError::Index(format!(
            "limits {limits:?} must be nondecreasing within 1..={}",
            b.width
        )));
    }

    // chains[a] = parity of the number of admissible chains ending at position a
    // whose bit product is 1.
    let w = b.width;
    let mut chains = vec![0u8; w + 1];
    for a in 1..=limits[0] {
        chains[a] = b.bit(a) as u8;
    }
    for k in 1..order {
        let mut next = vec![0u8; w + 1];
        let mut running = 0u8;
        let prev_limit = limits[k - 1];
        for a in 1..=limits[k] {
            // running holds the parity of chains[a'] for a' < a, a' <= prev_limit
            if b.bit(a) == 1 {
                next[a] = running;
            }
            if a <= prev_limit {
                running ^= chains[a];
            }
        }
        chains = next;
    }
    Ok(chains.iter().fold(0, |acc, &c| acc ^ c))
}
