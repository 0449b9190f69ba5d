//! Target joint distributions over `(input bitstring, output bit)`.
//!
//! Joints are stored as probabilities indexed `(b << 1) | a`. Seen inputs
//! share the mass uniformly, `p(b, a) = p(a | b) / #seen`; unseen inputs carry
//! no mass at all.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitphase::{Bitstring, MAX_WIDTH};
use crate::error::{check_dim, QicError, Result};
use crate::rng::{stream_rng, Stream};

#[cfg(test)]
const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTarget", into = "RawTarget")]
pub struct TargetDistribution {
    n_inputs: usize,
    probs: Vec<f64>,
    seen_mask: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct RawTarget {
    n_inputs: usize,
    probs: Vec<f64>,
    seen_mask: Vec<bool>,
}

impl TryFrom<RawTarget> for TargetDistribution {
    type Error = QicError;

    fn try_from(raw: RawTarget) -> Result<Self> {
        let t = TargetDistribution {
            n_inputs: raw.n_inputs,
            probs: raw.probs,
            seen_mask: raw.seen_mask,
        };
        t.validate()?;
        Ok(t)
    }
}

impl From<TargetDistribution> for RawTarget {
    fn from(t: TargetDistribution) -> Self {
        RawTarget {
            n_inputs: t.n_inputs,
            probs: t.probs,
            seen_mask: t.seen_mask,
        }
    }
}

/// Where the Gaussian profile is centred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaussianCenter {
    /// `(N - 1) / 2`.
    #[default]
    Printed,
    /// `(2^N - 1) / 2`, the middle of the input range.
    MidRange,
    At(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    #[serde(default)]
    pub center: GaussianCenter,
    #[serde(default = "GaussianParams::default_sigma_sq")]
    pub sigma_sq: f64,
}

impl GaussianParams {
    fn default_sigma_sq() -> f64 {
        0.5
    }

    pub fn center_for(&self, n_inputs: usize) -> f64 {
        match self.center {
            GaussianCenter::Printed => (n_inputs as f64 - 1.0) / 2.0,
            GaussianCenter::MidRange => ((1u64 << n_inputs) as f64 - 1.0) / 2.0,
            GaussianCenter::At(c) => c,
        }
    }

    /// Unnormalized weights `(w(n,0), w(n,1))`.
    pub fn weights(&self, n_inputs: usize, n: usize) -> [f64; 2] {
        let d = n as f64 - self.center_for(n_inputs);
        let w0 = (-(d * d) / (2.0 * self.sigma_sq)).exp() / (2.0 * PI).sqrt();
        [w0, 1.0 - w0]
    }
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self {
            center: GaussianCenter::Printed,
            sigma_sq: Self::default_sigma_sq(),
        }
    }
}

fn check_inputs(n_inputs: usize) -> Result<()> {
    if n_inputs < 1 || n_inputs > MAX_WIDTH {
        return Err(QicError::Domain(format!(
            "number of inputs must be in 1..={MAX_WIDTH}, got {n_inputs}"
        )));
    }
    Ok(())
}

impl TargetDistribution {
    /// Builds a target from per-input weights. Each seen row is conditioned
    /// (divided by its sum); unseen rows are ignored.
    pub fn from_conditionals(
        n_inputs: usize,
        rows: &[[f64; 2]],
        seen_mask: Vec<bool>,
    ) -> Result<Self> {
        check_inputs(n_inputs)?;
        let inputs = 1usize << n_inputs;
        check_dim(inputs, rows.len())?;
        check_dim(inputs, seen_mask.len())?;
        let seen = seen_mask.iter().filter(|&&s| s).count();
        if seen == 0 {
            return Err(QicError::Domain("target has no seen inputs".into()));
        }
        let scale = 1.0 / seen as f64;
        let mut probs = vec![0.0; 2 * inputs];
        for (b, (&[w0, w1], &is_seen)) in rows.iter().zip(&seen_mask).enumerate() {
            if !is_seen {
                continue;
            }
            if !(w0 >= 0.0 && w1 >= 0.0) || !(w0 + w1 > 0.0) || !(w0 + w1).is_finite() {
                return Err(QicError::Domain(format!(
                    "input {b} has invalid weights ({w0}, {w1})"
                )));
            }
            let total = w0 + w1;
            probs[2 * b] = w0 / total * scale;
            probs[2 * b + 1] = w1 / total * scale;
        }
        Ok(Self {
            n_inputs,
            probs,
            seen_mask,
        })
    }

    pub fn gaussian(n_inputs: usize, params: &GaussianParams) -> Result<Self> {
        check_inputs(n_inputs)?;
        if !(params.sigma_sq > 0.0) {
            return Err(QicError::Domain("Gaussian variance must be positive".into()));
        }
        let rows: Vec<[f64; 2]> = (0..1usize << n_inputs)
            .map(|n| params.weights(n_inputs, n))
            .collect();
        Self::from_conditionals(n_inputs, &rows, vec![true; rows.len()])
    }

    /// Output equals the majority input bit; ties split evenly.
    pub fn majority(n_inputs: usize) -> Result<Self> {
        check_inputs(n_inputs)?;
        let rows: Vec<[f64; 2]> = (0..1u32 << n_inputs)
            .map(|n| {
                let ones = n.count_ones() as usize;
                let zeros = n_inputs - ones;
                match zeros.cmp(&ones) {
                    std::cmp::Ordering::Greater => [1.0, 0.0],
                    std::cmp::Ordering::Less => [0.0, 1.0],
                    std::cmp::Ordering::Equal => [0.5, 0.5],
                }
            })
            .collect();
        Self::from_conditionals(n_inputs, &rows, vec![true; rows.len()])
    }

    /// `p(0 | b)` uniform on `[0, 1)` per input.
    pub fn random(n_inputs: usize, seed: u64) -> Result<Self> {
        check_inputs(n_inputs)?;
        let mut rng = stream_rng(seed, Stream::Target, 0);
        let rows: Vec<[f64; 2]> = (0..1usize << n_inputs)
            .map(|_| {
                let p0: f64 = rng.gen();
                [p0, 1.0 - p0]
            })
            .collect();
        Self::from_conditionals(n_inputs, &rows, vec![true; rows.len()])
    }

    /// Hides `floor(fraction · 2^N)` inputs chosen uniformly without
    /// replacement and renormalizes the remaining mass.
    pub fn mask_fraction(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(QicError::Domain(format!(
                "mask fraction must be in [0, 1), got {fraction}"
            )));
        }
        let inputs = self.input_count();
        let hidden = (fraction * inputs as f64).floor() as usize;
        let mut rng = stream_rng(seed, Stream::Mask, 0);
        let mut seen_mask = self.seen_mask.clone();
        for b in sample(&mut rng, inputs, hidden).into_iter() {
            seen_mask[b] = false;
        }
        self.restricted_to(&seen_mask)
    }

    /// Same conditionals on the inputs selected by `mask`, which must all be
    /// seen here; everything else becomes unseen.
    pub fn restricted_to(&self, mask: &[bool]) -> Result<Self> {
        check_dim(self.input_count(), mask.len())?;
        if let Some(b) = (0..mask.len()).find(|&b| mask[b] && !self.seen_mask[b]) {
            return Err(QicError::Domain(format!(
                "input {b} is selected but has no target mass"
            )));
        }
        let rows: Vec<[f64; 2]> = (0..self.input_count())
            .map(|b| self.conditional(b).unwrap_or([0.5, 0.5]))
            .collect();
        Self::from_conditionals(self.n_inputs, &rows, mask.to_vec())
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn input_count(&self) -> usize {
        1usize << self.n_inputs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn seen_mask(&self) -> &[bool] {
        &self.seen_mask
    }

    pub fn is_seen(&self, b: usize) -> bool {
        self.seen_mask[b]
    }

    pub fn seen_count(&self) -> usize {
        self.seen_mask.iter().filter(|&&s| s).count()
    }

    /// `p(a | b)` for a seen input.
    pub fn conditional(&self, b: usize) -> Option<[f64; 2]> {
        if !self.seen_mask[b] {
            return None;
        }
        let (p0, p1) = (self.probs[2 * b], self.probs[2 * b + 1]);
        let total = p0 + p1;
        Some([p0 / total, p1 / total])
    }

    /// `θ̄_b = arccos √p(0|b)` in `[0, π/2]`, `None` for unseen inputs.
    pub fn target_angles(&self) -> Vec<Option<f64>> {
        (0..self.input_count())
            .map(|b| self.conditional(b).map(|[p0, _]| p0.clamp(0.0, 1.0).sqrt().acos()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_inputs(self.n_inputs)?;
        let inputs = self.input_count();
        check_dim(2 * inputs, self.probs.len())?;
        check_dim(inputs, self.seen_mask.len())?;
        if self.probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(QicError::Domain("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(QicError::Domain(format!("joint sums to {total}, not 1")));
        }
        let seen = self.seen_count();
        if seen == 0 {
            return Err(QicError::Domain("target has no seen inputs".into()));
        }
        for b in 0..inputs {
            let row = self.probs[2 * b] + self.probs[2 * b + 1];
            if self.seen_mask[b] {
                if (row * seen as f64 - 1.0).abs() > 1e-9 {
                    return Err(QicError::Domain(format!(
                        "seen input {b} carries mass {row}, expected {}",
                        1.0 / seen as f64
                    )));
                }
            } else if row != 0.0 {
                return Err(QicError::Domain(format!("unseen input {b} carries mass {row}")));
            }
        }
        Ok(())
    }

    /// Reads `bitstring,output_bit,weight` rows. Inputs without positive weight
    /// are unseen.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            bitstring: String,
            output_bit: u8,
            weight: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut width = None;
        let mut entries = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            let b = Bitstring::parse(&row.bitstring)?;
            match width {
                None => width = Some(b.width()),
                Some(w) if w != b.width() => {
                    return Err(QicError::Domain(format!(
                        "bitstring {} has width {}, expected {w}",
                        row.bitstring,
                        b.width()
                    )))
                }
                _ => {}
            }
            if row.output_bit > 1 {
                return Err(QicError::Domain(format!("output bit {} is not 0 or 1", row.output_bit)));
            }
            if !(row.weight >= 0.0) || !row.weight.is_finite() {
                return Err(QicError::Domain(format!("invalid weight {}", row.weight)));
            }
            entries.push((b.value() as usize, row.output_bit as usize, row.weight));
        }
        let n_inputs = width.ok_or_else(|| QicError::Domain("target CSV has no rows".into()))?;
        check_inputs(n_inputs)?;
        let mut rows = vec![[0.0; 2]; 1 << n_inputs];
        for (b, a, w) in entries {
            rows[b][a] += w;
        }
        let seen = rows.iter().map(|r| r[0] + r[1] > 0.0).collect();
        Self::from_conditionals(n_inputs, &rows, seen)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Writes one row per `(b, a)` of every seen input, weights as joint probabilities.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["bitstring", "output_bit", "weight"])?;
        for b in 0..self.input_count() {
            if !self.seen_mask[b] {
                continue;
            }
            let bits = Bitstring::new(b as u32, self.n_inputs)?.to_string();
            for a in 0..2 {
                wtr.write_record([bits.clone(), a.to_string(), format!("{:e}", self.probs[2 * b + a])])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    #[cfg(test)]
    fn total_mass_ok(&self) -> bool {
        (self.probs.iter().sum::<f64>() - 1.0).abs() <= NORM_TOLERANCE
    }
}
