//! Quantized code for k-sparse signals with entries in [-1, 1].
//!
//! The encoder keeps the k largest-magnitude entries (ties toward the
//! lowest index), clamps each to [-1, 1], and stores per entry a
//! `ceil(log2 n)`-bit index, one sign bit, and a `b`-bit magnitude bin
//! `floor(|u| * 2^b)` (capped at the top bin so |u| = 1 is representable).
//! The decoder reconstructs bin midpoints `sign * (bin + 0.5) / 2^b`,
//! except for the reserved zero sentinel (negative sign with bin 0) which
//! decodes to exactly 0 so all-zero selections round-trip bit for bit.

use super::bitstream::{index_bits, BitStream};
use super::{CompressionCode, KIND_SPARSE};
use crate::rng::SeededRng;
use crate::{Error, Result, Signal};

/// Parameters and implementation of the sparse quantized code.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseQuantCode {
    n: usize,
    k: usize,
    /// Magnitude bits per entry; each stored entry spends b + 1 bits with
    /// its sign.
    b: u32,
    /// Resolution exponent driving the rate bound evaluation.
    gamma: f64,
}

/// Exact and bound rate figures for a sparse code.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateReport {
    /// Exact payload width: k * (ceil(log2 n) + b + 1).
    pub payload_bits: u64,
    /// Closed-form bound (1 + gamma) k log2 n + (k/2) log2 k + 2k.
    pub rate_bound_bits: f64,
    /// Counting bound (k + 1) log2 n + k (b + 1).
    pub counting_bound_bits: f64,
}

impl SparseQuantCode {
    pub fn new(n: usize, k: usize, b: u32, gamma: f64) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::domain(format!("need 1 <= k <= n, got k={k}, n={n}")));
        }
        if b == 0 || b > 52 {
            return Err(Error::domain(format!("need 1 <= b <= 52, got b={b}")));
        }
        if !(gamma >= 0.0) {
            return Err(Error::domain(format!("gamma must be nonnegative, got {gamma}")));
        }
        Ok(SparseQuantCode { n, k, b, gamma })
    }

    /// Code whose magnitude width is derived from the resolution
    /// exponent: `b = ceil(gamma log2 n + 0.5 log2 k)`, which puts the
    /// distortion at or below `n^-gamma`.
    pub fn with_gamma_rate(n: usize, k: usize, gamma: f64) -> Result<Self> {
        let b = Self::bits_for_gamma(n, k, gamma);
        SparseQuantCode::new(n, k, b, gamma)
    }

    pub fn bits_for_gamma(n: usize, k: usize, gamma: f64) -> u32 {
        let raw = gamma * (n as f64).log2() + 0.5 * (k as f64).log2();
        raw.ceil().max(1.0) as u32
    }

    /// The gamma for which this b would have been chosen.
    pub fn implied_gamma(n: usize, k: usize, b: u32) -> f64 {
        (b as f64 - 0.5 * (k as f64).log2()) / (n as f64).log2()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn index_width(&self) -> u32 {
        index_bits(self.n)
    }

    pub fn payload_bits(&self) -> u64 {
        self.k as u64 * (self.index_width() as u64 + self.b as u64 + 1)
    }

    /// Exact payload width together with the two closed-form bounds.
    pub fn rate_report(&self) -> RateReport {
        let n = self.n as f64;
        let k = self.k as f64;
        RateReport {
            payload_bits: self.payload_bits(),
            rate_bound_bits: (1.0 + self.gamma) * k * n.log2() + 0.5 * k * k.log2() + 2.0 * k,
            counting_bound_bits: (k + 1.0) * n.log2() + k * (self.b as f64 + 1.0),
        }
    }

    /// A uniformly drawn member of the code's domain: k-sparse with
    /// uniform support and uniform [-1, 1] magnitudes.
    pub fn sample_member(&self, rng: &mut SeededRng) -> Signal {
        let mut values = vec![0.0; self.n];
        for idx in rng.distinct_indices(self.k, self.n) {
            values[idx] = rng.uniform(-1.0, 1.0);
        }
        Signal::from_vec(values).expect("finite by construction")
    }

    /// Every decodable codeword, for exhaustive-search oracles. Bounded
    /// by `guard` decoded streams.
    pub fn enumerate_codebook(&self, guard: usize) -> Result<Vec<Signal>> {
        let payload = self.payload_bits();
        if payload >= 63 || (1u64 << payload) > guard as u64 {
            return Err(Error::SizeGuard {
                what: "sparse codebook enumeration".into(),
                actual: if payload >= 63 { usize::MAX } else { 1usize << payload },
                guard,
            });
        }
        let width = payload as u32;
        let mut codebook = Vec::new();
        for pattern in 0u64..(1u64 << payload) {
            let mut stream = BitStream::new(KIND_SPARSE);
            stream.write_bits(pattern, width);
            if let Ok(signal) = self.decode(&stream) {
                codebook.push(signal);
            }
        }
        Ok(codebook)
    }

    fn quantize(&self, value: f64) -> (u64, u64) {
        // Clamp to [-1, 1], then bin the magnitude.
        let clamped = value.clamp(-1.0, 1.0);
        if clamped == 0.0 {
            return (1, 0); // reserved zero sentinel
        }
        let levels = (1u64 << self.b) - 1;
        let bin = ((clamped.abs() * (1u64 << self.b) as f64).floor() as u64).min(levels);
        let sign = u64::from(clamped < 0.0);
        (sign, bin)
    }

    fn reconstruct(&self, sign: u64, bin: u64) -> f64 {
        if sign == 1 && bin == 0 {
            return 0.0;
        }
        let magnitude = (bin as f64 + 0.5) / (1u64 << self.b) as f64;
        if sign == 1 {
            -magnitude
        } else {
            magnitude
        }
    }
}

impl CompressionCode for SparseQuantCode {
    fn len(&self) -> usize {
        self.n
    }

    fn encode(&self, x: &Signal) -> Result<BitStream> {
        x.check_len(self.n, "sparse encode")?;
        // k largest magnitudes, ties toward the lowest index.
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            x[b].abs()
                .partial_cmp(&x[a].abs())
                .expect("finite values")
                .then(a.cmp(&b))
        });
        let selected = &order[..self.k];

        // Entries that quantize to the zero sentinel decode to 0 at any
        // index, so they are stored canonically at the smallest indices
        // not taken by nonzero entries; re-encoding the decoded signal
        // then reproduces the stream bit for bit.
        let mut entries: Vec<(usize, u64, u64)> = Vec::with_capacity(self.k);
        let mut zero_count = 0usize;
        for &idx in selected {
            let (sign, bin) = self.quantize(x[idx]);
            if sign == 1 && bin == 0 {
                zero_count += 1;
            } else {
                entries.push((idx, sign, bin));
            }
        }
        if zero_count > 0 {
            let taken: std::collections::BTreeSet<usize> =
                entries.iter().map(|&(idx, _, _)| idx).collect();
            let mut assigned = 0;
            for idx in 0..self.n {
                if assigned == zero_count {
                    break;
                }
                if !taken.contains(&idx) {
                    entries.push((idx, 1, 0));
                    assigned += 1;
                }
            }
        }
        entries.sort_unstable_by_key(|&(idx, _, _)| idx);

        let mut stream = BitStream::new(KIND_SPARSE);
        let idx_width = self.index_width();
        for &(idx, sign, bin) in &entries {
            stream.write_bits(idx as u64, idx_width);
            stream.write_bits(sign, 1);
            stream.write_bits(bin, self.b);
        }
        debug_assert_eq!(stream.bit_len() as u64, self.payload_bits());
        Ok(stream)
    }

    fn decode(&self, bits: &BitStream) -> Result<Signal> {
        bits.expect_kind(KIND_SPARSE, "sparse code")?;
        if bits.bit_len() as u64 != self.payload_bits() {
            return Err(Error::Decode(format!(
                "expected {} payload bits, got {}",
                self.payload_bits(),
                bits.bit_len()
            )));
        }
        let mut reader = bits.reader();
        let idx_width = self.index_width();
        let mut values = vec![0.0; self.n];
        let mut previous: Option<usize> = None;
        for _ in 0..self.k {
            let idx = reader.read_bits(idx_width)? as usize;
            let sign = reader.read_bits(1)?;
            let bin = reader.read_bits(self.b)?;
            if idx >= self.n {
                return Err(Error::Decode(format!("index {idx} out of range 0..{}", self.n)));
            }
            if previous.map_or(false, |p| idx <= p) {
                return Err(Error::Decode("entry indices must be strictly ascending".into()));
            }
            previous = Some(idx);
            values[idx] = self.reconstruct(sign, bin);
        }
        Signal::from_vec(values)
    }

    fn rate_bits(&self) -> Option<u64> {
        Some(self.payload_bits())
    }

    /// Cor-style domain bound: per entry the midpoint error is below
    /// `2^-b`, so `2^-b sqrt(k)` over the support.
    fn distortion_bound(&self) -> Option<f64> {
        Some(2f64.powi(-(self.b as i32)) * (self.k as f64).sqrt())
    }
}
