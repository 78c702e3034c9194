//! Code for sampled piecewise-polynomial signals.
//!
//! The encoder finds the best segmentation with at most `Q` splits (via
//! the dynamic program in [`crate::polyfit`]) and quantizes each
//! segment's `N + 1` coefficients to `b`-bit bins on `[0, 1]`; the decoder
//! evaluates the quantized polynomials back at the sample points `i/n`.
//! Streams are fixed width: `Q` singularity fields of `ceil(log2 n) + 1`
//! bits (the value `n` marks an unused slot) followed by
//! `(N + 1)(Q + 1)` coefficient fields of `b` bits, zero for unused
//! segments.

use super::bitstream::{index_bits, BitStream};
use super::{CompressionCode, KIND_PIECEWISE_POLY};
use crate::polyfit::{eval_poly, viterbi_segmentation};
use crate::rng::SeededRng;
use crate::{Error, Result, Signal};

/// Degrees above this are rejected: the monomial basis is too poorly
/// conditioned to fit reliably.
pub const MAX_DEGREE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolyCode {
    n: usize,
    degree: usize,
    max_singularities: usize,
    b: u32,
    gamma: f64,
}

impl PiecewisePolyCode {
    pub fn new(n: usize, degree: usize, max_singularities: usize, b: u32, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("signal length must be >= 1"));
        }
        if degree > MAX_DEGREE {
            return Err(Error::domain(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if b == 0 || b > 52 {
            return Err(Error::domain(format!("need 1 <= b <= 52, got b={b}")));
        }
        if !(gamma >= 0.0) {
            return Err(Error::domain(format!("gamma must be nonnegative, got {gamma}")));
        }
        Ok(PiecewisePolyCode {
            n,
            degree,
            max_singularities,
            b,
            gamma,
        })
    }

    /// Coefficient width `b = ceil((gamma + 0.5) log2 n + log2(N + 1))`
    /// that puts the distortion at or below `n^-gamma`.
    pub fn with_gamma_rate(n: usize, degree: usize, max_singularities: usize, gamma: f64) -> Result<Self> {
        let b = Self::bits_for_gamma(n, degree, gamma);
        PiecewisePolyCode::new(n, degree, max_singularities, b, gamma)
    }

    pub fn bits_for_gamma(n: usize, degree: usize, gamma: f64) -> u32 {
        let raw = (gamma + 0.5) * (n as f64).log2() + ((degree + 1) as f64).log2();
        raw.ceil().max(1.0) as u32
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn max_singularities(&self) -> usize {
        self.max_singularities
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn singularity_width(&self) -> u32 {
        index_bits(self.n) + 1
    }

    pub fn payload_bits(&self) -> u64 {
        let coeff_slots = (self.degree as u64 + 1) * (self.max_singularities as u64 + 1);
        coeff_slots * self.b as u64 + self.max_singularities as u64 * self.singularity_width() as u64
    }

    /// Closed-form rate bound
    /// `((gamma + 0.5)(N + 1)(Q + 1) + Q) log2 n + (N + 1)(Q + 1)(log2(N + 1) + 1) + 1`.
    pub fn rate_bound_bits(&self) -> f64 {
        let n = self.n as f64;
        let slots = (self.degree as f64 + 1.0) * (self.max_singularities as f64 + 1.0);
        ((self.gamma + 0.5) * slots + self.max_singularities as f64) * n.log2()
            + slots * (((self.degree + 1) as f64).log2() + 1.0)
            + 1.0
    }

    /// A class member with `min(Q, n - 1)` uniformly placed splits and
    /// per-segment coefficients drawn uniformly from the box intersected
    /// with the simplex.
    pub fn sample_member(&self, rng: &mut SeededRng) -> Signal {
        let q = self.max_singularities.min(self.n - 1);
        let splits = if q == 0 {
            Vec::new()
        } else {
            rng.distinct_indices(q, self.n - 1)
                .into_iter()
                .map(|i| i + 1)
                .collect()
        };
        let coefficients: Vec<Vec<f64>> = (0..=q)
            .map(|_| loop {
                let candidate: Vec<f64> = (0..=self.degree).map(|_| rng.uniform(0.0, 1.0)).collect();
                if candidate.iter().sum::<f64>() <= 1.0 {
                    break candidate;
                }
            })
            .collect();
        self.member_from_parts(&splits, &coefficients)
            .expect("sampled parts are valid")
    }

    /// Evaluates an exact class member from split points and per-segment
    /// coefficients.
    pub fn member_from_parts(&self, splits: &[usize], coefficients: &[Vec<f64>]) -> Result<Signal> {
        if coefficients.len() != splits.len() + 1 {
            return Err(Error::dim(format!(
                "{} coefficient sets for {} segments",
                coefficients.len(),
                splits.len() + 1
            )));
        }
        let mut values = vec![0.0; self.n];
        let mut bounds = vec![0usize];
        bounds.extend_from_slice(splits);
        bounds.push(self.n);
        for (seg, window) in bounds.windows(2).enumerate() {
            for i in window[0]..window[1] {
                values[i] = eval_poly(&coefficients[seg], i as f64 / self.n as f64);
            }
        }
        Signal::from_vec(values)
    }

    fn quantize_coefficient(&self, a: f64) -> u64 {
        let levels = (1u64 << self.b) - 1;
        ((a.clamp(0.0, 1.0) * (1u64 << self.b) as f64).floor() as u64).min(levels)
    }

    /// Quantizes one segment's coefficients, then decrements bins (largest
    /// reconstruction first, ties toward the lower index) until the
    /// reconstructed midpoints satisfy the fit's own sum constraint. The
    /// decoded codeword is then exactly refittable, which keeps the
    /// round trip idempotent; the adjustment costs at most one quantizer
    /// step on the affected coefficients.
    fn quantize_segment(&self, coefficients: &[f64]) -> Vec<u64> {
        let mut bins: Vec<u64> = coefficients
            .iter()
            .map(|&a| self.quantize_coefficient(a))
            .collect();
        loop {
            let sum: f64 = bins.iter().map(|&b| self.reconstruct_coefficient(b)).sum();
            if sum <= 1.0 {
                return bins;
            }
            let target = (0..bins.len()).filter(|&j| bins[j] > 0).max_by(|&a, &b| {
                bins[a].cmp(&bins[b]).then(b.cmp(&a))
            });
            match target {
                Some(j) => bins[j] -= 1,
                None => return bins, // all bins zero; nothing left to shed
            }
        }
    }

    fn reconstruct_coefficient(&self, bin: u64) -> f64 {
        (bin as f64 + 0.5) / (1u64 << self.b) as f64
    }
}

impl CompressionCode for PiecewisePolyCode {
    fn len(&self) -> usize {
        self.n
    }

    fn encode(&self, x: &Signal) -> Result<BitStream> {
        x.check_len(self.n, "piecewise-poly encode")?;
        let segmentation = viterbi_segmentation(x, self.degree, self.max_singularities);
        let q = segmentation.singularities.len();

        let mut stream = BitStream::new(KIND_PIECEWISE_POLY);
        let width = self.singularity_width();
        for slot in 0..self.max_singularities {
            let value = segmentation
                .singularities
                .get(slot)
                .copied()
                .unwrap_or(self.n); // sentinel: no split
            stream.write_bits(value as u64, width);
        }
        for seg in 0..=self.max_singularities {
            let bins = if seg <= q {
                self.quantize_segment(&segmentation.segment_fits[seg].coefficients)
            } else {
                vec![0; self.degree + 1]
            };
            for bin in bins {
                stream.write_bits(bin, self.b);
            }
        }
        debug_assert_eq!(stream.bit_len() as u64, self.payload_bits());
        Ok(stream)
    }

    fn decode(&self, bits: &BitStream) -> Result<Signal> {
        bits.expect_kind(KIND_PIECEWISE_POLY, "piecewise-poly code")?;
        if bits.bit_len() as u64 != self.payload_bits() {
            return Err(Error::Decode(format!(
                "expected {} payload bits, got {}",
                self.payload_bits(),
                bits.bit_len()
            )));
        }
        let mut reader = bits.reader();
        let width = self.singularity_width();

        let mut singularities = Vec::new();
        let mut seen_sentinel = false;
        for _ in 0..self.max_singularities {
            let value = reader.read_bits(width)? as usize;
            if value == self.n {
                seen_sentinel = true;
                continue;
            }
            if seen_sentinel {
                return Err(Error::Decode("split after an unused singularity slot".into()));
            }
            if value == 0 || value > self.n {
                return Err(Error::Decode(format!("singularity {value} outside (0, n)")));
            }
            if singularities.last().map_or(false, |&p| value <= p) {
                return Err(Error::Decode("singularities must be strictly ascending".into()));
            }
            singularities.push(value);
        }
        let q = singularities.len();

        let mut coefficients: Vec<Vec<f64>> = Vec::with_capacity(q + 1);
        for seg in 0..=self.max_singularities {
            let mut coeffs = Vec::with_capacity(self.degree + 1);
            for _ in 0..=self.degree {
                let bin = reader.read_bits(self.b)?;
                if seg <= q {
                    coeffs.push(self.reconstruct_coefficient(bin));
                } else if bin != 0 {
                    return Err(Error::Decode("nonzero coefficient in an unused segment".into()));
                }
            }
            if seg <= q {
                coefficients.push(coeffs);
            }
        }

        self.member_from_parts(&singularities, &coefficients)
    }

    fn rate_bits(&self) -> Option<u64> {
        Some(self.payload_bits())
    }

    /// Per sample the coefficient midpoints are each off by at most
    /// `2^-(b+1)`, so `sqrt(n) (N + 1) 2^-b` bounds the round trip on the
    /// class.
    fn distortion_bound(&self) -> Option<f64> {
        Some((self.n as f64).sqrt() * (self.degree as f64 + 1.0) * 2f64.powi(-(self.b as i32)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_on_midpoint_round_trips_exactly() {
        let b = 4;
        let code = PiecewisePolyCode::new(9, 0, 1, b, 1.0).unwrap();
        let midpoint = (7.0 + 0.5) / 16.0;
        let x = Signal::from_vec(vec![midpoint; 9]).unwrap();
        let projected = code.project(&x).unwrap();
        assert_eq!(projected, x);
    }

    #[test]
    fn step_example_segments_and_quantization() {
        let b = 4;
        let code = PiecewisePolyCode::new(6, 0, 1, b, 1.0).unwrap();
        let x = Signal::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let stream = code.encode(&x).unwrap();
        let mut reader = stream.reader();
        let width = index_bits(6) + 1;
        assert_eq!(reader.read_bits(width).unwrap(), 3); // split index
        let lo_bin = reader.read_bits(b).unwrap();
        let hi_bin = reader.read_bits(b).unwrap();
        assert_eq!(lo_bin, 0);
        assert_eq!(hi_bin, 15);
        let decoded = code.decode(&stream).unwrap();
        let q0 = 0.5 / 16.0;
        let q1 = 15.5 / 16.0;
        assert_eq!(decoded.as_slice(), &[q0, q0, q0, q1, q1, q1]);
    }

    #[test]
    fn payload_width_is_fixed() {
        let code = PiecewisePolyCode::new(17, 2, 3, 6, 1.0).unwrap();
        let expected = 3 * (index_bits(17) + 1) as u64 + (3 * 4 * 6) as u64;
        assert_eq!(code.payload_bits(), expected);
        let mut rng = SeededRng::new(3);
        let x = Signal::from_vec((0..17).map(|_| rng.uniform(0.0, 1.0)).collect()).unwrap();
        assert_eq!(code.encode(&x).unwrap().bit_len() as u64, code.payload_bits());
    }

    #[test]
    fn member_distortion_within_bound() {
        let code = PiecewisePolyCode::new(24, 1, 2, 8, 1.0).unwrap();
        let bound = code.distortion_bound().unwrap();
        let mut rng = SeededRng::new(5);
        for _ in 0..100 {
            let x = code.sample_member(&mut rng);
            let err = x.distance_l2(&code.project(&x).unwrap()).unwrap();
            assert!(err <= bound, "err={err} bound={bound}");
        }
    }

    #[test]
    fn per_sample_error_within_bound() {
        let code = PiecewisePolyCode::new(16, 1, 1, 7, 1.0).unwrap();
        let per_sample = 2.0 * 2f64.powi(-7);
        let mut rng = SeededRng::new(6);
        for _ in 0..50 {
            let x = code.sample_member(&mut rng);
            let xhat = code.project(&x).unwrap();
            for (a, b) in x.iter().zip(xhat.iter()) {
                assert!((a - b).abs() <= per_sample);
            }
        }
    }

    #[test]
    fn reencoding_members_reproduces_streams() {
        let code = PiecewisePolyCode::new(20, 1, 2, 10, 1.0).unwrap();
        let mut rng = SeededRng::new(8);
        for trial in 0..60 {
            let x = code.sample_member(&mut rng);
            let stream = code.encode(&x).unwrap();
            let decoded = code.decode(&stream).unwrap();
            let restream = code.encode(&decoded).unwrap();
            assert_eq!(stream, restream, "trial {trial}");
        }
    }

    #[test]
    fn reencoding_generic_signals_reproduces_streams() {
        let code = PiecewisePolyCode::new(14, 1, 2, 9, 1.0).unwrap();
        let mut rng = SeededRng::new(9);
        for trial in 0..60 {
            let x = Signal::from_vec((0..14).map(|_| rng.uniform(0.0, 0.9)).collect()).unwrap();
            let stream = code.encode(&x).unwrap();
            let decoded = code.decode(&stream).unwrap();
            let restream = code.encode(&decoded).unwrap();
            assert_eq!(stream, restream, "trial {trial}");
        }
    }

    #[test]
    fn decode_rejects_malformed() {
        let code = PiecewisePolyCode::new(8, 0, 2, 3, 1.0).unwrap();
        let width = index_bits(8) + 1;
        // split after sentinel
        let mut bad = BitStream::new(KIND_PIECEWISE_POLY);
        bad.write_bits(8, width);
        bad.write_bits(3, width);
        for _ in 0..3 {
            bad.write_bits(0, 3);
        }
        assert!(code.decode(&bad).is_err());
        // descending splits
        let mut bad = BitStream::new(KIND_PIECEWISE_POLY);
        bad.write_bits(5, width);
        bad.write_bits(2, width);
        for _ in 0..3 {
            bad.write_bits(0, 3);
        }
        assert!(code.decode(&bad).is_err());
        // nonzero unused coefficient slot
        let mut bad = BitStream::new(KIND_PIECEWISE_POLY);
        bad.write_bits(8, width);
        bad.write_bits(8, width);
        bad.write_bits(1, 3);
        bad.write_bits(0, 3);
        bad.write_bits(7, 3);
        assert!(code.decode(&bad).is_err());
    }

    #[test]
    fn rejects_unsupported_degree() {
        assert!(PiecewisePolyCode::new(8, MAX_DEGREE + 1, 1, 4, 1.0).is_err());
    }
}
