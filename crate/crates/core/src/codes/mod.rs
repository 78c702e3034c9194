//! Lossy compression codes and the projection contract.
//!
//! A code maps signals to fixed-rate bit streams and back. Composing
//! encode with decode acts as a projection onto the code's codebook: the
//! round trip is idempotent, and on the code's declared domain the
//! projection error is bounded by the code's distortion.

mod bitstream;
mod external;
mod poly;
mod sparse;

pub use bitstream::{index_bits, BitReader, BitStream, STREAM_VERSION};
pub use external::{ExchangeFormat, ExternalCodec, ExternalCodecSpec};
pub use poly::PiecewisePolyCode;
pub use sparse::{RateReport, SparseQuantCode};

use crate::{Result, Signal};

/// Stream header tags.
pub const KIND_SPARSE: u8 = 1;
pub const KIND_PIECEWISE_POLY: u8 = 2;
pub const KIND_EXTERNAL: u8 = 3;

/// Encode/decode/projection contract shared by every code.
pub trait CompressionCode {
    /// Signal length this code operates on.
    fn len(&self) -> usize;

    fn encode(&self, x: &Signal) -> Result<BitStream>;

    fn decode(&self, bits: &BitStream) -> Result<Signal>;

    /// Declared rate in bits, when the code has a fixed-width layout.
    fn rate_bits(&self) -> Option<u64>;

    /// Declared worst-case round-trip distortion on the code's domain,
    /// when known in closed form.
    fn distortion_bound(&self) -> Option<f64>;

    /// Codebook projection: one encode/decode round trip.
    fn project(&self, x: &Signal) -> Result<Signal> {
        self.decode(&self.encode(x)?)
    }
}

impl<C: CompressionCode + ?Sized> CompressionCode for &C {
    fn len(&self) -> usize {
        (**self).len()
    }

    fn encode(&self, x: &Signal) -> Result<BitStream> {
        (**self).encode(x)
    }

    fn decode(&self, bits: &BitStream) -> Result<Signal> {
        (**self).decode(bits)
    }

    fn rate_bits(&self) -> Option<u64> {
        (**self).rate_bits()
    }

    fn distortion_bound(&self) -> Option<f64> {
        (**self).distortion_bound()
    }
}

impl CompressionCode for Box<dyn CompressionCode> {
    fn len(&self) -> usize {
        (**self).len()
    }

    fn encode(&self, x: &Signal) -> Result<BitStream> {
        (**self).encode(x)
    }

    fn decode(&self, bits: &BitStream) -> Result<Signal> {
        (**self).decode(bits)
    }

    fn rate_bits(&self) -> Option<u64> {
        (**self).rate_bits()
    }

    fn distortion_bound(&self) -> Option<f64> {
        (**self).distortion_bound()
    }
}
