//! Fixed-width packed bit streams.
//!
//! Streams carry a 16-bit header (code-kind tag and format version)
//! followed by a payload of fixed-width big-endian fields. The payload
//! length in bits is what rate accounting measures; the header is framing.

use crate::{Error, Result};

pub const STREAM_VERSION: u8 = 1;

/// A packed bit sequence with a code-kind header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    kind_tag: u8,
    version: u8,
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitStream {
    pub fn new(kind_tag: u8) -> Self {
        BitStream {
            kind_tag,
            version: STREAM_VERSION,
            bytes: Vec::new(),
            bit_len: 0,
        }
    }

    /// Wraps raw bytes as an opaque payload (used by the external codec
    /// adapter, whose payload is whatever the codec produced).
    pub fn from_payload_bytes(kind_tag: u8, bytes: Vec<u8>) -> Self {
        let bit_len = bytes.len() * 8;
        BitStream {
            kind_tag,
            version: STREAM_VERSION,
            bytes,
            bit_len,
        }
    }

    pub fn kind_tag(&self) -> u8 {
        self.kind_tag
    }

    pub fn version(&self) -> u8 {
        self.version
    }

    /// Payload length in bits (header excluded).
    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn payload_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        assert!(width <= 64);
        debug_assert!(width == 64 || value < (1u64 << width), "value overflows field");
        for i in (0..width).rev() {
            let bit = (value >> i) & 1;
            let offset = self.bit_len % 8;
            if offset == 0 {
                self.bytes.push(0);
            }
            if bit == 1 {
                *self.bytes.last_mut().unwrap() |= 1 << (7 - offset);
            }
            self.bit_len += 1;
        }
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader {
            stream: self,
            cursor: 0,
        }
    }

    /// Serialized form: 2-byte header then payload bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + self.bytes.len());
        out.push(self.kind_tag);
        out.push(self.version);
        out.extend_from_slice(&self.bytes);
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::Decode("stream shorter than its header".into()));
        }
        let version = data[1];
        if version != STREAM_VERSION {
            return Err(Error::Decode(format!("unsupported stream version {version}")));
        }
        Ok(BitStream {
            kind_tag: data[0],
            version,
            bytes: data[2..].to_vec(),
            bit_len: (data.len() - 2) * 8,
        })
    }

    /// Checks the header against the decoding code's tag.
    pub fn expect_kind(&self, tag: u8, what: &str) -> Result<()> {
        if self.kind_tag != tag {
            return Err(Error::Decode(format!(
                "stream kind tag {} does not belong to {what}",
                self.kind_tag
            )));
        }
        Ok(())
    }
}

/// Cursor over a stream's payload.
pub struct BitReader<'a> {
    stream: &'a BitStream,
    cursor: usize,
}

impl BitReader<'_> {
    /// Reads a big-endian field of `width` bits.
    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        assert!(width <= 64);
        if self.cursor + width as usize > self.stream.bit_len {
            return Err(Error::Decode(format!(
                "stream ends inside a {width}-bit field at bit {}",
                self.cursor
            )));
        }
        let mut value = 0u64;
        for _ in 0..width {
            let byte = self.stream.bytes[self.cursor / 8];
            let bit = (byte >> (7 - self.cursor % 8)) & 1;
            value = (value << 1) | bit as u64;
            self.cursor += 1;
        }
        Ok(value)
    }

    pub fn remaining_bits(&self) -> usize {
        self.stream.bit_len - self.cursor
    }
}

/// Width in bits needed to index `0..n` (0 when n == 1).
pub fn index_bits(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u32
    }
}
