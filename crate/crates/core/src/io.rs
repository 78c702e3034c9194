//! File formats for signal interchange.
//!
//! `.f64v`: an 8-byte little-endian unsigned length followed by that many
//! little-endian IEEE 754 doubles. Lossless.
//!
//! Binary PGM (P5, 8-bit): used for image-vector interop. Signals are
//! flattened row-major and mapped between `[0, 1]` and `[0, 255]`; the
//! byte quantization loses at most half a gray level per pixel.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result, Signal};

/// Writes values in the `.f64v` layout.
pub fn write_f64v<W: Write>(writer: &mut W, values: &[f64]) -> Result<()> {
    writer.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a `.f64v` payload.
pub fn read_f64v<R: Read>(reader: &mut R) -> Result<Vec<f64>> {
    let mut len_bytes = [0u8; 8];
    reader.read_exact(&mut len_bytes)?;
    let len = u64::from_le_bytes(len_bytes);
    let len = usize::try_from(len).map_err(|_| Error::Parse(format!("length {len} too large")))?;
    let mut values = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        reader.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(values)
}

pub fn write_f64v_file(path: &Path, values: &[f64]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    write_f64v(&mut file, values)
}

pub fn read_f64v_file(path: &Path) -> Result<Vec<f64>> {
    let mut file = std::fs::File::open(path)?;
    read_f64v(&mut file)
}

/// An 8-bit grayscale image in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl PgmImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::dim(format!(
                "pgm dimensions {width}x{height} do not match {} pixels",
                pixels.len()
            )));
        }
        Ok(PgmImage {
            width,
            height,
            pixels,
        })
    }

    /// Maps a signal in `[0, 1]` to gray levels, clamping and rounding.
    pub fn from_signal(signal: &Signal, width: usize, height: usize) -> Result<Self> {
        signal.check_len(width * height, "pgm conversion")?;
        let pixels = signal
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        PgmImage::new(width, height, pixels)
    }

    /// Inverse of [`PgmImage::from_signal`]: gray levels scaled back to `[0, 1]`.
    pub fn to_signal(&self) -> Result<Signal> {
        Signal::from_vec(self.pixels.iter().map(|&p| p as f64 / 255.0).collect())
    }
}

pub fn write_pgm<W: Write>(writer: &mut W, image: &PgmImage) -> Result<()> {
    write!(writer, "P5\n{} {}\n255\n", image.width, image.height)?;
    writer.write_all(&image.pixels)?;
    Ok(())
}

pub fn read_pgm<R: Read>(reader: &mut R) -> Result<PgmImage> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

pub fn write_pgm_file(path: &Path, image: &PgmImage) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    write_pgm(&mut file, image)
}

pub fn read_pgm_file(path: &Path) -> Result<PgmImage> {
    let mut file = std::fs::File::open(path)?;
    read_pgm(&mut file)
}

fn parse_pgm(bytes: &[u8]) -> Result<PgmImage> {
    let mut pos = 0usize;

    // Header tokens separated by whitespace, with '#' comment lines.
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated pgm header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token(bytes)?;
    if magic != "P5" {
        return Err(Error::Parse(format!("expected P5 magic, got {magic:?}")));
    }
    let width: usize = next_token(bytes)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad pgm width: {e}")))?;
    let height: usize = next_token(bytes)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad pgm height: {e}")))?;
    let maxval: usize = next_token(bytes)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad pgm maxval: {e}")))?;
    if maxval != 255 {
        return Err(Error::Parse(format!("only maxval 255 supported, got {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse("pgm dimensions overflow".into()))?;
    if bytes.len() < pos || bytes.len() - pos < expected {
        return Err(Error::Parse("truncated pgm raster".into()));
    }
    PgmImage::new(width, height, bytes[pos..pos + expected].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64v_round_trip() {
        let values = vec![0.0, -1.5, f64::MIN_POSITIVE, 1e300];
        let mut buf = Vec::new();
        write_f64v(&mut buf, &values).unwrap();
        assert_eq!(buf.len(), 8 + 8 * values.len());
        let back = read_f64v(&mut buf.as_slice()).unwrap();
        assert_eq!(values, back);
    }

    #[test]
    fn f64v_truncated_errors() {
        let mut buf = Vec::new();
        write_f64v(&mut buf, &[1.0, 2.0]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_f64v(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let image = PgmImage::new(3, 2, vec![0, 10, 255, 128, 7, 90]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &image).unwrap();
        let back = read_pgm(&mut buf.as_slice()).unwrap();
        assert_eq!(image, back);
    }

    #[test]
    fn pgm_header_comments() {
        let data = b"P5\n# a comment\n2 1\n255\n\x01\x02";
        let image = parse_pgm(data).unwrap();
        assert_eq!((image.width, image.height), (2, 1));
        assert_eq!(image.pixels, vec![1, 2]);
    }

    #[test]
    fn pgm_signal_quantization_error_is_half_level() {
        let signal = Signal::from_vec(vec![0.0, 0.123, 0.5, 0.9999, 1.0, -0.2, 1.3, 0.7]).unwrap();
        let image = PgmImage::from_signal(&signal, 4, 2).unwrap();
        let back = image.to_signal().unwrap();
        for (orig, rec) in signal.iter().zip(back.iter()) {
            let clamped = orig.clamp(0.0, 1.0);
            assert!((clamped - rec).abs() * 255.0 <= 0.5 + 1e-12);
        }
    }
}
