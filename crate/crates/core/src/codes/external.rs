//! Subprocess adapter for external compression codecs.
//!
//! The adapter shells out to user-supplied encode and decode commands.
//! Command templates are split on whitespace and the placeholders `{in}`
//! and `{out}` are substituted per token, so no shell is involved.
//! Signals cross the boundary either losslessly (`.f64v`) or as 8-bit
//! binary PGM. Temp files live in a configurable directory (or the
//! system default) and are removed when a call succeeds.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::bitstream::BitStream;
use super::{CompressionCode, KIND_EXTERNAL};
use crate::{io, Error, Result, Signal};

/// Exchange format between this process and the codec commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeFormat {
    /// Lossless length-prefixed doubles.
    F64v,
    /// 8-bit binary PGM, one row; values clamped/rounded to 0..255.
    Pgm,
}

impl ExchangeFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExchangeFormat::F64v => "f64v",
            ExchangeFormat::Pgm => "pgm",
        }
    }
}

/// How to invoke the external codec.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCodecSpec {
    /// Encode command template with `{in}` and `{out}` placeholders.
    pub encode_cmd: String,
    /// Decode command template with `{in}` and `{out}` placeholders.
    pub decode_cmd: String,
    pub format: ExchangeFormat,
    pub timeout: Duration,
    /// Base directory for temp files; defaults to `CGD_TMPDIR` or the
    /// system temp directory.
    pub temp_dir: Option<PathBuf>,
}

/// An external codec bound to a fixed signal length.
#[derive(Debug, Clone)]
pub struct ExternalCodec {
    spec: ExternalCodecSpec,
    n: usize,
}

impl ExternalCodec {
    pub fn new(spec: ExternalCodecSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("signal length must be >= 1"));
        }
        if spec.encode_cmd.trim().is_empty() || spec.decode_cmd.trim().is_empty() {
            return Err(Error::Codec("empty command template".into()));
        }
        Ok(ExternalCodec { spec, n })
    }

    fn temp_dir(&self) -> Result<tempfile::TempDir> {
        let base = self
            .spec
            .temp_dir
            .clone()
            .or_else(|| std::env::var_os("CGD_TMPDIR").map(PathBuf::from))
            .unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&base)?;
        tempfile::Builder::new()
            .prefix("cgd-codec-")
            .tempdir_in(base)
            .map_err(|e| Error::Codec(format!("cannot create temp dir: {e}")))
    }

    fn write_signal(&self, path: &Path, x: &Signal) -> Result<()> {
        match self.spec.format {
            ExchangeFormat::F64v => io::write_f64v_file(path, x.as_slice()),
            ExchangeFormat::Pgm => {
                let image = io::PgmImage::from_signal(x, x.len(), 1)?;
                io::write_pgm_file(path, &image)
            }
        }
    }

    fn read_signal(&self, path: &Path) -> Result<Signal> {
        let values = match self.spec.format {
            ExchangeFormat::F64v => io::read_f64v_file(path)?,
            ExchangeFormat::Pgm => io::read_pgm_file(path)?.to_signal()?.into_vec(),
        };
        let signal = Signal::from_vec(values)
            .map_err(|e| Error::Codec(format!("codec output is not a valid signal: {e}")))?;
        if signal.len() != self.n {
            return Err(Error::Codec(format!(
                "codec returned length {}, expected {}",
                signal.len(),
                self.n
            )));
        }
        Ok(signal)
    }

    fn run_command(&self, template: &str, input: &Path, output: &Path) -> Result<()> {
        let tokens: Vec<String> = template
            .split_whitespace()
            .map(|t| {
                t.replace("{in}", &input.display().to_string())
                    .replace("{out}", &output.display().to_string())
            })
            .collect();
        let (program, args) = tokens
            .split_first()
            .ok_or_else(|| Error::Codec("empty command template".into()))?;

        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Codec(format!("cannot spawn {program:?}: {e}")))?;

        let deadline = Instant::now() + self.spec.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(Error::Codec(format!(
                            "command {program:?} timed out after {:?}",
                            self.spec.timeout
                        )));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(Error::Codec(format!("waiting on {program:?}: {e}"))),
            }
        };

        if !status.success() {
            let mut stderr = String::new();
            if let Some(mut pipe) = child.stderr.take() {
                use std::io::Read;
                let _ = pipe.read_to_string(&mut stderr);
            }
            return Err(Error::Codec(format!(
                "command {program:?} exited with {status}: {}",
                stderr.trim()
            )));
        }
        Ok(())
    }
}

impl CompressionCode for ExternalCodec {
    fn len(&self) -> usize {
        self.n
    }

    fn encode(&self, x: &Signal) -> Result<BitStream> {
        x.check_len(self.n, "external encode")?;
        let dir = self.temp_dir()?;
        let raw = dir.path().join(format!("input.{}", self.spec.format.extension()));
        let compressed = dir.path().join("compressed.bin");
        self.write_signal(&raw, x)?;
        self.run_command(&self.spec.encode_cmd, &raw, &compressed)?;
        let bytes = std::fs::read(&compressed)
            .map_err(|e| Error::Codec(format!("encode produced no output: {e}")))?;
        Ok(BitStream::from_payload_bytes(KIND_EXTERNAL, bytes))
    }

    fn decode(&self, bits: &BitStream) -> Result<Signal> {
        bits.expect_kind(KIND_EXTERNAL, "external codec")?;
        let dir = self.temp_dir()?;
        let compressed = dir.path().join("compressed.bin");
        let restored = dir.path().join(format!("output.{}", self.spec.format.extension()));
        std::fs::write(&compressed, bits.payload_bytes())?;
        self.run_command(&self.spec.decode_cmd, &compressed, &restored)?;
        self.read_signal(&restored)
    }

    fn rate_bits(&self) -> Option<u64> {
        None // whatever the codec produced; measured per stream
    }

    fn distortion_bound(&self) -> Option<f64> {
        None
    }
}
