//! Reconstruction quality metrics: MSE, PSNR, measurement SNR, and the
//! normalized l2 error.
//!
//! PSNR and SNR are reported in base-10 decibels with a fixed grayscale
//! peak of 255.

use crate::{Error, Result, Signal};

/// Peak value used by [`psnr`] (8-bit grayscale convention).
pub const PEAK_VALUE: f64 = 255.0;

/// Mean squared error `(1/n) * sum_i (x_i - xhat_i)^2`.
pub fn mse(x: &Signal, xhat: &Signal) -> Result<f64> {
    x.check_same_len(xhat)?;
    let n = x.len() as f64;
    Ok(x.iter()
        .zip(xhat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio `20*log10(255/sqrt(mse))` in dB; infinite
/// when `mse` is zero.
pub fn psnr(mse: f64) -> Result<f64> {
    if mse < 0.0 {
        return Err(Error::domain(format!("mse must be nonnegative, got {mse}")));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (PEAK_VALUE / mse.sqrt()).log10())
}

/// Signal-to-noise ratio `20*log10(||clean|| / ||noise||)` in dB.
///
/// Infinite when the noise is identically zero and the clean part is not;
/// both parts zero is a degenerate input.
pub fn measurement_snr(clean: &Signal, noise: &Signal) -> Result<f64> {
    clean.check_same_len(noise)?;
    let nc = clean.norm_l2();
    let nn = noise.norm_l2();
    if nn == 0.0 {
        if nc == 0.0 {
            return Err(Error::DegenerateInput(
                "snr undefined: clean and noise both zero".into(),
            ));
        }
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (nc / nn).log10())
}

/// Per-dimension l2 error `(1/sqrt(n)) * ||x - reference||_2`.
pub fn normalized_error(x: &Signal, reference: &Signal) -> Result<f64> {
    x.check_same_len(reference)?;
    Ok(x.distance_l2(reference)? / (x.len() as f64).sqrt())
}

/// Bundle of the four quality figures for a reconstruction.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr_db: f64,
    pub snr_db: f64,
    pub normalized_error: f64,
}

impl QualityReport {
    /// Compares a reconstruction `xhat` against the reference `x`.
    pub fn compare(x: &Signal, xhat: &Signal) -> Result<QualityReport> {
        let mse_value = mse(x, xhat)?;
        let snr_db = if mse_value == 0.0 {
            f64::INFINITY
        } else {
            measurement_snr(x, &x.sub(xhat)?)?
        };
        Ok(QualityReport {
            mse: mse_value,
            psnr_db: psnr(mse_value)?,
            snr_db,
            normalized_error: normalized_error(x, xhat)?,
        })
    }
}
