//! Real signal vectors.
//!
//! A [`Signal`] is an immutable vector of finite `f64` values. Every
//! constructor rejects NaN and infinities, so downstream numeric code can
//! rely on finiteness without re-checking.

use crate::{Error, Result};

/// An immutable real vector of length `n >= 1` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
}

impl Signal {
    /// Builds a signal, rejecting empty input and non-finite entries.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::dim("signal must have length >= 1"));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        Ok(Signal { values })
    }

    /// All-zero signal of length `n`.
    pub fn zeros(n: usize) -> Result<Self> {
        Signal::from_vec(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Euclidean norm.
    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Signal) -> Result<f64> {
        self.check_same_len(other)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    /// `self - other`.
    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.check_same_len(other)?;
        Signal::from_vec(
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &Signal) -> Result<Signal> {
        self.check_same_len(other)?;
        Signal::from_vec(
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Result<Signal> {
        Signal::from_vec(self.values.iter().map(|v| v * factor).collect())
    }

    /// Euclidean distance to `other`.
    pub fn distance_l2(&self, other: &Signal) -> Result<f64> {
        self.check_same_len(other)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub(crate) fn check_same_len(&self, other: &Signal) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::dim(format!(
                "signal lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, expected: usize, what: &str) -> Result<()> {
        if self.len() != expected {
            return Err(Error::dim(format!(
                "{what}: expected length {expected}, got {}",
                self.len()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Signal {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}

impl<'a> IntoIterator for &'a Signal {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.values.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Signal::from_vec(vec![0.0, f64::NAN]).is_err());
        assert!(Signal::from_vec(vec![f64::INFINITY]).is_err());
        assert!(Signal::from_vec(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn rejects_empty() {
        assert!(Signal::from_vec(vec![]).is_err());
    }

    #[test]
    fn norms_and_arithmetic() {
        let a = Signal::from_vec(vec![3.0, 4.0]).unwrap();
        let b = Signal::from_vec(vec![1.0, 1.0]).unwrap();
        assert_eq!(a.norm_l2(), 5.0);
        assert_eq!(a.dot(&b).unwrap(), 7.0);
        assert_eq!(a.sub(&b).unwrap().as_slice(), &[2.0, 3.0]);
        assert_eq!(a.add_scaled(2.0, &b).unwrap().as_slice(), &[5.0, 6.0]);
    }

    #[test]
    fn length_mismatch() {
        let a = Signal::from_vec(vec![1.0]).unwrap();
        let b = Signal::from_vec(vec![1.0, 2.0]).unwrap();
        assert!(a.dot(&b).is_err());
        assert!(a.sub(&b).is_err());
    }
}
