//! Measurement ensembles.
//!
//! A [`LinearOperator`] is an `m x n` sensing matrix sampled
//! deterministically from `(kind, m, n, sigma_a, seed)`. Dense kinds
//! (Gaussian with unit or `1/n` entry variance, Rademacher) materialize
//! their entries; the partial-DCT kind keeps only the selected row
//! indices and evaluates the orthonormal DCT-II directly, which is exact
//! and fast enough at the problem sizes this crate targets.

use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, SeededRng};
use crate::{Error, Result, Signal};

/// Anything that can act as a measurement map in the solver.
pub trait LinearMap {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &Signal) -> Result<Signal>;
    /// `x = A^T y`.
    fn adjoint(&self, y: &Signal) -> Result<Signal>;
}

/// Supported ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// i.i.d. N(0, sigma_a^2) entries.
    #[serde(rename = "gaussian-unit")]
    GaussianUnit,
    /// i.i.d. N(0, sigma_a^2 / n) entries.
    #[serde(rename = "gaussian-over-n")]
    GaussianOverN,
    /// i.i.d. +/- sigma_a entries.
    #[serde(rename = "rademacher")]
    Rademacher,
    /// m distinct rows of the n x n orthonormal DCT-II, scaled by sigma_a.
    #[serde(rename = "partial-dct")]
    PartialDct,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::GaussianUnit => "gaussian-unit",
            OperatorKind::GaussianOverN => "gaussian-over-n",
            OperatorKind::Rademacher => "rademacher",
            OperatorKind::PartialDct => "partial-dct",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-unit" => Ok(OperatorKind::GaussianUnit),
            "gaussian-over-n" => Ok(OperatorKind::GaussianOverN),
            "rademacher" => Ok(OperatorKind::Rademacher),
            "partial-dct" => Ok(OperatorKind::PartialDct),
            other => Err(Error::Parse(format!("unknown operator kind {other:?}"))),
        }
    }
}

/// Persisted operator metadata; the matrix itself is regenerated from the
/// seed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorRecord {
    pub kind: OperatorKind,
    pub m: usize,
    pub n: usize,
    pub sigma_a: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_index_set: Option<Vec<usize>>,
}

/// A sampled measurement matrix.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    kind: OperatorKind,
    m: usize,
    n: usize,
    sigma_a: f64,
    seed: u64,
    /// Row-major entries for the dense kinds.
    entries: Option<Vec<f64>>,
    /// Selected DCT row indices (sorted ascending) for partial-DCT.
    rows_selected: Option<Vec<usize>>,
}

// Stream index for the deterministic power-iteration start vector.
const POWER_STREAM: u64 = 0x5EC7;

impl LinearOperator {
    /// Samples an operator. The same arguments always reproduce the same
    /// operator, entry for entry.
    pub fn sample(kind: OperatorKind, m: usize, n: usize, sigma_a: f64, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::dim(format!("operator dimensions must be >= 1, got {m}x{n}")));
        }
        if !(sigma_a > 0.0) || !sigma_a.is_finite() {
            return Err(Error::domain(format!("sigma_a must be positive, got {sigma_a}")));
        }
        let mut rng = SeededRng::new(seed);
        let mut op = LinearOperator {
            kind,
            m,
            n,
            sigma_a,
            seed,
            entries: None,
            rows_selected: None,
        };
        match kind {
            OperatorKind::GaussianUnit => {
                op.entries = Some((0..m * n).map(|_| sigma_a * rng.normal()).collect());
            }
            OperatorKind::GaussianOverN => {
                let scale = sigma_a / (n as f64).sqrt();
                op.entries = Some((0..m * n).map(|_| scale * rng.normal()).collect());
            }
            OperatorKind::Rademacher => {
                op.entries = Some((0..m * n).map(|_| sigma_a * rng.rademacher()).collect());
            }
            OperatorKind::PartialDct => {
                if m > n {
                    return Err(Error::InfeasibleSelection(format!(
                        "partial-dct needs m <= n, got m={m}, n={n}"
                    )));
                }
                op.rows_selected = Some(rng.distinct_indices(m, n));
            }
        }
        Ok(op)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_a(&self) -> f64 {
        self.sigma_a
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Selected DCT rows for the partial-DCT kind.
    pub fn row_index_set(&self) -> Option<&[usize]> {
        self.rows_selected.as_deref()
    }

    /// Raw entry at `(i, j)`; computed on the fly for partial-DCT.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.entries {
            Some(e) => e[i * self.n + j],
            None => {
                let rows = self.rows_selected.as_ref().expect("partial-dct rows");
                self.sigma_a * dct_entry(rows[i], j, self.n)
            }
        }
    }

    /// Variance of a single matrix entry (averaged over entries for
    /// partial-DCT, whose rows are not i.i.d.).
    pub fn entry_variance(&self) -> f64 {
        let s2 = self.sigma_a * self.sigma_a;
        match self.kind {
            OperatorKind::GaussianUnit | OperatorKind::Rademacher => s2,
            OperatorKind::GaussianOverN | OperatorKind::PartialDct => s2 / self.n as f64,
        }
    }

    /// Default gradient step size `1 / (m * entry variance)`.
    pub fn default_step_size(&self) -> f64 {
        1.0 / (self.m as f64 * self.entry_variance())
    }

    /// Sub-Gaussian norm bound of a single entry, when available in
    /// closed form. Rademacher: `sigma_a / sqrt(ln 2)`; Gaussian:
    /// `sigma * sqrt(8/3)`.
    pub fn psi2_bound(&self) -> Option<f64> {
        match self.kind {
            OperatorKind::Rademacher => Some(self.sigma_a / std::f64::consts::LN_2.sqrt()),
            OperatorKind::GaussianUnit => Some(self.sigma_a * (8.0f64 / 3.0).sqrt()),
            OperatorKind::GaussianOverN => {
                Some(self.sigma_a / (self.n as f64).sqrt() * (8.0f64 / 3.0).sqrt())
            }
            OperatorKind::PartialDct => None,
        }
    }

    /// Power-iteration estimate of the largest singular value. The start
    /// vector is derived from the operator seed, so the estimate is
    /// reproducible. Converges when successive estimates differ by less
    /// than `tol` relatively; the result is a lower bound on the true
    /// value up to that tolerance.
    pub fn spectral_norm(&self, max_iters: usize, tol: f64) -> SpectralNormEstimate {
        assert!(max_iters >= 1 && tol > 0.0);
        let mut rng = SeededRng::new(derive_seed(self.seed, POWER_STREAM));
        let mut v = rng.normal_vec(self.n);
        normalize(&mut v);
        let mut estimate = 0.0f64;
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..max_iters {
            iterations += 1;
            let u = self.apply_slice(&v);
            let sigma = l2(&u);
            if sigma == 0.0 {
                // v is in the null space; the estimate stays at zero.
                converged = true;
                estimate = 0.0;
                break;
            }
            let mut w = self.adjoint_slice(&u);
            normalize(&mut w);
            v = w;
            if estimate > 0.0 && (sigma - estimate).abs() <= tol * sigma {
                estimate = sigma;
                converged = true;
                break;
            }
            estimate = sigma;
        }
        SpectralNormEstimate {
            value: estimate,
            converged,
            iterations,
        }
    }

    /// Metadata record for persistence.
    pub fn to_record(&self) -> OperatorRecord {
        OperatorRecord {
            kind: self.kind,
            m: self.m,
            n: self.n,
            sigma_a: self.sigma_a,
            seed: self.seed,
            row_index_set: self.rows_selected.clone(),
        }
    }

    /// Regenerates an operator from a record, verifying that the recorded
    /// row set matches what the seed regenerates.
    pub fn from_record(record: &OperatorRecord) -> Result<Self> {
        let op = LinearOperator::sample(record.kind, record.m, record.n, record.sigma_a, record.seed)?;
        if let Some(recorded) = &record.row_index_set {
            if op.rows_selected.as_ref() != Some(recorded) {
                return Err(Error::Parse(
                    "recorded row_index_set does not match the seed's regeneration".into(),
                ));
            }
        }
        Ok(op)
    }

    fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        match &self.entries {
            Some(entries) => (0..self.m)
                .map(|i| {
                    let row = &entries[i * self.n..(i + 1) * self.n];
                    row.iter().zip(x).map(|(a, b)| a * b).sum()
                })
                .collect(),
            None => {
                let rows = self.rows_selected.as_ref().expect("partial-dct rows");
                rows.iter()
                    .map(|&r| {
                        self.sigma_a
                            * x.iter()
                                .enumerate()
                                .map(|(j, &xj)| dct_entry(r, j, self.n) * xj)
                                .sum::<f64>()
                    })
                    .collect()
            }
        }
    }

    fn adjoint_slice(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        match &self.entries {
            Some(entries) => {
                for (i, &yi) in y.iter().enumerate() {
                    let row = &entries[i * self.n..(i + 1) * self.n];
                    for (o, &a) in out.iter_mut().zip(row) {
                        *o += a * yi;
                    }
                }
            }
            None => {
                let rows = self.rows_selected.as_ref().expect("partial-dct rows");
                for (i, &r) in rows.iter().enumerate() {
                    let yi = self.sigma_a * y[i];
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += dct_entry(r, j, self.n) * yi;
                    }
                }
            }
        }
        out
    }
}

impl LinearMap for LinearOperator {
    fn rows(&self) -> usize {
        self.m
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &Signal) -> Result<Signal> {
        x.check_len(self.n, "operator apply")?;
        Signal::from_vec(self.apply_slice(x.as_slice()))
    }

    fn adjoint(&self, y: &Signal) -> Result<Signal> {
        y.check_len(self.m, "operator adjoint")?;
        Signal::from_vec(self.adjoint_slice(y.as_slice()))
    }
}

/// Result of [`LinearOperator::spectral_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Entry `(r, j)` of the n x n orthonormal DCT-II matrix.
fn dct_entry(r: usize, j: usize, n: usize) -> f64 {
    let n_f = n as f64;
    let w = if r == 0 {
        (1.0 / n_f).sqrt()
    } else {
        (2.0 / n_f).sqrt()
    };
    w * (std::f64::consts::PI * r as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n_f)).cos()
}

/// Additive Gaussian noise calibrated to hit an exact measurement SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Target SNR in dB; `f64::INFINITY` means noiseless.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless(seed: u64) -> Self {
        NoiseSpec {
            snr_db: f64::INFINITY,
            seed,
        }
    }
}

/// Draws i.i.d. standard normals `g` and scales them by `c` so that
/// `20*log10(||y_clean|| / ||c*g||)` equals `spec.snr_db` exactly.
/// Returns the noisy measurements and the effective noise scale `c`.
pub fn add_noise_at_snr(y_clean: &Signal, spec: &NoiseSpec) -> Result<(Signal, f64)> {
    if spec.snr_db == f64::INFINITY {
        return Ok((y_clean.clone(), 0.0));
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::domain(format!("snr_db must be finite or +inf, got {}", spec.snr_db)));
    }
    let clean_norm = y_clean.norm_l2();
    if clean_norm == 0.0 {
        return Err(Error::DegenerateInput(
            "cannot calibrate noise against a zero measurement vector".into(),
        ));
    }
    let mut rng = SeededRng::new(spec.seed);
    let g = Signal::from_vec(rng.normal_vec(y_clean.len()))?;
    let g_norm = g.norm_l2();
    if g_norm == 0.0 {
        return Err(Error::DegenerateInput("degenerate zero noise draw".into()));
    }
    let target_norm = clean_norm * 10f64.powf(-spec.snr_db / 20.0);
    let c = target_norm / g_norm;
    Ok((y_clean.add_scaled(c, &g)?, c))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let norm = l2(v);
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::measurement_snr;

    fn probe(rng: &mut SeededRng, len: usize) -> Signal {
        Signal::from_vec(rng.normal_vec(len)).unwrap()
    }

    #[test]
    fn same_seed_same_operator() {
        for kind in [
            OperatorKind::GaussianUnit,
            OperatorKind::GaussianOverN,
            OperatorKind::Rademacher,
            OperatorKind::PartialDct,
        ] {
            let a = LinearOperator::sample(kind, 6, 9, 1.3, 42).unwrap();
            let b = LinearOperator::sample(kind, 6, 9, 1.3, 42).unwrap();
            for i in 0..6 {
                for j in 0..9 {
                    assert_eq!(a.entry(i, j).to_bits(), b.entry(i, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn gaussian_unit_moments() {
        let op = LinearOperator::sample(OperatorKind::GaussianUnit, 200, 200, 1.0, 7).unwrap();
        let count = 200 * 200;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..200 {
            for j in 0..200 {
                let e = op.entry(i, j);
                sum += e;
                sum_sq += e * e;
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean={mean}");
        assert!((var - 1.0).abs() < 0.05, "var={var}");
    }

    #[test]
    fn rademacher_magnitudes_exact() {
        let sigma = 0.7;
        let op = LinearOperator::sample(OperatorKind::Rademacher, 8, 11, sigma, 5).unwrap();
        for i in 0..8 {
            for j in 0..11 {
                assert_eq!(op.entry(i, j).abs(), sigma);
            }
        }
        let k = op.psi2_bound().unwrap();
        assert!((k - 1.2011 * sigma).abs() < 1e-4 * sigma);
    }

    #[test]
    fn adjoint_identity_all_kinds() {
        let mut rng = SeededRng::new(99);
        for kind in [
            OperatorKind::GaussianUnit,
            OperatorKind::GaussianOverN,
            OperatorKind::Rademacher,
            OperatorKind::PartialDct,
        ] {
            let op = LinearOperator::sample(kind, 13, 29, 1.1, 3).unwrap();
            for _ in 0..25 {
                let x = probe(&mut rng, 29);
                let y = probe(&mut rng, 13);
                let lhs = op.apply(&x).unwrap().dot(&y).unwrap();
                let rhs = x.dot(&op.adjoint(&y).unwrap()).unwrap();
                let scale = lhs.abs().max(rhs.abs()).max(1e-300);
                assert!((lhs - rhs).abs() / scale < 1e-10);
            }
        }
    }

    #[test]
    fn linearity() {
        let mut rng = SeededRng::new(4);
        let op = LinearOperator::sample(OperatorKind::GaussianOverN, 10, 17, 1.0, 8).unwrap();
        for _ in 0..20 {
            let x = probe(&mut rng, 17);
            let w = probe(&mut rng, 17);
            let (a, b) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
            let combo = x.scale(a).unwrap().add_scaled(b, &w).unwrap();
            let lhs = op.apply(&combo).unwrap();
            let rhs = op
                .apply(&x)
                .unwrap()
                .scale(a)
                .unwrap()
                .add_scaled(b, &op.apply(&w).unwrap())
                .unwrap();
            let scale = lhs.norm_l2().max(1e-300);
            assert!(lhs.sub(&rhs).unwrap().norm_l2() / scale < 1e-12);
        }
    }

    #[test]
    fn partial_dct_rows_orthonormal() {
        let op = LinearOperator::sample(OperatorKind::PartialDct, 7, 24, 1.0, 21).unwrap();
        // A A^T = I_m via adjoint(e_i) inner products.
        for i in 0..7 {
            let mut ei = vec![0.0; 7];
            ei[i] = 1.0;
            let ai = op.adjoint(&Signal::from_vec(ei).unwrap()).unwrap();
            for j in 0..7 {
                let mut ej = vec![0.0; 7];
                ej[j] = 1.0;
                let aj = op.adjoint(&Signal::from_vec(ej).unwrap()).unwrap();
                let dot = ai.dot(&aj).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_dct_is_orthonormal_transform() {
        let n = 16;
        let op = LinearOperator::sample(OperatorKind::PartialDct, n, n, 1.0, 2).unwrap();
        let mut rng = SeededRng::new(12);
        let x = probe(&mut rng, n);
        let back = op.adjoint(&op.apply(&x).unwrap()).unwrap();
        assert!(x.sub(&back).unwrap().norm_l2() < 1e-10);
    }

    #[test]
    fn partial_dct_infeasible_selection() {
        let err = LinearOperator::sample(OperatorKind::PartialDct, 10, 4, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSelection(_)));
    }

    #[test]
    fn spectral_norm_partial_dct_is_sigma() {
        let op = LinearOperator::sample(OperatorKind::PartialDct, 9, 32, 1.0, 77).unwrap();
        let est = op.spectral_norm(200, 1e-12);
        assert!(est.converged);
        assert!((est.value - 1.0).abs() < 1e-8, "value={}", est.value);
    }

    #[test]
    fn spectral_norm_one_by_one() {
        let op = LinearOperator::sample(OperatorKind::GaussianUnit, 1, 1, 1.0, 5).unwrap();
        let est = op.spectral_norm(50, 1e-12);
        assert!((est.value - op.entry(0, 0).abs()).abs() < 1e-12);
    }

    #[test]
    fn noise_calibration_exact() {
        let mut rng = SeededRng::new(31);
        let y = probe(&mut rng, 40);
        for snr in [20.0, 10.0, 3.5, -4.0] {
            let (noisy, c) = add_noise_at_snr(&y, &NoiseSpec { snr_db: snr, seed: 9 }).unwrap();
            assert!(c > 0.0);
            let z = noisy.sub(&y).unwrap();
            let realized = measurement_snr(&y, &z).unwrap();
            assert!((realized - snr).abs() < 1e-9, "snr={snr} realized={realized}");
            if snr == 20.0 {
                assert!((z.norm_l2() - y.norm_l2() / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_infinite_snr_is_identity() {
        let y = Signal::from_vec(vec![1.0, -2.0]).unwrap();
        let (noisy, c) = add_noise_at_snr(&y, &NoiseSpec::noiseless(4)).unwrap();
        assert_eq!(noisy, y);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn noise_zero_clean_is_degenerate() {
        let y = Signal::zeros(5).unwrap();
        let err = add_noise_at_snr(&y, &NoiseSpec { snr_db: 10.0, seed: 0 }).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn record_round_trip() {
        let op = LinearOperator::sample(OperatorKind::PartialDct, 5, 12, 1.0, 3).unwrap();
        let record = op.to_record();
        let text = serde_json::to_string(&record).unwrap();
        let parsed: OperatorRecord = serde_json::from_str(&text).unwrap();
        let back = LinearOperator::from_record(&parsed).unwrap();
        assert_eq!(back.row_index_set(), op.row_index_set());
        let mut bad = record.clone();
        bad.row_index_set = Some(vec![0, 1, 2, 3, 5]);
        assert!(LinearOperator::from_record(&bad).is_err());
    }
}
