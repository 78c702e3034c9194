//! Convergence-bound evaluators and Monte Carlo tail checks.
//!
//! The solver's per-iteration error bounds are evaluated exactly as
//! closed-form expressions ([`gaussian_step_bound`],
//! [`sub_gaussian_step_bound`]), and the concentration inequalities they
//! rest on are checked empirically: [`tail_check`] samples the relevant
//! random quantity and compares the observed tail frequency against the
//! stated bound plus three-sigma binomial slack, so Monte Carlo noise
//! cannot flip a sound bound into a failure.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::operators::{LinearMap, LinearOperator, OperatorKind};
use crate::rng::SeededRng;
use crate::{Error, Result, Signal};

/// Outcome of one empirical bound check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub theoretical_bound: f64,
    pub empirical_value: f64,
    /// Three-sigma binomial slack at the bound's event probability.
    pub slack: f64,
    pub trials: usize,
    pub pass: bool,
}

impl BoundReport {
    fn from_counts(
        name: &str,
        params: BTreeMap<String, f64>,
        bound: f64,
        violations: usize,
        trials: usize,
    ) -> BoundReport {
        let empirical = violations as f64 / trials as f64;
        let p = bound.clamp(0.0, 1.0);
        let slack = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        BoundReport {
            name: name.to_string(),
            params,
            theoretical_bound: bound,
            empirical_value: empirical,
            slack,
            trials,
            pass: empirical <= bound + slack,
        }
    }
}

/// Contraction coefficient `<u, v> - eta <Au, Av>` on unit vectors.
pub fn mu_coefficient<M: LinearMap + ?Sized>(
    u: &Signal,
    v: &Signal,
    eta: f64,
    op: &M,
) -> Result<f64> {
    for (name, s) in [("u", u), ("v", v)] {
        let norm = s.norm_l2();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "{name} must be unit norm (got ||{name}|| = {norm})"
            )));
        }
    }
    mu_bilinear(u, v, eta, op)
}

/// The same form without the unit-norm requirement; bilinear in (u, v).
pub fn mu_bilinear<M: LinearMap + ?Sized>(
    u: &Signal,
    v: &Signal,
    eta: f64,
    op: &M,
) -> Result<f64> {
    let au = op.apply(u)?;
    let av = op.apply(v)?;
    Ok(u.dot(v)? - eta * au.dot(&av)?)
}

/// Per-iteration error bound under Gaussian measurements:
/// `0.9 prev + 2 (2 + sqrt(n/m))^2 delta + (sigma_z / sigma_a) sqrt(8 (1 + eps) r / m)`.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_step_bound(
    prev_err: f64,
    delta: f64,
    m: usize,
    n: usize,
    r: f64,
    eps: f64,
    sigma_z: f64,
    sigma_a: f64,
) -> f64 {
    let ratio = (n as f64 / m as f64).sqrt();
    0.9 * prev_err
        + 2.0 * (2.0 + ratio) * (2.0 + ratio) * delta
        + sigma_z / sigma_a * (8.0 * (1.0 + eps) * r / m as f64).sqrt()
}

/// Sub-Gaussian analogue of [`gaussian_step_bound`] together with the
/// measurement count the contraction factor requires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubGaussianStepBound {
    pub bound: f64,
    /// `m` must exceed this for the stated contraction `mu0`.
    pub measurements_required: f64,
}

/// `mu0 prev + 8 (1 + 3 K n / (sigma_a^2 m)) delta + (9 K sigma_z / sigma_a^2) sqrt(r (1 + eps) / m)`
/// with requirement `m > 16 K^4 (1 + eps) r / (mu0^2 sigma_a^4 log2 e)`.
#[allow(clippy::too_many_arguments)]
pub fn sub_gaussian_step_bound(
    prev_err: f64,
    mu0: f64,
    k_psi2: f64,
    delta: f64,
    m: usize,
    n: usize,
    r: f64,
    eps: f64,
    sigma_z: f64,
    sigma_a: f64,
) -> Result<SubGaussianStepBound> {
    if !(mu0 > 0.0 && mu0 < 1.0) {
        return Err(Error::domain(format!("mu0 must be in (0, 1), got {mu0}")));
    }
    let sa2 = sigma_a * sigma_a;
    if mu0 * sa2 > 2.0 * k_psi2 * k_psi2 {
        return Err(Error::domain(format!(
            "need mu0 sigma_a^2 <= 2 K^2, got {} > {}",
            mu0 * sa2,
            2.0 * k_psi2 * k_psi2
        )));
    }
    let bound = mu0 * prev_err
        + 8.0 * (1.0 + 3.0 * k_psi2 * n as f64 / (sa2 * m as f64)) * delta
        + 9.0 * k_psi2 * sigma_z / sa2 * (r * (1.0 + eps) / m as f64).sqrt();
    let measurements_required =
        16.0 * k_psi2.powi(4) * (1.0 + eps) * r / (mu0 * mu0 * sa2 * sa2 * std::f64::consts::E.log2());
    Ok(SubGaussianStepBound {
        bound,
        measurements_required,
    })
}

/// Optimal large-deviation exponent for the inner-product concentration
/// event: `f(t) = min over u in [-1, 1] of sup over s in (0, 1/(1-u))`
/// of `s (t - u) + 0.5 ln((1 + s u)^2 - s^2)`, evaluated numerically by a
/// grid scan with golden-section refinement on each axis. The inner
/// objective tends to 0 as `s` tends to 0, so the inner sup (and hence
/// the result) is never negative. Absolute accuracy about 1e-6.
pub fn tail_exponent(t: f64) -> f64 {
    assert!(t >= 0.0, "tail exponent is defined for t >= 0");
    const EDGE: f64 = 1e-9;
    let inner = |u: f64| -> f64 {
        let s_max = (1.0 - EDGE) / (1.0 - u);
        // The admissible interval can span many orders of magnitude (it
        // blows up as u approaches 1), so scan log-spaced step sizes.
        let g_log = |ln_s: f64| -> f64 {
            let s = ln_s.exp();
            let term = (1.0 + s * u) * (1.0 + s * u) - s * s;
            if term <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s * (t - u) + 0.5 * term.ln()
        };
        let lo = (1e-12f64).ln();
        let hi = (s_max * (1.0 - EDGE)).ln();
        let refined = grid_then_golden(g_log, lo, hi, 400, true);
        // s -> 0 contributes the limit value 0.
        refined.max(0.0)
    };
    grid_then_golden(inner, -1.0 + EDGE, 1.0 - EDGE, 200, false)
}

/// Coarse grid scan followed by golden-section refinement between the
/// best grid point's neighbors. `maximize` flips the sense.
fn grid_then_golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize, maximize: bool) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    let h = |x: f64| sign * f(x);
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    let step = (hi - lo) / grid as f64;
    for i in 0..=grid {
        let x = lo + step * i as f64;
        let v = h(x);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let mut a = lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_idx + 1) as f64).min(hi);
    // Golden-section search on [a, b].
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = h(x1);
    let mut f2 = h(x2);
    for _ in 0..70 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = h(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = h(x2);
        }
    }
    let refined = f1.min(f2);
    sign * refined.min(best_val)
}

/// Which concentration inequality to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailCheckKind {
    /// Lower tail of a chi-square sum: `P(sum <= m (1 - tau))`.
    ChiSquareLower,
    /// Upper tail of a chi-square sum: `P(sum > m (1 + tau))`.
    ChiSquareUpper,
    /// Largest singular value of a unit-variance Gaussian matrix:
    /// `P(sigma_max >= (1 + t) sqrt(m) + sqrt(n))`.
    GaussianSigmaMax,
    /// Contraction coefficient under a Rademacher ensemble:
    /// `P(mu(u, v, 1/(m sigma_a^2)) >= t)` on random unit pairs.
    SubGaussianMu,
}

impl TailCheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            TailCheckKind::ChiSquareLower => "lemma7_lower",
            TailCheckKind::ChiSquareUpper => "lemma7_upper",
            TailCheckKind::GaussianSigmaMax => "corollary2_sigma_max",
            TailCheckKind::SubGaussianMu => "lemma10_subgauss",
        }
    }

    pub fn all() -> [TailCheckKind; 4] {
        [
            TailCheckKind::ChiSquareLower,
            TailCheckKind::ChiSquareUpper,
            TailCheckKind::GaussianSigmaMax,
            TailCheckKind::SubGaussianMu,
        ]
    }
}

impl std::str::FromStr for TailCheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TailCheckKind::all()
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

/// Parameters shared by the tail checks; each check reads the fields it
/// needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheckParams {
    pub m: usize,
    pub n: usize,
    pub tau: f64,
    pub t: f64,
    pub sigma_a: f64,
}

impl Default for TailCheckParams {
    fn default() -> Self {
        TailCheckParams {
            m: 20,
            n: 50,
            tau: 0.5,
            t: 1.0,
            sigma_a: 1.0,
        }
    }
}

/// Runs `trials` seeded experiments for the chosen inequality and
/// reports the empirical tail frequency against the bound. Trials run
/// concurrently on child seeds, so the report is deterministic in
/// `(kind, params, trials, seed)`.
pub fn tail_check(
    kind: TailCheckKind,
    params: &TailCheckParams,
    trials: usize,
    seed: u64,
) -> Result<BoundReport> {
    if trials < 100 {
        return Err(Error::domain(format!("need at least 100 trials, got {trials}")));
    }
    let root = SeededRng::new(seed);
    let mut report_params = BTreeMap::new();
    report_params.insert("m".into(), params.m as f64);

    match kind {
        TailCheckKind::ChiSquareLower => {
            let (m, tau) = (params.m, params.tau);
            if !(0.0 < tau && tau < 1.0) {
                return Err(Error::domain(format!("tau must be in (0, 1), got {tau}")));
            }
            let bound = ((m as f64 / 2.0) * (tau + (1.0 - tau).ln())).exp();
            let threshold = m as f64 * (1.0 - tau);
            let violations = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    let mut rng = root.child(i as u64);
                    let sum: f64 = (0..m).map(|_| rng.normal().powi(2)).sum();
                    sum <= threshold
                })
                .count();
            report_params.insert("tau".into(), tau);
            Ok(BoundReport::from_counts(kind.name(), report_params, bound, violations, trials))
        }
        TailCheckKind::ChiSquareUpper => {
            let (m, tau) = (params.m, params.tau);
            if !(tau > 0.0) {
                return Err(Error::domain(format!("tau must be positive, got {tau}")));
            }
            let bound = (-(m as f64 / 2.0) * (tau - (1.0 + tau).ln())).exp();
            let threshold = m as f64 * (1.0 + tau);
            let violations = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    let mut rng = root.child(i as u64);
                    let sum: f64 = (0..m).map(|_| rng.normal().powi(2)).sum();
                    sum > threshold
                })
                .count();
            report_params.insert("tau".into(), tau);
            Ok(BoundReport::from_counts(kind.name(), report_params, bound, violations, trials))
        }
        TailCheckKind::GaussianSigmaMax => {
            let (m, n, t) = (params.m, params.n, params.t);
            if !(t > 0.0) {
                return Err(Error::domain(format!("t must be positive, got {t}")));
            }
            let bound = (-(m as f64) * t * t / 2.0).exp();
            let threshold = (1.0 + t) * (m as f64).sqrt() + (n as f64).sqrt();
            let violations = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    let op_seed = root.child(i as u64).seed();
                    let op =
                        LinearOperator::sample(OperatorKind::GaussianUnit, m, n, 1.0, op_seed)
                            .expect("valid dimensions");
                    op.spectral_norm(300, 1e-9).value >= threshold
                })
                .count();
            report_params.insert("n".into(), n as f64);
            report_params.insert("t".into(), t);
            Ok(BoundReport::from_counts(kind.name(), report_params, bound, violations, trials))
        }
        TailCheckKind::SubGaussianMu => {
            let (m, n, t, sigma_a) = (params.m, params.n, params.t, params.sigma_a);
            if !(t > 0.0) {
                return Err(Error::domain(format!("t must be positive, got {t}")));
            }
            let sa2 = sigma_a * sigma_a;
            let k_psi2 = sigma_a / std::f64::consts::LN_2.sqrt();
            let ratio = t * sa2 / (2.0 * k_psi2 * k_psi2);
            let bound = (-(m as f64) * ratio * ratio.min(1.0)).exp();
            let eta = 1.0 / (m as f64 * sa2);
            let violations = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    let trial_rng = root.child(i as u64);
                    let op = LinearOperator::sample(
                        OperatorKind::Rademacher,
                        m,
                        n,
                        sigma_a,
                        trial_rng.child(0).seed(),
                    )
                    .expect("valid dimensions");
                    let mut vec_rng = trial_rng.child(1);
                    let u = random_unit(&mut vec_rng, n);
                    let v = random_unit(&mut vec_rng, n);
                    mu_coefficient(&u, &v, eta, &op).expect("unit inputs") >= t
                })
                .count();
            report_params.insert("n".into(), n as f64);
            report_params.insert("t".into(), t);
            report_params.insert("sigma_a".into(), sigma_a);
            Ok(BoundReport::from_counts(kind.name(), report_params, bound, violations, trials))
        }
    }
}

/// Uniform random direction on the unit sphere.
pub fn random_unit(rng: &mut SeededRng, n: usize) -> Signal {
    loop {
        let v = rng.normal_vec(n);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return Signal::from_vec(v.into_iter().map(|x| x / norm).collect())
                .expect("finite by construction");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_examples() {
        let op = LinearOperator::sample(OperatorKind::GaussianUnit, 8, 5, 1.0, 1).unwrap();
        let mut rng = SeededRng::new(2);
        let u = random_unit(&mut rng, 5);
        let v = random_unit(&mut rng, 5);
        // eta = 0 reduces to the inner product
        let mu0 = mu_coefficient(&u, &v, 0.0, &op).unwrap();
        assert!((mu0 - u.dot(&v).unwrap()).abs() < 1e-15);
        // exact cancellation at eta = 1 / ||Au||^2 with v = u
        let au = op.apply(&u).unwrap();
        let eta = 1.0 / au.dot(&au).unwrap();
        let mu1 = mu_coefficient(&u, &u, eta, &op).unwrap();
        assert!(mu1.abs() < 1e-12);
        // non-unit input rejected
        let long = u.scale(2.0).unwrap();
        assert!(mu_coefficient(&long, &v, 0.1, &op).is_err());
    }

    #[test]
    fn mu_is_bilinear() {
        let op = LinearOperator::sample(OperatorKind::Rademacher, 6, 4, 1.0, 3).unwrap();
        let mut rng = SeededRng::new(4);
        let u1 = Signal::from_vec(rng.normal_vec(4)).unwrap();
        let u2 = Signal::from_vec(rng.normal_vec(4)).unwrap();
        let v = Signal::from_vec(rng.normal_vec(4)).unwrap();
        let (a, b) = (0.7, -1.3);
        let eta = 0.05;
        let combo = u1.scale(a).unwrap().add_scaled(b, &u2).unwrap();
        let lhs = mu_bilinear(&combo, &v, eta, &op).unwrap();
        let rhs = a * mu_bilinear(&u1, &v, eta, &op).unwrap()
            + b * mu_bilinear(&u2, &v, eta, &op).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gaussian_bound_examples() {
        assert!((gaussian_step_bound(1.0, 0.0, 10, 20, 5.0, 0.1, 0.0, 1.0) - 0.9).abs() < 1e-15);
        // m = n makes the distortion coefficient 2 * 9
        let b = gaussian_step_bound(1.0, 0.01, 100, 100, 5.0, 0.1, 0.0, 1.0);
        assert!((b - 1.08).abs() < 1e-12);
        // noise term alone equals 1 when sigma_z = sigma_a, r = m / 8, eps = 0
        let b = gaussian_step_bound(0.0, 0.0, 64, 64, 8.0, 0.0, 1.0, 1.0);
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_bound_monotonicity_grid() {
        let base = gaussian_step_bound(1.0, 0.1, 50, 100, 10.0, 0.2, 0.5, 1.0);
        for m in [60, 80, 120] {
            assert!(gaussian_step_bound(1.0, 0.1, m, 100, 10.0, 0.2, 0.5, 1.0) <= base);
        }
        for delta in [0.2, 0.4] {
            assert!(gaussian_step_bound(1.0, delta, 50, 100, 10.0, 0.2, 0.5, 1.0) >= base);
        }
        for sigma_z in [0.7, 1.5] {
            assert!(gaussian_step_bound(1.0, 0.1, 50, 100, 10.0, 0.2, sigma_z, 1.0) >= base);
        }
        for r in [15.0, 30.0] {
            assert!(gaussian_step_bound(1.0, 0.1, 50, 100, r, 0.2, 0.5, 1.0) >= base);
        }
    }

    #[test]
    fn sub_gaussian_bound_examples() {
        // K = sigma_a = 1, n = m: distortion coefficient 8 (1 + 3) = 32
        let out = sub_gaussian_step_bound(0.0, 0.9, 1.0, 1.0, 50, 50, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((out.bound - 32.0).abs() < 1e-12);
        // measurement requirement ~ 13.69 r at mu0 = 0.9, K = sigma_a = 1
        let out = sub_gaussian_step_bound(0.0, 0.9, 1.0, 0.0, 50, 50, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((out.measurements_required - 13.69).abs() < 1e-2);
        // domain violations
        assert!(sub_gaussian_step_bound(0.0, 1.5, 1.0, 0.0, 50, 50, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(sub_gaussian_step_bound(0.0, 0.9, 0.1, 0.0, 50, 50, 1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn tail_exponent_reference_points() {
        let at_zero = tail_exponent(0.0);
        assert!((0.0..=1e-6).contains(&at_zero), "f(0) = {at_zero}");
        let at_045 = tail_exponent(0.45);
        assert!(
            at_045 >= std::f64::consts::LN_2 / 20.0 - 1e-4,
            "f(0.45) = {at_045}"
        );
    }

    #[test]
    fn tail_exponent_nondecreasing() {
        let mut prev = -1.0;
        let mut t = 0.0;
        while t <= 0.9 + 1e-12 {
            let v = tail_exponent(t);
            assert!(v >= prev - 1e-7, "t={t}: {v} < {prev}");
            prev = v;
            t += 0.05;
        }
    }

    #[test]
    fn chi_square_lower_bound_value() {
        let params = TailCheckParams {
            m: 10,
            tau: 0.5,
            ..Default::default()
        };
        let report = tail_check(TailCheckKind::ChiSquareLower, &params, 500, 7).unwrap();
        assert!((report.theoretical_bound - 0.3807).abs() < 1e-4);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn chi_square_upper_passes() {
        let params = TailCheckParams {
            m: 10,
            tau: 0.5,
            ..Default::default()
        };
        let report = tail_check(TailCheckKind::ChiSquareUpper, &params, 500, 8).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn vacuous_bound_passes_trivially() {
        let params = TailCheckParams {
            m: 10,
            tau: 1e-9,
            ..Default::default()
        };
        let report = tail_check(TailCheckKind::ChiSquareLower, &params, 200, 9).unwrap();
        assert!(report.theoretical_bound > 0.999);
        assert!(report.pass);
    }

    #[test]
    fn sigma_max_bound_value() {
        let params = TailCheckParams::default();
        let report = tail_check(TailCheckKind::GaussianSigmaMax, &params, 100, 10).unwrap();
        assert!((report.theoretical_bound - (-10.0f64).exp()).abs() < 1e-9);
        assert_eq!(report.empirical_value, 0.0);
    }

    #[test]
    fn too_few_trials_rejected() {
        let err = tail_check(TailCheckKind::ChiSquareLower, &TailCheckParams::default(), 10, 0)
            .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn check_names_round_trip() {
        for kind in TailCheckKind::all() {
            let parsed: TailCheckKind = kind.name().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!(matches!(
            "nonsense".parse::<TailCheckKind>(),
            Err(Error::UnknownCheck(_))
        ));
    }

    #[test]
    fn tail_check_deterministic() {
        let params = TailCheckParams {
            m: 10,
            tau: 0.4,
            ..Default::default()
        };
        let a = tail_check(TailCheckKind::ChiSquareLower, &params, 400, 3).unwrap();
        let b = tail_check(TailCheckKind::ChiSquareLower, &params, 400, 3).unwrap();
        assert_eq!(a.empirical_value, b.empirical_value);
    }
}
