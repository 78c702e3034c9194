//! Projected gradient descent over a compression code's codebook.
//!
//! Each iteration moves along the gradient of `||y - Ax||^2` and projects
//! back onto the codebook through one encode/decode round trip:
//! `x_{k+1} = P(x_k + eta_k A^T (y - A x_k))`. The step size is either
//! fixed or chosen per iteration by a small derivative-free line search
//! on the post-projection residual. [`csp_exhaustive`] is the brute-force
//! reference that scans an enumerated codebook for the global residual
//! minimizer.

use std::io::Write;

use crate::codes::CompressionCode;
use crate::metrics::{normalized_error, QualityReport};
use crate::operators::LinearMap;
use crate::{Error, Result, Signal};

/// Default guard on enumerated codebook size for [`csp_exhaustive`].
pub const CSP_GUARD: usize = 1 << 20;

/// Step-size policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    Fixed(f64),
    /// Line-searched per iteration, warm-started from the previous step;
    /// `eta_init` seeds the first iteration.
    Adaptive { eta_init: f64 },
}

/// Starting point policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum X0Mode {
    Zero,
    /// `eta_init * A^T y`.
    Adjoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgdConfig {
    pub step_mode: StepMode,
    pub k1_max: usize,
    pub k2_max: usize,
    pub eps_t: f64,
    pub x0_mode: X0Mode,
}

impl CgdConfig {
    pub fn fixed(eta: f64) -> Self {
        CgdConfig {
            step_mode: StepMode::Fixed(eta),
            k1_max: 50,
            k2_max: 25,
            eps_t: 1e-3,
            x0_mode: X0Mode::Zero,
        }
    }

    pub fn adaptive(eta_init: f64) -> Self {
        CgdConfig {
            step_mode: StepMode::Adaptive { eta_init },
            ..CgdConfig::fixed(1.0)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k1_max < 1 {
            return Err(Error::domain("k1_max must be >= 1"));
        }
        if !(self.eps_t > 0.0) {
            return Err(Error::domain("eps_t must be positive"));
        }
        let eta = match self.step_mode {
            StepMode::Fixed(eta) => eta,
            StepMode::Adaptive { eta_init } => eta_init,
        };
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::domain(format!("step size must be positive, got {eta}")));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    MaxIters,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::Threshold => write!(f, "threshold"),
            StopReason::MaxIters => write!(f, "max_iters"),
        }
    }
}

/// One iteration record. Row 0 describes the starting point, so `eta`
/// and `norm_change` are absent there.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub eta: Option<f64>,
    pub residual: f64,
    pub norm_change: Option<f64>,
    /// `(1/sqrt(n)) ||x^k - P(x)||` against the projected ground truth.
    pub ref_err_tilde: Option<f64>,
    /// `(1/sqrt(n)) ||x^k - x||` against the raw ground truth.
    pub ref_err_x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
    pub stop_reason: StopReason,
}

impl SolverTrace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least the initial row")
    }

    /// CSV export: `iter,eta,residual,norm_change,ref_err_tilde,ref_err_x`,
    /// empty fields where a value does not apply.
    pub fn write_csv<W: Write>(&self, writer: &mut W) -> Result<()> {
        writeln!(writer, "iter,eta,residual,norm_change,ref_err_tilde,ref_err_x")?;
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for row in &self.rows {
            writeln!(
                writer,
                "{},{},{},{},{},{}",
                row.iter,
                fmt(row.eta),
                row.residual,
                fmt(row.norm_change),
                fmt(row.ref_err_tilde),
                fmt(row.ref_err_x),
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CgdResult {
    /// Final iterate; always a codeword of the supplied code.
    pub x_hat: Signal,
    pub trace: SolverTrace,
    /// Quality against the ground truth, when one was supplied.
    pub quality: Option<QualityReport>,
}

/// One iteration: `P(x_k + eta A^T (y - A x_k))`.
pub fn cgd_step<M, C>(x_k: &Signal, y: &Signal, op: &M, eta: f64, code: &C) -> Result<Signal>
where
    M: LinearMap + ?Sized,
    C: CompressionCode + ?Sized,
{
    let residual = y.sub(&op.apply(x_k)?)?;
    let gradient = op.adjoint(&residual)?;
    code.project(&x_k.add_scaled(eta, &gradient)?)
}

/// Searches the step size minimizing the post-projection residual
/// `||y - A P(x_k + eta A^T(y - A x_k))||` with a two-point downhill
/// simplex (reflection 1, expansion 2, contraction 0.5) run for at most
/// `k2_max` iterations from `{eta_init, 2 eta_init}`. Probes that leave
/// the positive axis are pulled back to half the current best point. The
/// returned step never does worse than `eta_init`.
pub fn adaptive_step<M, C>(
    x_k: &Signal,
    y: &Signal,
    op: &M,
    code: &C,
    eta_init: f64,
    k2_max: usize,
) -> f64
where
    M: LinearMap + ?Sized,
    C: CompressionCode + ?Sized,
{
    let objective = |eta: f64| -> f64 {
        if !(eta > 0.0) || !eta.is_finite() {
            return f64::INFINITY;
        }
        match cgd_step(x_k, y, op, eta, code) {
            Ok(candidate) => match op.apply(&candidate) {
                Ok(ax) => match y.sub(&ax) {
                    Ok(r) => r.norm_l2(),
                    Err(_) => f64::INFINITY,
                },
                Err(_) => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    };

    let consider = |eta: f64, value: f64, best: &mut (f64, f64)| {
        if value < best.1 {
            *best = (eta, value);
        }
    };

    let f_init = objective(eta_init);
    let mut best = (eta_init, f_init);
    let second = 2.0 * eta_init;
    let f_second = objective(second);
    consider(second, f_second, &mut best);
    let mut simplex = [(eta_init, f_init), (second, f_second)];

    for _ in 0..k2_max {
        // Order so simplex[0] is best; ties keep the smaller step.
        if (simplex[1].1, simplex[1].0) < (simplex[0].1, simplex[0].0) {
            simplex.swap(0, 1);
        }
        let (b, fb) = simplex[0];
        let (w, fw) = simplex[1];
        if (b - w).abs() <= 1e-12 * b.abs().max(1e-300) {
            break;
        }

        let mut reflected = 2.0 * b - w;
        if reflected <= 0.0 {
            reflected = b / 2.0;
        }
        let f_reflected = objective(reflected);
        consider(reflected, f_reflected, &mut best);

        if f_reflected < fb {
            let mut expanded = 3.0 * b - 2.0 * w;
            if expanded <= 0.0 {
                expanded = b / 2.0;
            }
            let f_expanded = objective(expanded);
            consider(expanded, f_expanded, &mut best);
            simplex[1] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
        } else if f_reflected < fw {
            simplex[1] = (reflected, f_reflected);
        } else {
            let contracted = 0.5 * (b + w);
            let f_contracted = objective(contracted);
            consider(contracted, f_contracted, &mut best);
            simplex[1] = (contracted, f_contracted);
        }
    }

    if best.1.is_finite() {
        best.0
    } else {
        eta_init
    }
}

/// Full solver run from the configured starting point.
pub fn cgd_run<M, C>(
    y: &Signal,
    op: &M,
    code: &C,
    config: &CgdConfig,
    ground_truth: Option<&Signal>,
) -> Result<CgdResult>
where
    M: LinearMap + ?Sized,
    C: CompressionCode + ?Sized,
{
    config.validate()?;
    let eta_seed = match config.step_mode {
        StepMode::Fixed(eta) => eta,
        StepMode::Adaptive { eta_init } => eta_init,
    };
    let x0 = match config.x0_mode {
        X0Mode::Zero => Signal::zeros(op.cols())?,
        X0Mode::Adjoint => op.adjoint(y)?.scale(eta_seed)?,
    };
    cgd_run_from(&x0, y, op, code, config, ground_truth)
}

/// Solver run from an explicit starting point.
pub fn cgd_run_from<M, C>(
    x0: &Signal,
    y: &Signal,
    op: &M,
    code: &C,
    config: &CgdConfig,
    ground_truth: Option<&Signal>,
) -> Result<CgdResult>
where
    M: LinearMap + ?Sized,
    C: CompressionCode + ?Sized,
{
    config.validate()?;
    if op.rows() == 0 || op.cols() == 0 {
        return Err(Error::dim("operator must have positive dimensions"));
    }
    y.check_len(op.rows(), "measurement vector")?;
    x0.check_len(op.cols(), "starting point")?;
    if code.len() != op.cols() {
        return Err(Error::dim(format!(
            "code length {} does not match operator columns {}",
            code.len(),
            op.cols()
        )));
    }

    let reference = match ground_truth {
        Some(x) => {
            x.check_len(op.cols(), "ground truth")?;
            Some((code.project(x)?, x.clone()))
        }
        None => None,
    };
    let ref_errors = |point: &Signal| -> Result<(Option<f64>, Option<f64>)> {
        match &reference {
            Some((tilde, raw)) => Ok((
                Some(normalized_error(point, tilde)?),
                Some(normalized_error(point, raw)?),
            )),
            None => Ok((None, None)),
        }
    };

    let sqrt_n = (op.cols() as f64).sqrt();
    let mut rows = Vec::with_capacity(config.k1_max + 1);
    let (e_tilde, e_x) = ref_errors(x0)?;
    rows.push(TraceRow {
        iter: 0,
        eta: None,
        residual: y.sub(&op.apply(x0)?)?.norm_l2(),
        norm_change: None,
        ref_err_tilde: e_tilde,
        ref_err_x: e_x,
    });

    let mut x = x0.clone();
    let mut eta_prev = match config.step_mode {
        StepMode::Fixed(eta) => eta,
        StepMode::Adaptive { eta_init } => eta_init,
    };
    let mut stop_reason = StopReason::MaxIters;
    for iter in 1..=config.k1_max {
        let eta = match config.step_mode {
            StepMode::Fixed(eta) => eta,
            StepMode::Adaptive { .. } => {
                adaptive_step(&x, y, op, code, eta_prev, config.k2_max)
            }
        };
        let next = cgd_step(&x, y, op, eta, code)?;
        let change = next.sub(&x)?.norm_l2() / sqrt_n;
        let (e_tilde, e_x) = ref_errors(&next)?;
        rows.push(TraceRow {
            iter,
            eta: Some(eta),
            residual: y.sub(&op.apply(&next)?)?.norm_l2(),
            norm_change: Some(change),
            ref_err_tilde: e_tilde,
            ref_err_x: e_x,
        });
        x = next;
        eta_prev = eta;
        if change < config.eps_t {
            stop_reason = StopReason::Threshold;
            break;
        }
    }

    let quality = match ground_truth {
        Some(truth) => Some(QualityReport::compare(truth, &x)?),
        None => None,
    };
    Ok(CgdResult {
        x_hat: x,
        trace: SolverTrace { rows, stop_reason },
        quality,
    })
}

/// Scans `codebook` for the codeword with the smallest measurement
/// residual `||y - A u||`; ties keep the first codeword in enumeration
/// order. Returns the winner and its residual.
pub fn csp_exhaustive<M: LinearMap + ?Sized>(
    y: &Signal,
    op: &M,
    codebook: &[Signal],
) -> Result<(Signal, f64)> {
    csp_exhaustive_with_guard(y, op, codebook, CSP_GUARD)
}

pub fn csp_exhaustive_with_guard<M: LinearMap + ?Sized>(
    y: &Signal,
    op: &M,
    codebook: &[Signal],
    guard: usize,
) -> Result<(Signal, f64)> {
    if codebook.is_empty() {
        return Err(Error::DegenerateInput("empty codebook".into()));
    }
    if codebook.len() > guard {
        return Err(Error::SizeGuard {
            what: "codebook enumeration".into(),
            actual: codebook.len(),
            guard,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, u) in codebook.iter().enumerate() {
        let residual = y.sub(&op.apply(u)?)?.norm_l2();
        if best.map_or(true, |(_, b)| residual < b) {
            best = Some((i, residual));
        }
    }
    let (idx, residual) = best.expect("nonempty codebook");
    Ok((codebook[idx].clone(), residual))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::codes::{BitStream, KIND_EXTERNAL};

    /// Identity measurement map for unit tests.
    pub struct IdentityMap(pub usize);

    impl LinearMap for IdentityMap {
        fn rows(&self) -> usize {
            self.0
        }

        fn cols(&self) -> usize {
            self.0
        }

        fn apply(&self, x: &Signal) -> Result<Signal> {
            x.check_len(self.0, "identity apply")?;
            Ok(x.clone())
        }

        fn adjoint(&self, y: &Signal) -> Result<Signal> {
            y.check_len(self.0, "identity adjoint")?;
            Ok(y.clone())
        }
    }

    /// Code whose projection is the identity (stores raw f64 bits).
    pub struct IdentityCode(pub usize);

    impl CompressionCode for IdentityCode {
        fn len(&self) -> usize {
            self.0
        }

        fn encode(&self, x: &Signal) -> Result<BitStream> {
            x.check_len(self.0, "identity encode")?;
            let mut s = BitStream::new(KIND_EXTERNAL);
            for v in x.iter() {
                s.write_bits(v.to_bits(), 64);
            }
            Ok(s)
        }

        fn decode(&self, bits: &BitStream) -> Result<Signal> {
            let mut reader = bits.reader();
            let values: Result<Vec<f64>> = (0..self.0)
                .map(|_| reader.read_bits(64).map(f64::from_bits))
                .collect();
            Signal::from_vec(values?)
        }

        fn rate_bits(&self) -> Option<u64> {
            Some(self.0 as u64 * 64)
        }

        fn distortion_bound(&self) -> Option<f64> {
            Some(0.0)
        }
    }
}
