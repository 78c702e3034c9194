//! Optimal piecewise-polynomial approximation of a sampled signal.
//!
//! A signal of length `n` is modeled as samples of a piecewise polynomial
//! on `[0, 1)` evaluated at `k/n`: each piece has degree at most `N`,
//! coefficients in `[0, 1]` summing to at most 1, and pieces are split at
//! up to `Q` singularity indices. [`segment_error`] solves the
//! constrained per-segment least-squares problem; [`viterbi_segmentation`]
//! minimizes the total error over all split placements by dynamic
//! programming on the split trellis, and [`brute_force_segmentation`] is
//! the exhaustive oracle used to verify it.

use crate::{Error, Result, Signal};

/// Default size guard for the exhaustive oracle.
pub const BRUTE_FORCE_GUARD: usize = 16;

/// Maximum number of projected-gradient refinement steps in the
/// constrained fit.
const PGD_MAX_ITERS: usize = 10_000;
/// Gradient-mapping tolerance for the refinement.
const PGD_TOL: f64 = 1e-9;

/// Best constrained fit of one segment: coefficients `a_0..a_N` and the
/// achieved sum of squared errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFit {
    pub coefficients: Vec<f64>,
    pub error: f64,
}

/// A full segmentation: sorted singularity indices in `(0, n)` and one
/// fit per resulting segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub singularities: Vec<usize>,
    pub segment_fits: Vec<SegmentFit>,
    pub total_error: f64,
}

impl Segmentation {
    /// Segment boundaries as half-open index ranges covering `0..n`.
    pub fn segment_ranges(&self, n: usize) -> Vec<(usize, usize)> {
        let mut bounds = Vec::with_capacity(self.singularities.len() + 2);
        bounds.push(0);
        bounds.extend_from_slice(&self.singularities);
        bounds.push(n);
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Minimum error of approximating samples `i1..=i2` of `x` by a single
/// polynomial `sum_j a_j (k/n)^j` with `a_j` in `[0,1]` and `sum a_j <= 1`.
pub fn segment_error(x: &Signal, i1: usize, i2: usize, degree: usize) -> Result<SegmentFit> {
    if i1 > i2 {
        return Err(Error::EmptySegment { i1, i2 });
    }
    if i2 >= x.len() {
        return Err(Error::dim(format!(
            "segment end {i2} out of range for length {}",
            x.len()
        )));
    }
    Ok(fit_segment(x.as_slice(), i1, i2, degree, x.len()))
}

/// Minimum-total-error segmentation with at most `max_singularities`
/// splits, found by stage-wise minimization over the split trellis.
/// Exact ties are broken toward the lexicographically smallest
/// singularity tuple (fewer splits compare as a shorter prefix).
pub fn viterbi_segmentation(x: &Signal, degree: usize, max_singularities: usize) -> Segmentation {
    let n = x.len();
    let mut table = FitTable::new(n);
    let max_segments = (max_singularities + 1).min(n);

    // suffix[p][j]: minimal cost of covering samples j..n with exactly p
    // nonempty segments (p >= 1), or None when infeasible.
    let mut suffix: Vec<Vec<Option<f64>>> = vec![vec![None; n + 1]; max_segments + 1];
    for j in 0..n {
        suffix[1][j] = Some(table.error(x, j, n - 1, degree));
    }
    for p in 2..=max_segments {
        for j in 0..n {
            if n - j < p {
                continue; // not enough samples for p nonempty segments
            }
            let mut best: Option<f64> = None;
            for s in (j + 1)..=(n - (p - 1)) {
                if let Some(rest) = suffix[p - 1][s] {
                    let cost = table.error(x, j, s - 1, degree) + rest;
                    if best.map_or(true, |b| cost < b) {
                        best = Some(cost);
                    }
                }
            }
            suffix[p][j] = best;
        }
    }

    let total = (1..=max_segments)
        .filter_map(|p| suffix[p][0])
        .fold(f64::INFINITY, f64::min);

    // Reconstruct the lexicographically smallest optimal tuple. A
    // candidate is (remaining segment count, exact cost of the rest);
    // equalities are exact f64 comparisons against the values the table
    // itself produced, so a match always exists.
    let mut candidates: Vec<(usize, f64)> = (1..=max_segments)
        .filter(|&p| suffix[p][0] == Some(total))
        .map(|p| (p, total))
        .collect();
    let mut singularities = Vec::new();
    let mut j = 0usize;
    loop {
        if candidates.iter().any(|&(p, _)| p == 1) {
            break; // closing the final segment is the shortest-prefix option
        }
        let mut advanced = false;
        'scan: for s in (j + 1)..n {
            let head = table.error(x, j, s - 1, degree);
            let mut next: Vec<(usize, f64)> = Vec::new();
            for &(p, target) in &candidates {
                if p < 2 || n - s < p - 1 {
                    continue;
                }
                if let Some(rest) = suffix[p - 1][s] {
                    if head + rest == target {
                        next.push((p - 1, rest));
                    }
                }
            }
            if !next.is_empty() {
                next.sort_by(|a, b| (a.0, a.1.to_bits()).cmp(&(b.0, b.1.to_bits())));
                next.dedup_by(|a, b| a.0 == b.0 && a.1.to_bits() == b.1.to_bits());
                singularities.push(s);
                candidates = next;
                j = s;
                advanced = true;
                break 'scan;
            }
        }
        assert!(advanced, "trellis reconstruction lost the optimal path");
    }

    let mut fits = Vec::with_capacity(singularities.len() + 1);
    let mut start = 0usize;
    for &s in &singularities {
        fits.push(table.fit(x, start, s - 1, degree));
        start = s;
    }
    fits.push(table.fit(x, start, n - 1, degree));

    Segmentation {
        singularities,
        segment_fits: fits,
        total_error: total,
    }
}

/// Exhaustive oracle: tries every placement of `0..=max_singularities`
/// splits and returns the global minimum with the same tie-break as
/// [`viterbi_segmentation`]. Guarded to small `n`.
pub fn brute_force_segmentation(
    x: &Signal,
    degree: usize,
    max_singularities: usize,
) -> Result<Segmentation> {
    brute_force_segmentation_with_guard(x, degree, max_singularities, BRUTE_FORCE_GUARD)
}

pub fn brute_force_segmentation_with_guard(
    x: &Signal,
    degree: usize,
    max_singularities: usize,
    guard: usize,
) -> Result<Segmentation> {
    let n = x.len();
    if n > guard {
        return Err(Error::SizeGuard {
            what: "brute-force segmentation length".into(),
            actual: n,
            guard,
        });
    }
    let mut table = FitTable::new(n);
    let q_max = max_singularities.min(n.saturating_sub(1));

    let mut best_tuple: Option<Vec<usize>> = None;
    let mut best_err = f64::INFINITY;
    let mut splits = Vec::new();
    for q in 0..=q_max {
        enumerate_splits(n, q, 1, &mut splits, &mut |tuple| {
            let mut err = 0.0;
            let mut start = 0usize;
            for &s in tuple {
                err += table.error(x, start, s - 1, degree);
                start = s;
            }
            err += table.error(x, start, n - 1, degree);
            let better = err < best_err
                || (err == best_err
                    && best_tuple.as_ref().map_or(true, |b| tuple < b.as_slice()));
            if better {
                best_err = err;
                best_tuple = Some(tuple.to_vec());
            }
        });
    }

    let singularities = best_tuple.unwrap_or_default();
    let mut fits = Vec::with_capacity(singularities.len() + 1);
    let mut start = 0usize;
    for &s in &singularities {
        fits.push(table.fit(x, start, s - 1, degree));
        start = s;
    }
    fits.push(table.fit(x, start, n - 1, degree));
    Ok(Segmentation {
        singularities,
        segment_fits: fits,
        total_error: best_err,
    })
}

fn enumerate_splits(
    n: usize,
    remaining: usize,
    from: usize,
    acc: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if remaining == 0 {
        visit(acc);
        return;
    }
    for s in from..n {
        acc.push(s);
        enumerate_splits(n, remaining - 1, s + 1, acc, visit);
        acc.pop();
    }
}

/// Memo table for per-segment fits; a (i1, i2) pair queried twice returns
/// the identical stored result.
struct FitTable {
    n: usize,
    memo: Vec<Option<SegmentFit>>,
}

impl FitTable {
    fn new(n: usize) -> Self {
        FitTable {
            n,
            memo: vec![None; n * n],
        }
    }

    fn fit(&mut self, x: &Signal, i1: usize, i2: usize, degree: usize) -> SegmentFit {
        let key = i1 * self.n + i2;
        if self.memo[key].is_none() {
            self.memo[key] = Some(fit_segment(x.as_slice(), i1, i2, degree, self.n));
        }
        self.memo[key].clone().unwrap()
    }

    fn error(&mut self, x: &Signal, i1: usize, i2: usize, degree: usize) -> f64 {
        self.fit(x, i1, i2, degree).error
    }
}

fn fit_segment(x: &[f64], i1: usize, i2: usize, degree: usize, n: usize) -> SegmentFit {
    let d = degree + 1;
    // Normal equations G a = rhs for the monomial basis (k/n)^j.
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut powers = vec![0.0; d];
    for k in i1..=i2 {
        let t = k as f64 / n as f64;
        let mut p = 1.0;
        for slot in powers.iter_mut() {
            *slot = p;
            p *= t;
        }
        for a in 0..d {
            rhs[a] += powers[a] * x[k];
            for b in 0..d {
                gram[a * d + b] += powers[a] * powers[b];
            }
        }
    }

    let unconstrained = solve_linear(&gram, &rhs, d);
    let coefficients = match unconstrained {
        Some(a) if is_feasible(&a, 1e-12) => snap_to_box(a),
        other => {
            let start = match other {
                Some(a) if a.iter().all(|v| v.is_finite()) => project_feasible(&a),
                _ => vec![0.0; d],
            };
            refine_projected(&gram, &rhs, start)
        }
    };

    let error = sse(x, i1, i2, &coefficients, n);
    SegmentFit {
        coefficients,
        error,
    }
}

fn sse(x: &[f64], i1: usize, i2: usize, coefficients: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    for k in i1..=i2 {
        let t = k as f64 / n as f64;
        let fitted = eval_poly(coefficients, t);
        let diff = x[k] - fitted;
        total += diff * diff;
    }
    total
}

/// Horner evaluation of `sum_j a_j t^j`.
pub fn eval_poly(coefficients: &[f64], t: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn is_feasible(a: &[f64], tol: f64) -> bool {
    a.iter().all(|&v| v.is_finite() && v >= -tol && v <= 1.0 + tol)
        && a.iter().sum::<f64>() <= 1.0 + tol
}

fn snap_to_box(a: Vec<f64>) -> Vec<f64> {
    a.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Gaussian elimination with partial pivoting; `None` when the Gram
/// matrix is numerically rank deficient (short segments make the basis
/// underdetermined).
fn solve_linear(gram: &[f64], rhs: &[f64], d: usize) -> Option<Vec<f64>> {
    let scale = gram.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let floor = scale.max(1e-300) * 1e-12;
    let mut m = gram.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..d {
        let pivot_row = (col..d)
            .max_by(|&r1, &r2| {
                m[r1 * d + col]
                    .abs()
                    .partial_cmp(&m[r2 * d + col].abs())
                    .unwrap()
            })
            .unwrap();
        if m[pivot_row * d + col].abs() <= floor {
            return None;
        }
        if pivot_row != col {
            for j in 0..d {
                m.swap(col * d + j, pivot_row * d + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = m[col * d + col];
        for row in (col + 1)..d {
            let factor = m[row * d + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..d {
                m[row * d + j] -= factor * m[col * d + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut a = vec![0.0; d];
    for i in (0..d).rev() {
        let mut sum = b[i];
        for j in (i + 1)..d {
            sum -= m[i * d + j] * a[j];
        }
        a[i] = sum / m[i * d + i];
    }
    if a.iter().all(|v| v.is_finite()) {
        Some(a)
    } else {
        None
    }
}

/// Euclidean projection onto `{a : 0 <= a_j <= 1, sum a_j <= 1}`. When the
/// clamped point violates the sum constraint, the shift `lambda` solving
/// `sum clamp(v - lambda) = 1` is found by bisection (the sum is monotone
/// in `lambda`).
fn project_feasible(v: &[f64]) -> Vec<f64> {
    let clamp = |lambda: f64| -> Vec<f64> {
        v.iter().map(|&x| (x - lambda).clamp(0.0, 1.0)).collect()
    };
    let direct = clamp(0.0);
    if direct.iter().sum::<f64>() <= 1.0 {
        return direct;
    }
    let mut lo = 0.0f64;
    let mut hi = v.iter().fold(0.0f64, |m, &x| m.max(x));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if clamp(mid).iter().sum::<f64>() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp(hi)
}

/// Accelerated projected gradient descent on `1/2 a^T G a - rhs^T a` over
/// the feasible set, keeping the best feasible iterate seen. Used only
/// when the unconstrained solution violates the constraints.
fn refine_projected(gram: &[f64], rhs: &[f64], start: Vec<f64>) -> Vec<f64> {
    let d = rhs.len();
    let lipschitz = (0..d).map(|i| gram[i * d + i]).sum::<f64>().max(1e-300);
    let objective = |a: &[f64]| -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..d {
            lin += rhs[i] * a[i];
            for j in 0..d {
                quad += a[i] * gram[i * d + j] * a[j];
            }
        }
        0.5 * quad - lin
    };
    let gradient = |a: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| (0..d).map(|j| gram[i * d + j] * a[j]).sum::<f64>() - rhs[i])
            .collect()
    };

    let mut a = project_feasible(&start);
    let mut momentum = a.clone();
    let mut t = 1.0f64;
    let mut best = a.clone();
    let mut best_obj = objective(&a);

    for _ in 0..PGD_MAX_ITERS {
        let grad = gradient(&momentum);
        let stepped: Vec<f64> = momentum
            .iter()
            .zip(&grad)
            .map(|(&y, &g)| y - g / lipschitz)
            .collect();
        let next = project_feasible(&stepped);

        let obj = objective(&next);
        if obj < best_obj {
            best_obj = obj;
            best = next.clone();
        }

        // Gradient-mapping stop test at the new point.
        let grad_next = gradient(&next);
        let mapped: Vec<f64> = next
            .iter()
            .zip(&grad_next)
            .map(|(&v, &g)| v - g / lipschitz)
            .collect();
        let proj_next = project_feasible(&mapped);
        let mapping_norm = next
            .iter()
            .zip(&proj_next)
            .map(|(&v, &p)| (v - p).abs())
            .fold(0.0f64, f64::max)
            * lipschitz;
        if mapping_norm <= PGD_TOL {
            if obj <= best_obj {
                return next;
            }
            return best;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        momentum = next
            .iter()
            .zip(&a)
            .map(|(&new, &old)| new + beta * (new - old))
            .collect();
        a = next;
        t = t_next;
    }
    best
}
