//! Localized self-normalized (LSN) statistics.
//!
//! Given a global change-detecting process `D(0..n)`, the localized statistic
//! on a window `(s, k, e)` contrasts the two subsamples split at `k`:
//!
//! ```text
//! L(k|s,e) = sqrt(n / (e-s+1)) [ D(k) - D(s-1) - ((k-s+1)/(e-s+1)) (D(e) - D(s-1)) ]
//! V(k|s,e) = (k-s+1)/(e-s+1)^2 * sum_{j=s}^{k} L(j|s,k)^2
//!          + (e-k)/(e-s+1)^2   * sum_{j=k+1}^{e} L(j|k+1,e)^2
//! T(k|s,e) = L^2 / V            (0 for infeasible windows or V = 0)
//! ```
//!
//! The numerator and the self-normalizer share the nuisance scale of `D`, so
//! `T` needs no long-run variance estimate. Each inner sum of squared `L`
//! values reduces to prefix sums of `D`, `D^2` and `i * D(i)`, which makes
//! `T` an O(1) evaluation per window and the full score curve
//! `T(k) = max_d T(k | k-d, k+1+d)` an O(n) sweep per split point.

use crate::detectors::{GlobalProcess, MultiProcess};
use crate::error::{LsnError, Result};
use crate::window::{PrefixSums, Window};
use rayon::prelude::*;

/// Trim count `floor(epsilon * n)` shared by every trimmed range in the crate.
pub fn trim_len(n: usize, epsilon: f64) -> usize {
    (epsilon * n as f64).floor() as usize
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(LsnError::invalid_parameter(
            "epsilon",
            format!("must lie in (0, 0.5), got {epsilon}"),
        ));
    }
    Ok(())
}

/// `L(j|s,e)` evaluated directly from the process; `j = e` is permitted
/// inside self-normalizer sums and is exactly zero there.
fn localized_raw(d: &[f64], n: usize, s: usize, j: usize, e: usize) -> f64 {
    let len = (e - s + 1) as f64;
    let base = d[s - 1];
    let frac = (j - s + 1) as f64 / len;
    (n as f64 / len).sqrt() * (d[j] - base - frac * (d[e] - base))
}

/// The localized change-detecting statistic `L(k|s,e)`.
pub fn localized_stat(process: &GlobalProcess, window: Window) -> Result<f64> {
    window.require_fits(process.n())?;
    Ok(localized_raw(
        process.values(),
        process.n(),
        window.start(),
        window.split(),
        window.end(),
    ))
}

/// The self-normalizer `V(k|s,e)`, evaluated by direct summation in
/// O(e - s) time. This is the reference route; the prefix-sum route in
/// [`lsn_stat_from_sums`] must agree with it.
pub fn self_normalizer(process: &GlobalProcess, window: Window) -> Result<f64> {
    window.require_fits(process.n())?;
    let d = process.values();
    let n = process.n();
    let (s, k, e) = (window.start(), window.split(), window.end());
    let len_sq = (window.len() * window.len()) as f64;
    let mut left = 0.0;
    for j in s..=k {
        let l = localized_raw(d, n, s, j, k);
        left += l * l;
    }
    let mut right = 0.0;
    for j in (k + 1)..=e {
        let l = localized_raw(d, n, k + 1, j, e);
        right += l * l;
    }
    Ok(window.left_len() as f64 / len_sq * left + window.right_len() as f64 / len_sq * right)
}

/// `sum_{j=a+1}^{b} (Y(j) - Y(a) - ((j-a)/(b-a)) (Y(b) - Y(a)))^2` in O(1)
/// from prefix sums; this is the inner sum of either half of the
/// self-normalizer up to its scale factor.
#[inline]
fn segment_deviation_sq(d: &[f64], sums: &PrefixSums, a: usize, b: usize) -> f64 {
    let m = (b - a) as f64;
    let ya = d[a];
    let g = d[b] - ya;
    let syy = sums.range_sum_sq(a, b);
    let sy = sums.range_sum(a, b);
    let sjy = sums.range_sum_weighted(a, b) - a as f64 * sy;
    syy - 2.0 * ya * sy + m * ya * ya - 2.0 * g / m * sjy
        + g * ya * (m + 1.0)
        + g * g * (m + 1.0) * (2.0 * m + 1.0) / (6.0 * m)
}

#[inline]
fn lsn_parts_from_sums(
    d: &[f64],
    sums: &PrefixSums,
    n: usize,
    s: usize,
    k: usize,
    e: usize,
) -> (f64, f64) {
    let len = (e - s + 1) as f64;
    let base = d[s - 1];
    let contrast = d[k] - base - (k - s + 1) as f64 / len * (d[e] - base);
    let l_sq = n as f64 / len * contrast * contrast;
    let v = n as f64 / (len * len)
        * (segment_deviation_sq(d, sums, s - 1, k) + segment_deviation_sq(d, sums, k, e));
    (l_sq, v)
}

#[inline]
fn ratio_or_zero(l_sq: f64, v: f64) -> f64 {
    if v > 0.0 {
        let t = l_sq / v;
        if t.is_finite() {
            t
        } else {
            0.0
        }
    } else {
        0.0
    }
}

/// The LSN statistic `T(k|s,e) = L^2/V`. Total: windows that do not fit the
/// process, and windows with a degenerate self-normalizer, score zero.
pub fn lsn_stat(process: &GlobalProcess, window: Window) -> f64 {
    if !window.fits(process.n()) {
        return 0.0;
    }
    let l = localized_stat(process, window).expect("window checked");
    let v = self_normalizer(process, window).expect("window checked");
    ratio_or_zero(l * l, v)
}

/// `T(k|s,e)` via the O(1) prefix-sum route. Equal to [`lsn_stat`] up to
/// floating-point noise; the acceptance suite quantifies the agreement over
/// every window of a fixed series.
pub fn lsn_stat_from_sums(process: &GlobalProcess, sums: &PrefixSums, window: Window) -> f64 {
    if !window.fits(process.n()) {
        return 0.0;
    }
    let (l_sq, v) = lsn_parts_from_sums(
        process.values(),
        sums,
        process.n(),
        window.start(),
        window.split(),
        window.end(),
    );
    ratio_or_zero(l_sq, v)
}

/// Outcome of the multivariate LSN statistic: the quadratic-form value and
/// whether the self-normalizer matrix was treated as singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiLsnOutcome {
    pub value: f64,
    pub singular: bool,
}

/// Solve the PSD system `V x = rhs` by Cholesky with a relative pivot
/// threshold; returns `None` when `V` is numerically singular
/// (condition beyond ~1e12).
fn solve_psd(v: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let q = rhs.len();
    let mut chol = vec![vec![0.0; q]; q];
    let max_diag = (0..q).map(|i| v[i][i]).fold(0.0f64, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    let floor = max_diag * 1e-12;
    for i in 0..q {
        for j in 0..=i {
            let mut acc = v[i][j];
            for t in 0..j {
                acc -= chol[i][t] * chol[j][t];
            }
            if i == j {
                if acc <= floor {
                    return None;
                }
                chol[i][j] = acc.sqrt();
            } else {
                chol[i][j] = acc / chol[j][j];
            }
        }
    }
    let mut y = vec![0.0; q];
    for i in 0..q {
        let mut acc = rhs[i];
        for t in 0..i {
            acc -= chol[i][t] * y[t];
        }
        y[i] = acc / chol[i][i];
    }
    let mut x = vec![0.0; q];
    for i in (0..q).rev() {
        let mut acc = y[i];
        for t in (i + 1)..q {
            acc -= chol[t][i] * x[t];
        }
        x[i] = acc / chol[i][i];
    }
    Some(x)
}

/// Multivariate LSN statistic `T(k|s,e) = L' V^{-1} L`, with the matrix
/// self-normalizer accumulated from outer products of the componentwise
/// localized statistics. Singular `V` yields value 0 with the flag set.
pub fn lsn_stat_multi(process: &MultiProcess, window: Window) -> MultiLsnOutcome {
    let n = process.n();
    if !window.fits(n) {
        return MultiLsnOutcome {
            value: 0.0,
            singular: false,
        };
    }
    let q = process.dim();
    let (s, k, e) = (window.start(), window.split(), window.end());
    let len = window.len() as f64;
    let len_sq = len * len;

    let l: Vec<f64> = (0..q)
        .map(|j| localized_raw(process.component(j), n, s, k, e))
        .collect();

    let mut v = vec![vec![0.0; q]; q];
    let mut buf = vec![0.0; q];
    let accumulate = |lo: usize, hi: usize, sub_s: usize, sub_e: usize, weight: f64,
                          v: &mut Vec<Vec<f64>>,
                          buf: &mut Vec<f64>| {
        for j in lo..=hi {
            for (c, slot) in buf.iter_mut().enumerate() {
                *slot = localized_raw(process.component(c), n, sub_s, j, sub_e);
            }
            for a in 0..q {
                for b in 0..=a {
                    v[a][b] += weight * buf[a] * buf[b];
                }
            }
        }
    };
    accumulate(s, k, s, k, window.left_len() as f64 / len_sq, &mut v, &mut buf);
    accumulate(
        k + 1,
        e,
        k + 1,
        e,
        window.right_len() as f64 / len_sq,
        &mut v,
        &mut buf,
    );
    for a in 0..q {
        for b in (a + 1)..q {
            v[a][b] = v[b][a];
        }
    }

    match solve_psd(&v, &l) {
        Some(x) => {
            let value: f64 = l.iter().zip(&x).map(|(a, b)| a * b).sum();
            MultiLsnOutcome {
                value: value.max(0.0),
                singular: false,
            }
        }
        None => MultiLsnOutcome {
            value: 0.0,
            singular: true,
        },
    }
}

/// Maximize the symmetric-window LSN statistic over half-widths
/// `d in [floor(n eps), min(k-1, n-k-1)]` for a fixed split `k`, using the
/// O(1) prefix-sum evaluation per width. Returns `(max score, argmax d)`;
/// `(0, 0)` when no width is feasible.
pub fn recursive_window_sweep(
    process: &GlobalProcess,
    k: usize,
    epsilon: f64,
    sums: &PrefixSums,
) -> (f64, usize) {
    let n = process.n();
    let d_lo = trim_len(n, epsilon).max(1);
    if k < 2 || k + 2 > n {
        return (0.0, 0);
    }
    let d_hi = (k - 1).min(n - k - 1);
    if d_lo > d_hi {
        return (0.0, 0);
    }
    let d = process.values();
    let mut best = -1.0;
    let mut best_d = d_lo;
    for half in d_lo..=d_hi {
        let (l_sq, v) = lsn_parts_from_sums(d, sums, n, k - half, k, k + 1 + half);
        let t = ratio_or_zero(l_sq, v);
        if t > best {
            best = t;
            best_d = half;
        }
    }
    (best.max(0.0), best_d)
}

/// Score curve: per split point, the supremum of the LSN statistic over
/// feasible window half-widths, plus which width attained it.
#[derive(Debug, Clone)]
pub struct ScoreCurve {
    epsilon: f64,
    n: usize,
    k_start: usize,
    scores: Vec<f64>,
    half_widths: Vec<(usize, usize)>,
}

impl ScoreCurve {
    /// Assemble a curve from raw parts (used by in-crate tests to build
    /// synthetic curves).
    #[cfg(test)]
    pub(crate) fn from_parts(
        epsilon: f64,
        n: usize,
        k_start: usize,
        scores: Vec<f64>,
        half_widths: Vec<(usize, usize)>,
    ) -> Self {
        debug_assert_eq!(scores.len(), half_widths.len());
        ScoreCurve {
            epsilon,
            n,
            k_start,
            scores,
            half_widths,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// First split point of the trimmed range, `floor(eps n) + 1`.
    pub fn k_start(&self) -> usize {
        self.k_start
    }

    /// Last split point of the trimmed range, `n - floor(eps n) - 1`.
    pub fn k_end(&self) -> usize {
        self.k_start + self.scores.len() - 1
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn half_widths(&self) -> &[(usize, usize)] {
        &self.half_widths
    }

    pub fn score_at(&self, k: usize) -> Option<f64> {
        if k < self.k_start || k > self.k_end() {
            None
        } else {
            Some(self.scores[k - self.k_start])
        }
    }

    /// Iterate `(k, score, (d_left, d_right))` over the trimmed range.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, (usize, usize))> + '_ {
        self.scores
            .iter()
            .zip(&self.half_widths)
            .enumerate()
            .map(move |(i, (&s, &d))| (self.k_start + i, s, d))
    }
}

fn curve_domain(n: usize, epsilon: f64) -> Result<(usize, usize)> {
    validate_epsilon(epsilon)?;
    let h = trim_len(n, epsilon);
    let k_start = h + 1;
    if n < 2 * h + 2 {
        return Err(LsnError::TooShort {
            min: 2 * h + 2,
            got: n,
        });
    }
    Ok((k_start, n - h - 1))
}

/// Score curve over the trimmed split range, one recursive sweep per `k`.
pub fn score_curve(process: &GlobalProcess, epsilon: f64) -> Result<ScoreCurve> {
    let n = process.n();
    let (k_start, k_end) = curve_domain(n, epsilon)?;
    let sums = PrefixSums::from_values(process.values());
    let entries: Vec<(f64, usize)> = (k_start..=k_end)
        .into_par_iter()
        .map(|k| recursive_window_sweep(process, k, epsilon, &sums))
        .collect();
    Ok(ScoreCurve {
        epsilon,
        n,
        k_start,
        scores: entries.iter().map(|e| e.0).collect(),
        half_widths: entries.iter().map(|e| (e.1, e.1)).collect(),
    })
}

/// Score curve maximizing over independent left/right half-widths
/// (`d0, d1 >= floor(n eps)`). O(n^2) candidate windows per split point.
pub fn score_curve_nonsymmetric(process: &GlobalProcess, epsilon: f64) -> Result<ScoreCurve> {
    let n = process.n();
    let (k_start, k_end) = curve_domain(n, epsilon)?;
    let sums = PrefixSums::from_values(process.values());
    let d = process.values();
    let d_lo = trim_len(n, epsilon).max(1);
    let entries: Vec<(f64, (usize, usize))> = (k_start..=k_end)
        .into_par_iter()
        .map(|k| {
            let mut best = -1.0;
            let mut best_d = (d_lo, d_lo);
            if k < 2 || k + 2 > n {
                return (0.0, (0, 0));
            }
            for d0 in d_lo..=(k - 1) {
                for d1 in d_lo..=(n - k - 1) {
                    let (l_sq, v) = lsn_parts_from_sums(d, &sums, n, k - d0, k, k + 1 + d1);
                    let t = ratio_or_zero(l_sq, v);
                    if t > best {
                        best = t;
                        best_d = (d0, d1);
                    }
                }
            }
            (best.max(0.0), best_d)
        })
        .collect();
    Ok(ScoreCurve {
        epsilon,
        n,
        k_start,
        scores: entries.iter().map(|e| e.0).collect(),
        half_widths: entries.iter().map(|e| e.1).collect(),
    })
}

/// Reference score curve evaluating every `(k, d)` window with the direct
/// O(window) self-normalizer. O(n^3) overall: the oracle for the recursive
/// route and the slow side of the `bench` comparison.
pub fn score_curve_reference(process: &GlobalProcess, epsilon: f64) -> Result<ScoreCurve> {
    let n = process.n();
    let (k_start, k_end) = curve_domain(n, epsilon)?;
    let d_lo = trim_len(n, epsilon).max(1);
    let entries: Vec<(f64, usize)> = (k_start..=k_end)
        .into_par_iter()
        .map(|k| {
            let mut best = -1.0;
            let mut best_d = d_lo;
            if k < 2 || k + 2 > n {
                return (0.0, 0);
            }
            for half in d_lo..=(k - 1).min(n - k - 1) {
                let w = Window::symmetric(k, half).expect("k > half");
                let t = lsn_stat(process, w);
                if t > best {
                    best = t;
                    best_d = half;
                }
            }
            (best.max(0.0), best_d)
        })
        .collect();
    Ok(ScoreCurve {
        epsilon,
        n,
        k_start,
        scores: entries.iter().map(|e| e.0).collect(),
        half_widths: entries.iter().map(|e| (e.1, e.1)).collect(),
    })
}

/// How to collapse the per-split scores into one test statistic. Weights are
/// indexed over the trimmed split range and must match the curve length.
#[derive(Debug, Clone)]
pub enum Aggregator {
    Max,
    /// The default composition: the spatial mean of the score curve.
    Mean,
    WeightedMax(Vec<f64>),
    WeightedMean(Vec<f64>),
    Median,
    /// Symmetrically drop this fraction from each tail before averaging.
    TrimmedMean(f64),
}

fn check_weights(weights: &[f64], len: usize, need_positive_sum: bool) -> Result<()> {
    if weights.len() != len {
        return Err(LsnError::invalid_parameter(
            "weights",
            format!("expected {len} weights, got {}", weights.len()),
        ));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(LsnError::invalid_parameter(
            "weights",
            "weights must be finite and nonnegative",
        ));
    }
    if need_positive_sum && weights.iter().sum::<f64>() <= 0.0 {
        return Err(LsnError::invalid_parameter(
            "weights",
            "weighted mean needs a positive weight sum",
        ));
    }
    Ok(())
}

/// Aggregate a score curve into the final test statistic.
pub fn test_statistic(curve: &ScoreCurve, aggregator: &Aggregator) -> Result<f64> {
    let scores = curve.scores();
    if scores.is_empty() {
        return Err(LsnError::Degenerate("empty score curve".into()));
    }
    let m = scores.len();
    Ok(match aggregator {
        Aggregator::Max => scores.iter().copied().fold(0.0, f64::max),
        Aggregator::Mean => scores.iter().sum::<f64>() / m as f64,
        Aggregator::WeightedMax(w) => {
            check_weights(w, m, false)?;
            scores
                .iter()
                .zip(w)
                .map(|(s, w)| s * w)
                .fold(0.0, f64::max)
        }
        Aggregator::WeightedMean(w) => {
            check_weights(w, m, true)?;
            let num: f64 = scores.iter().zip(w).map(|(s, w)| s * w).sum();
            num / w.iter().sum::<f64>()
        }
        Aggregator::Median => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            if m % 2 == 1 {
                sorted[m / 2]
            } else {
                0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
            }
        }
        Aggregator::TrimmedMean(frac) => {
            if !(0.0..0.5).contains(frac) {
                return Err(LsnError::invalid_parameter(
                    "trim fraction",
                    format!("must lie in [0, 0.5), got {frac}"),
                ));
            }
            let drop = (frac * m as f64).floor() as usize;
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            let kept = &sorted[drop..m - drop];
            kept.iter().sum::<f64>() / kept.len() as f64
        }
    })
}

/// The full pipeline statistic with the paper-default `[max over d, mean
/// over k]` composition.
pub fn lsn_test_statistic(process: &GlobalProcess, epsilon: f64) -> Result<f64> {
    let curve = score_curve(process, epsilon)?;
    test_statistic(&curve, &Aggregator::Mean)
}
