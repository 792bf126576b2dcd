//! Global one-change-point detecting processes.
//!
//! Every test in this crate is driven by a process `D(0..n)` with `D(0) = 0`
//! whose excursions indicate a single structural change. The localization and
//! self-normalization layers in [`crate::lsn`] are agnostic to which process
//! is supplied, so swapping the detector swaps the whole test.
//!
//! Built-in processes:
//!
//! * `cusum_process`        — partial sums of demeaned observations,
//!   `D(k) = n^{-1/2} sum_{i<=k} (x_i - mean)`.
//! * `wilcoxon_process`     — rank form of the two-sample Wilcoxon statistic,
//!   `D(k) = n^{-3/2} (sum_{i<=k} R_i - (k/n) sum_i R_i)`, midranks on ties.
//! * `hodges_lehmann_process` — `D(k) = n^{-3/2} k(n-k) median{x_i - x_j : i <= k < j}`.
//! * `plugin_process`       — `D(k) = k(n-k) n^{-3/2} (theta_hat[1,k] - theta_hat[k+1,n])`
//!   for a user-supplied subsample estimator; with the subsample mean this
//!   reproduces `cusum_process` exactly.
//! * `multivariate_plugin_process` — the componentwise version for vector
//!   parameters.

use crate::error::{LsnError, Result};
use crate::series::{MultiSeries, Series};

/// Which detector produced a process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    Cusum,
    Wilcoxon,
    HodgesLehmann,
    Plugin,
    MultivariatePlugin,
}

/// Named detector choices as exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Cusum,
    Wilcoxon,
    HodgesLehmann,
    PluginMean,
    PluginMedian,
    PluginVariance,
}

impl DetectorKind {
    pub fn build(&self, series: &Series) -> Result<GlobalProcess> {
        match self {
            DetectorKind::Cusum => cusum_process(series),
            DetectorKind::Wilcoxon => wilcoxon_process(series),
            DetectorKind::HodgesLehmann => hodges_lehmann_process(series),
            DetectorKind::PluginMean => plugin_process(series, &WindowEstimator::subsample_mean()),
            DetectorKind::PluginMedian => {
                plugin_process(series, &WindowEstimator::subsample_median())
            }
            DetectorKind::PluginVariance => {
                plugin_process(series, &WindowEstimator::subsample_variance())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Cusum => "cusum",
            DetectorKind::Wilcoxon => "wilcoxon",
            DetectorKind::HodgesLehmann => "hl",
            DetectorKind::PluginMean => "plugin:mean",
            DetectorKind::PluginMedian => "plugin:median",
            DetectorKind::PluginVariance => "plugin:var",
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = LsnError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cusum" => DetectorKind::Cusum,
            "wilcoxon" => DetectorKind::Wilcoxon,
            "hl" | "hodges-lehmann" => DetectorKind::HodgesLehmann,
            "plugin:mean" => DetectorKind::PluginMean,
            "plugin:median" => DetectorKind::PluginMedian,
            "plugin:var" | "plugin:variance" => DetectorKind::PluginVariance,
            other => {
                return Err(LsnError::invalid_parameter(
                    "detector",
                    format!(
                        "unknown detector `{other}`; expected cusum, wilcoxon, hl, \
                         plugin:mean, plugin:median or plugin:var"
                    ),
                ))
            }
        })
    }
}

/// A scalar change-detecting process `D(0..n)` with `D(0) = 0`.
#[derive(Debug, Clone)]
pub struct GlobalProcess {
    values: Vec<f64>,
    kind: ProcessKind,
}

impl GlobalProcess {
    pub(crate) fn from_values(values: Vec<f64>, kind: ProcessKind) -> Self {
        debug_assert!(values[0] == 0.0);
        GlobalProcess { values, kind }
    }

    /// Length of the source series.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    /// `D(k)` for `k = 0..=n`.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A vector-valued change-detecting process (one scalar track per component).
#[derive(Debug, Clone)]
pub struct MultiProcess {
    components: Vec<Vec<f64>>,
    n: usize,
}

impl MultiProcess {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j]
    }

    /// Component `j` as a scalar process.
    pub fn component_process(&self, j: usize) -> GlobalProcess {
        GlobalProcess::from_values(self.components[j].clone(), ProcessKind::MultivariatePlugin)
    }

    /// `D(k)` as a length-q vector.
    pub fn at(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[k]).collect()
    }
}

fn require_len(series: &Series, min: usize) -> Result<()> {
    if series.len() < min {
        return Err(LsnError::TooShort {
            min,
            got: series.len(),
        });
    }
    Ok(())
}

/// CUSUM process of demeaned partial sums.
pub fn cusum_process(series: &Series) -> Result<GlobalProcess> {
    require_len(series, 2)?;
    let n = series.len();
    let scale = 1.0 / (n as f64).sqrt();
    let total: f64 = series.values().iter().sum();
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut partial = 0.0;
    for (k, &x) in series.values().iter().enumerate() {
        partial += x;
        let k = (k + 1) as f64;
        values.push(scale * (partial - k / n as f64 * total));
    }
    Ok(GlobalProcess::from_values(values, ProcessKind::Cusum))
}

/// Midranks of `x`: rank of each observation, with tied groups receiving the
/// average of the ranks they span.
pub(crate) fn midranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon rank process, computed in O(n log n) from midranks.
pub fn wilcoxon_process(series: &Series) -> Result<GlobalProcess> {
    require_len(series, 2)?;
    let n = series.len();
    let ranks = midranks(series.values());
    let total: f64 = ranks.iter().sum();
    let scale = 1.0 / (n as f64).powf(1.5);
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut partial = 0.0;
    for (k, &r) in ranks.iter().enumerate() {
        partial += r;
        let k = (k + 1) as f64;
        values.push(scale * (partial - k / n as f64 * total));
    }
    Ok(GlobalProcess::from_values(values, ProcessKind::Wilcoxon))
}

/// Median of the cross differences `{left[i] - right[j]}` by full enumeration.
/// Reference path; O(p) selection over p = |left| * |right| differences.
fn cross_median_enumerate(left: &[f64], right: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    for &a in left {
        for &b in right {
            buf.push(a - b);
        }
    }
    let p = buf.len();
    let mid = p / 2;
    let (_, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if p % 2 == 1 {
        upper
    } else {
        // even cardinality: average the two central order statistics
        let lower = buf[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Count of pairs with `a[i] - b[j] <= bound`, together with the largest
/// difference `<= bound` and the smallest difference `> bound`. Both input
/// slices must be sorted ascending. O(|a| + |b|).
fn count_diffs_at_most(a: &[f64], b: &[f64], bound: f64) -> (usize, f64, f64) {
    let mut count = 0usize;
    let mut max_le = f64::NEG_INFINITY;
    let mut min_gt = f64::INFINITY;
    // a[i] - b[j] <= bound  <=>  b[j] >= a[i] - bound; the cut index is
    // monotone in i because a is ascending.
    let mut cut = 0usize;
    for &ai in a {
        let threshold = ai - bound;
        while cut < b.len() && b[cut] < threshold {
            cut += 1;
        }
        count += b.len() - cut;
        if cut < b.len() {
            let d = ai - b[cut];
            if d > max_le {
                max_le = d;
            }
        }
        if cut > 0 {
            let d = ai - b[cut - 1];
            if d < min_gt {
                min_gt = d;
            }
        }
    }
    (count, max_le, min_gt)
}

/// Exact m-th smallest (1-based) of the multiset `{a[i] - b[j]}` without
/// materializing it: bisection on the value with two-pointer counting.
fn kth_cross_difference(a: &[f64], b: &[f64], m: usize) -> f64 {
    let mut lo = a[0] - b[b.len() - 1];
    let mut hi = a[a.len() - 1] - b[0];
    while lo < hi {
        let mid = lo + 0.5 * (hi - lo);
        let (count, max_le, min_gt) = count_diffs_at_most(a, b, mid);
        if count >= m {
            hi = max_le;
        } else {
            lo = min_gt;
        }
    }
    lo
}

fn cross_median_sorted(left: &[f64], right: &[f64]) -> f64 {
    let p = left.len() * right.len();
    if p % 2 == 1 {
        kth_cross_difference(left, right, p / 2 + 1)
    } else {
        let lower = kth_cross_difference(left, right, p / 2);
        let upper = kth_cross_difference(left, right, p / 2 + 1);
        0.5 * (lower + upper)
    }
}

/// Hodges-Lehmann process. For n <= 200 medians come from full enumeration
/// with O(p) selection; above that the cross-pair median is located by value
/// bisection over two sorted halves, which the enumeration path cross-checks
/// in tests.
pub fn hodges_lehmann_process(series: &Series) -> Result<GlobalProcess> {
    require_len(series, 2)?;
    let n = series.len();
    let x = series.values();
    let scale = 1.0 / (n as f64).powf(1.5);
    let mut values = vec![0.0; n + 1];

    if n <= 200 {
        let mut buf = Vec::with_capacity((n / 2 + 1) * (n / 2 + 1));
        for k in 1..n {
            let med = cross_median_enumerate(&x[..k], &x[k..], &mut buf);
            values[k] = scale * (k * (n - k)) as f64 * med;
        }
    } else {
        // maintain the two halves as sorted vectors while k advances
        let mut left: Vec<f64> = Vec::with_capacity(n);
        let mut right: Vec<f64> = x.to_vec();
        right.sort_by(f64::total_cmp);
        for k in 1..n {
            let moved = x[k - 1];
            let pos = right.partition_point(|&v| v < moved);
            debug_assert!(right[pos] == moved);
            right.remove(pos);
            let pos = left.partition_point(|&v| v < moved);
            left.insert(pos, moved);
            let med = cross_median_sorted(&left, &right);
            values[k] = scale * (k * (n - k)) as f64 * med;
        }
    }
    Ok(GlobalProcess::from_values(
        values,
        ProcessKind::HodgesLehmann,
    ))
}

type ScalarEstimatorFn = dyn Fn(&Series, usize, usize) -> Result<f64> + Send + Sync;

/// A subsample parameter estimator `theta_hat: (series, s, e) -> real` for
/// 1-based inclusive `[s, e]`, plus the block length `h` of the underlying
/// joint-distribution functional and a minimum subsample size.
pub struct WindowEstimator {
    func: Box<ScalarEstimatorFn>,
    min_len: usize,
    block_len: usize,
    name: &'static str,
}

impl std::fmt::Debug for WindowEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WindowEstimator")
            .field("name", &self.name)
            .field("min_len", &self.min_len)
            .field("block_len", &self.block_len)
            .finish()
    }
}

impl WindowEstimator {
    pub fn new(
        name: &'static str,
        min_len: usize,
        block_len: usize,
        func: impl Fn(&Series, usize, usize) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        WindowEstimator {
            func: Box::new(func),
            min_len: min_len.max(1),
            block_len: block_len.max(1),
            name,
        }
    }

    /// Subsample mean; plugging this in reproduces the CUSUM process.
    pub fn subsample_mean() -> Self {
        WindowEstimator::new("mean", 1, 1, |series, s, e| {
            let vals = &series.values()[s - 1..e];
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        })
    }

    /// Subsample median (even length averages the two central order statistics).
    pub fn subsample_median() -> Self {
        WindowEstimator::new("median", 1, 1, |series, s, e| {
            let mut vals = series.values()[s - 1..e].to_vec();
            vals.sort_by(f64::total_cmp);
            let m = vals.len();
            Ok(if m % 2 == 1 {
                vals[m / 2]
            } else {
                0.5 * (vals[m / 2 - 1] + vals[m / 2])
            })
        })
    }

    /// Subsample variance (population form, the plug-in of the variance
    /// functional).
    pub fn subsample_variance() -> Self {
        WindowEstimator::new("variance", 2, 1, |series, s, e| {
            let vals = &series.values()[s - 1..e];
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            Ok(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m)
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Smallest subsample length on which the estimator is defined.
    pub fn feasible_len(&self) -> usize {
        self.min_len.max(self.block_len)
    }

    pub fn estimate(&self, series: &Series, start: usize, end: usize) -> Result<f64> {
        (self.func)(series, start, end)
    }
}

/// Plug-in parameter process. Splits where either side is shorter than the
/// estimator's feasible length get `D(k) = 0`; the trimming applied by the
/// score function keeps those splits out of the test anyway.
pub fn plugin_process(series: &Series, estimator: &WindowEstimator) -> Result<GlobalProcess> {
    require_len(series, 2)?;
    let n = series.len();
    let scale = 1.0 / (n as f64).powf(1.5);
    let feasible = estimator.feasible_len();
    let mut values = vec![0.0; n + 1];
    for k in 1..n {
        if k < feasible || n - k < feasible {
            continue;
        }
        let left = estimator
            .estimate(series, 1, k)
            .map_err(|e| LsnError::EstimatorFailed {
                split: k,
                reason: e.to_string(),
            })?;
        let right =
            estimator
                .estimate(series, k + 1, n)
                .map_err(|e| LsnError::EstimatorFailed {
                    split: k,
                    reason: e.to_string(),
                })?;
        values[k] = scale * (k * (n - k)) as f64 * (left - right);
    }
    Ok(GlobalProcess::from_values(values, ProcessKind::Plugin))
}

type VectorEstimatorFn = dyn Fn(&MultiSeries, usize, usize) -> Result<Vec<f64>> + Send + Sync;

/// Vector analogue of [`WindowEstimator`] for q-dimensional parameters.
pub struct MultiWindowEstimator {
    func: Box<VectorEstimatorFn>,
    dim: usize,
    min_len: usize,
    block_len: usize,
}

impl MultiWindowEstimator {
    pub fn new(
        dim: usize,
        min_len: usize,
        block_len: usize,
        func: impl Fn(&MultiSeries, usize, usize) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        MultiWindowEstimator {
            func: Box::new(func),
            dim,
            min_len: min_len.max(1),
            block_len: block_len.max(1),
        }
    }

    /// Componentwise subsample means.
    pub fn componentwise_mean(dim: usize) -> Self {
        MultiWindowEstimator::new(dim, 1, 1, |ms, s, e| {
            let len = (e - s + 1) as f64;
            Ok((0..ms.dim())
                .map(|j| ms.column(j)[s - 1..e].iter().sum::<f64>() / len)
                .collect())
        })
    }

    pub fn feasible_len(&self) -> usize {
        self.min_len.max(self.block_len)
    }
}

/// Componentwise plug-in process for a q-dimensional parameter.
pub fn multivariate_plugin_process(
    mseries: &MultiSeries,
    estimator: &MultiWindowEstimator,
) -> Result<MultiProcess> {
    let n = mseries.len();
    if n < 2 {
        return Err(LsnError::TooShort { min: 2, got: n });
    }
    let q = estimator.dim;
    if q != mseries.dim() {
        return Err(LsnError::DimensionMismatch {
            expected: mseries.dim(),
            got: q,
        });
    }
    let scale = 1.0 / (n as f64).powf(1.5);
    let feasible = estimator.feasible_len();
    let mut components = vec![vec![0.0; n + 1]; q];
    for k in 1..n {
        if k < feasible || n - k < feasible {
            continue;
        }
        let left = (estimator.func)(mseries, 1, k).map_err(|e| LsnError::EstimatorFailed {
            split: k,
            reason: e.to_string(),
        })?;
        let right = (estimator.func)(mseries, k + 1, n).map_err(|e| LsnError::EstimatorFailed {
            split: k,
            reason: e.to_string(),
        })?;
        if left.len() != q || right.len() != q {
            return Err(LsnError::DimensionMismatch {
                expected: q,
                got: left.len().min(right.len()),
            });
        }
        let factor = scale * (k * (n - k)) as f64;
        for j in 0..q {
            components[j][k] = factor * (left[j] - right[j]);
        }
    }
    Ok(MultiProcess { components, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_series(n: usize, seed: SeedSpec) -> Series {
        let mut rng = seed.rng();
        Series::new((0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn cusum_constant_series_is_zero() {
        let s = Series::new(vec![3.25; 17]).unwrap();
        let d = cusum_process(&s).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cusum_hand_example() {
        let s = Series::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = cusum_process(&s).unwrap();
        let expected = [0.0, -0.75, -1.0, -0.75, 0.0];
        for (got, want) in d.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn cusum_endpoint_zero_on_random_data() {
        let s = normal_series(257, SeedSpec::new(1, 0));
        let d = cusum_process(&s).unwrap();
        assert_eq!(d.at(0), 0.0);
        assert!(d.at(257).abs() < 1e-10);
    }

    #[test]
    fn cusum_affine_equivariance() {
        let s = normal_series(64, SeedSpec::new(2, 0));
        let (a, b) = (-2.5, 7.0);
        let t = Series::new(s.values().iter().map(|&x| a * x + b).collect()).unwrap();
        let d_s = cusum_process(&s).unwrap();
        let d_t = cusum_process(&t).unwrap();
        for k in 0..=64 {
            assert!((d_t.at(k) - a * d_s.at(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short_series_rejected() {
        let s = Series::new(vec![1.0]).unwrap();
        assert!(matches!(
            cusum_process(&s),
            Err(LsnError::TooShort { min: 2, got: 1 })
        ));
        assert!(wilcoxon_process(&s).is_err());
        assert!(hodges_lehmann_process(&s).is_err());
    }

    #[test]
    fn midranks_tie_handling() {
        assert_eq!(midranks(&[1.0, 1.0, 2.0, 2.0]), vec![1.5, 1.5, 3.5, 3.5]);
        assert_eq!(midranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn wilcoxon_hand_example() {
        let s = Series::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = wilcoxon_process(&s).unwrap();
        // k = 2: 4^{-3/2} (3 - (2/4) * 10) = -0.25
        assert!((d.at(2) + 0.25).abs() < 1e-15);
        assert_eq!(d.at(0), 0.0);
        assert!(d.at(4).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_tied_example() {
        let s = Series::new(vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let d = wilcoxon_process(&s).unwrap();
        // midranks [1.5, 1.5, 3.5, 3.5]; k = 2: 4^{-3/2} (3 - 5) = -0.25
        assert!((d.at(2) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_monotone_invariance() {
        let s = normal_series(80, SeedSpec::new(3, 0));
        let g = Series::new(s.values().iter().map(|&x| (0.7 * x).exp()).collect()).unwrap();
        let d_s = wilcoxon_process(&s).unwrap();
        let d_g = wilcoxon_process(&g).unwrap();
        assert_eq!(d_s.values(), d_g.values());
    }

    #[test]
    fn wilcoxon_matches_pairwise_indicator_form() {
        // |rank form| == |n^{-3/2} sum_{i<=k} sum_{j>k} (1{x_i <= x_j} - 1/2)|
        // on tie-free data, brute-forced in O(n^2).
        let s = normal_series(60, SeedSpec::new(4, 0));
        let x = s.values();
        let n = x.len();
        let d = wilcoxon_process(&s).unwrap();
        let scale = 1.0 / (n as f64).powf(1.5);
        for k in 0..=n {
            let mut acc = 0.0;
            for i in 0..k {
                for j in k..n {
                    acc += if x[i] <= x[j] { 0.5 } else { -0.5 };
                }
            }
            assert!(
                (d.at(k).abs() - (scale * acc).abs()).abs() < 1e-12,
                "k={k}"
            );
        }
    }

    #[test]
    fn strictly_increasing_series_dips_at_midpoint() {
        let s = Series::new((1..=50).map(|i| i as f64).collect()).unwrap();
        let d = wilcoxon_process(&s).unwrap();
        let argmin = (0..=50)
            .min_by(|&a, &b| d.at(a).total_cmp(&d.at(b)))
            .unwrap();
        assert!((argmin as i64 - 25).abs() <= 1);
        assert_eq!(d.at(0), 0.0);
        assert!(d.at(50).abs() < 1e-15);
    }

    #[test]
    fn hodges_lehmann_hand_example() {
        let s = Series::new(vec![1.0, 2.0, 3.0, 10.0]).unwrap();
        let d = hodges_lehmann_process(&s).unwrap();
        // k = 2: diffs {-2, -9, -1, -8}, median -5, D = 4^{-3/2} * 4 * (-5)
        assert!((d.at(2) + 2.5).abs() < 1e-12);
        assert_eq!(d.at(0), 0.0);
        assert_eq!(d.at(4), 0.0);
    }

    #[test]
    fn hodges_lehmann_constant_series() {
        let s = Series::new(vec![5.0; 12]).unwrap();
        let d = hodges_lehmann_process(&s).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hodges_lehmann_shift_invariance() {
        let s = normal_series(40, SeedSpec::new(5, 0));
        let t = Series::new(s.values().iter().map(|&x| x + 11.5).collect()).unwrap();
        let d_s = hodges_lehmann_process(&s).unwrap();
        let d_t = hodges_lehmann_process(&t).unwrap();
        for k in 0..=40 {
            assert!((d_s.at(k) - d_t.at(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn hodges_lehmann_fast_path_matches_enumeration() {
        for seed in 0..3 {
            let s = normal_series(90, SeedSpec::new(6, seed));
            let x = s.values();
            let n = x.len();
            // fast path pieces, exercised directly against the slow median
            let mut left: Vec<f64> = Vec::new();
            let mut right: Vec<f64> = x.to_vec();
            right.sort_by(f64::total_cmp);
            let mut buf = Vec::new();
            for k in 1..n {
                let moved = x[k - 1];
                let pos = right.partition_point(|&v| v < moved);
                right.remove(pos);
                let pos = left.partition_point(|&v| v < moved);
                left.insert(pos, moved);
                let fast = cross_median_sorted(&left, &right);
                let slow = cross_median_enumerate(&x[..k], &x[k..], &mut buf);
                assert_eq!(fast, slow, "median mismatch at k={k}");
            }
        }
    }

    #[test]
    fn hodges_lehmann_large_n_uses_fast_path() {
        // n > 200 takes the bisection path end to end; spot-check one split
        // against enumeration.
        let s = normal_series(210, SeedSpec::new(7, 0));
        let d = hodges_lehmann_process(&s).unwrap();
        let x = s.values();
        let mut buf = Vec::new();
        let k = 105;
        let med = cross_median_enumerate(&x[..k], &x[k..], &mut buf);
        let expected = (k * (210 - k)) as f64 / (210f64).powf(1.5) * med;
        assert!((d.at(k) - expected).abs() < 1e-12);
    }

    #[test]
    fn plugin_mean_reproduces_cusum() {
        let s = normal_series(73, SeedSpec::new(8, 0));
        let est = WindowEstimator::subsample_mean();
        let d_plugin = plugin_process(&s, &est).unwrap();
        let d_cusum = cusum_process(&s).unwrap();
        for k in 0..=73 {
            assert!(
                (d_plugin.at(k) - d_cusum.at(k)).abs() < 1e-10,
                "k={k}: {} vs {}",
                d_plugin.at(k),
                d_cusum.at(k)
            );
        }
    }

    #[test]
    fn plugin_variance_constant_series_zero() {
        let s = Series::new(vec![2.0; 30]).unwrap();
        let est = WindowEstimator::subsample_variance();
        let d = plugin_process(&s, &est).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn plugin_median_hand_example() {
        let s = Series::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let est = WindowEstimator::subsample_median();
        let d = plugin_process(&s, &est).unwrap();
        // k = 2: 4 * 4^{-3/2} * (1.5 - 3.5) = -1.0
        assert!((d.at(2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn plugin_estimator_failure_names_split() {
        let est = WindowEstimator::new("failing", 1, 1, |_, s, _| {
            if s == 1 {
                Err(LsnError::Degenerate("boom".into()))
            } else {
                Ok(0.0)
            }
        });
        let s = normal_series(10, SeedSpec::new(9, 0));
        match plugin_process(&s, &est) {
            Err(LsnError::EstimatorFailed { split, .. }) => assert_eq!(split, 1),
            other => panic!("expected EstimatorFailed, got {other:?}"),
        }
    }

    #[test]
    fn multivariate_q1_matches_scalar_plugin() {
        let s = normal_series(50, SeedSpec::new(10, 0));
        let ms = MultiSeries::from_columns(vec![s.values().to_vec()]).unwrap();
        let est = MultiWindowEstimator::componentwise_mean(1);
        let mp = multivariate_plugin_process(&ms, &est).unwrap();
        let sp = plugin_process(&s, &WindowEstimator::subsample_mean()).unwrap();
        for k in 0..=50 {
            assert!((mp.component(0)[k] - sp.at(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn multivariate_identical_columns_match() {
        let s = normal_series(40, SeedSpec::new(11, 0));
        let ms =
            MultiSeries::from_columns(vec![s.values().to_vec(), s.values().to_vec()]).unwrap();
        let est = MultiWindowEstimator::componentwise_mean(2);
        let mp = multivariate_plugin_process(&ms, &est).unwrap();
        let sp = plugin_process(&s, &WindowEstimator::subsample_mean()).unwrap();
        for k in 0..=40 {
            assert_eq!(mp.component(0)[k], mp.component(1)[k]);
            assert!((mp.component(0)[k] - sp.at(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn multivariate_matches_per_component_scalar_oracle() {
        let a = normal_series(45, SeedSpec::new(12, 0));
        let b = normal_series(45, SeedSpec::new(12, 1));
        let ms =
            MultiSeries::from_columns(vec![a.values().to_vec(), b.values().to_vec()]).unwrap();
        let est = MultiWindowEstimator::componentwise_mean(2);
        let mp = multivariate_plugin_process(&ms, &est).unwrap();
        for (j, series) in [a, b].iter().enumerate() {
            let sp = plugin_process(series, &WindowEstimator::subsample_mean()).unwrap();
            for k in 0..=45 {
                assert!((mp.component(j)[k] - sp.at(k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multivariate_dimension_mismatch() {
        let ms = MultiSeries::from_columns(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let est = MultiWindowEstimator::componentwise_mean(2);
        assert!(matches!(
            multivariate_plugin_process(&ms, &est),
            Err(LsnError::DimensionMismatch { .. })
        ));
    }
}
