//! Critical values and p-values.
//!
//! The test is calibrated two ways:
//!
//! * finite-n adjusted critical values `c_alpha(n, rho)` from an embedded
//!   table, indexed by sample size and by the lag-1 autocorrelation of
//!   lag-b differences (`b = floor(n^{1/3})`), bilinearly interpolated in
//!   `(log n, rho)`;
//! * Monte Carlo simulation of the null distribution of the full pipeline
//!   statistic, under AR(1) noise (short-range dependence) or fractional
//!   Gaussian noise (long-range dependence), for exact-level p-values.
//!
//! The embedded table ships as a plain-text asset with one
//! `alpha,n,rho,value` record per line.

use crate::detectors::DetectorKind;
use crate::error::{LsnError, Result};
use crate::fgn::FgnSampler;
use crate::lsn::lsn_test_statistic;
use crate::rng::SeedSpec;
use crate::series::Series;
use crate::sim::{generate_noise, NoiseModel};
use rayon::prelude::*;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const CRITICAL_VALUE_DATA: &str = include_str!("../data/critical_values.csv");

/// The embedded grid of finite-n adjusted critical values.
#[derive(Debug, Clone)]
pub struct CritGrid {
    alphas: Vec<f64>,
    sample_sizes: Vec<usize>,
    rhos: Vec<f64>,
    // values[alpha][n][rho]
    values: Vec<Vec<Vec<f64>>>,
}

impl CritGrid {
    fn parse(data: &str) -> Result<CritGrid> {
        let mut alphas: Vec<f64> = Vec::new();
        let mut sample_sizes: Vec<usize> = Vec::new();
        let mut rhos: Vec<f64> = Vec::new();
        let mut records: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (line_no, line) in data.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut next = || {
                parts
                    .next()
                    .ok_or_else(|| LsnError::Parse(format!("short record on line {line_no}")))
            };
            let alpha: f64 = next()?
                .parse()
                .map_err(|e| LsnError::Parse(format!("line {line_no}: {e}")))?;
            let n: usize = next()?
                .parse()
                .map_err(|e| LsnError::Parse(format!("line {line_no}: {e}")))?;
            let rho: f64 = next()?
                .parse()
                .map_err(|e| LsnError::Parse(format!("line {line_no}: {e}")))?;
            let value: f64 = next()?
                .parse()
                .map_err(|e| LsnError::Parse(format!("line {line_no}: {e}")))?;
            let ai = index_of(&mut alphas, alpha);
            let ni = index_of_usize(&mut sample_sizes, n);
            let ri = index_of(&mut rhos, rho);
            records.push((ai, ni, ri, value));
        }
        let mut values = vec![vec![vec![f64::NAN; rhos.len()]; sample_sizes.len()]; alphas.len()];
        for (ai, ni, ri, v) in records {
            values[ai][ni][ri] = v;
        }
        for plane in &values {
            for row in plane {
                for v in row {
                    if v.is_nan() {
                        return Err(LsnError::Parse("critical value grid has holes".into()));
                    }
                }
            }
        }
        Ok(CritGrid {
            alphas,
            sample_sizes,
            rhos,
            values,
        })
    }

    /// The grid shipped with the crate (three levels, 19 sizes, 19 rho values).
    pub fn embedded() -> &'static CritGrid {
        static GRID: OnceLock<CritGrid> = OnceLock::new();
        GRID.get_or_init(|| CritGrid::parse(CRITICAL_VALUE_DATA).expect("embedded asset is valid"))
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sample_sizes(&self) -> &[usize] {
        &self.sample_sizes
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    /// Raw cell value at exact grid coordinates.
    pub fn cell(&self, alpha: f64, n: usize, rho: f64) -> Option<f64> {
        let ai = self.alphas.iter().position(|&a| close(a, alpha))?;
        let ni = self.sample_sizes.iter().position(|&m| m == n)?;
        let ri = self.rhos.iter().position(|&r| close(r, rho))?;
        Some(self.values[ai][ni][ri])
    }

    /// `c_alpha(n, rho)` with bilinear interpolation in `(log n, rho)`;
    /// `n` is clamped to [100, 10000] and `rho` to [-0.9, 0.9]. Exact at
    /// grid points.
    pub fn lookup(&self, alpha: f64, n: usize, rho: f64) -> Result<f64> {
        let ai = self
            .alphas
            .iter()
            .position(|&a| close(a, alpha))
            .ok_or(LsnError::UnknownAlpha(alpha))?;
        let plane = &self.values[ai];

        let n = (n.max(self.sample_sizes[0])).min(*self.sample_sizes.last().unwrap());
        let rho = rho.clamp(self.rhos[0], *self.rhos.last().unwrap());

        let (ni, nt) = bracket(&self.sample_sizes, n);
        let t = if nt == 0.0 {
            0.0
        } else {
            let lo = (self.sample_sizes[ni] as f64).ln();
            let hi = (self.sample_sizes[ni + 1] as f64).ln();
            ((n as f64).ln() - lo) / (hi - lo)
        };
        let (ri, u) = bracket_f64(&self.rhos, rho);

        let v00 = plane[ni][ri];
        let v01 = plane[ni][(ri + 1).min(self.rhos.len() - 1)];
        let v10 = plane[(ni + 1).min(self.sample_sizes.len() - 1)][ri];
        let v11 = plane[(ni + 1).min(self.sample_sizes.len() - 1)]
            [(ri + 1).min(self.rhos.len() - 1)];
        Ok((1.0 - t) * ((1.0 - u) * v00 + u * v01) + t * ((1.0 - u) * v10 + u * v11))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

fn index_of(axis: &mut Vec<f64>, value: f64) -> usize {
    match axis.iter().position(|&v| close(v, value)) {
        Some(i) => i,
        None => {
            axis.push(value);
            axis.sort_by(f64::total_cmp);
            axis.iter().position(|&v| close(v, value)).unwrap()
        }
    }
}

fn index_of_usize(axis: &mut Vec<usize>, value: usize) -> usize {
    match axis.iter().position(|&v| v == value) {
        Some(i) => i,
        None => {
            axis.push(value);
            axis.sort_unstable();
            axis.iter().position(|&v| v == value).unwrap()
        }
    }
}

/// Index of the lower bracket and a flag distinguishing exact hits (0.0)
/// from interior points (1.0). Exact grid hits take the lower cell with
/// weight zero.
fn bracket(axis: &[usize], value: usize) -> (usize, f64) {
    if let Some(i) = axis.iter().position(|&v| v == value) {
        return (i.min(axis.len() - 2), if i == axis.len() - 1 { 1.0 } else { 0.0 });
    }
    let upper = axis.partition_point(|&v| v < value);
    (upper - 1, 1.0)
}

fn bracket_f64(axis: &[f64], value: f64) -> (usize, f64) {
    let upper = axis.partition_point(|&v| v < value);
    if upper == 0 {
        return (0, 0.0);
    }
    if upper == axis.len() {
        return (axis.len() - 2, 1.0);
    }
    if close(axis[upper], value) {
        return (upper.min(axis.len() - 2), if upper == axis.len() - 1 { 1.0 } else { 0.0 });
    }
    let i = upper - 1;
    (i, (value - axis[i]) / (axis[i + 1] - axis[i]))
}

/// Largest integer `b` with `b^3 <= n`.
fn integer_cbrt(n: usize) -> usize {
    let mut b = (n as f64).cbrt().round() as usize;
    while b.pow(3) > n {
        b -= 1;
    }
    while (b + 1).pow(3) <= n {
        b += 1;
    }
    b
}

/// The lag-differenced autocorrelation estimate.
#[derive(Debug, Clone, Copy)]
pub struct RhoHat {
    /// Raw estimate `gamma_hat(1) / gamma_hat(0)`.
    pub raw: f64,
    /// Clamped to the table range [-0.9, 0.9].
    pub clamped: f64,
    /// Differencing lag `b = floor(n^{1/3})`.
    pub block: usize,
}

/// Sample lag-1 autocorrelation of the lag-b differences
/// `(x_{t+b} - x_t)/sqrt(2)`, `t = 1..n-b`, with mean-centered products.
/// Mean changes touch at most `b` differences each, so the estimate tracks
/// the noise autocorrelation even in the presence of level shifts.
pub fn lag1_acf_differenced(series: &Series) -> Result<RhoHat> {
    let n = series.len();
    let b = integer_cbrt(n);
    let min = 2 * b + 4;
    if n < min {
        return Err(LsnError::TooShort { min, got: n });
    }
    let x = series.values();
    let count = n - b;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let diffs: Vec<f64> = (0..count).map(|t| (x[t + b] - x[t]) * inv_sqrt2).collect();
    let mean = diffs.iter().sum::<f64>() / count as f64;
    let gamma0 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / count as f64;
    if gamma0 <= 0.0 {
        return Err(LsnError::Degenerate(
            "lag-b differences are constant".into(),
        ));
    }
    let gamma1 = diffs
        .iter()
        .take(count - 1)
        .zip(diffs.iter().skip(1))
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / count as f64;
    let raw = gamma1 / gamma0;
    Ok(RhoHat {
        raw,
        clamped: raw.clamp(-0.9, 0.9),
        block: b,
    })
}

/// Which null model a Monte Carlo distribution was simulated under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullParam {
    Ar { rho: f64 },
    FractionalNoise { hurst: f64 },
}

/// A simulated null distribution of the pipeline statistic.
#[derive(Debug, Clone)]
pub struct NullDistribution {
    sorted: Vec<f64>,
    pub n: usize,
    pub param: NullParam,
    pub epsilon: f64,
    pub seed: u64,
}

impl NullDistribution {
    pub fn reps(&self) -> usize {
        self.sorted.len()
    }

    pub fn draws(&self) -> &[f64] {
        &self.sorted
    }

    /// Empirical quantile with linear interpolation between order statistics.
    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted, q)
    }
}

/// Linear-interpolation empirical quantile of an ascending sample.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (m - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn validate_sim_params(n: usize, reps: usize) -> Result<()> {
    if n < 20 {
        return Err(LsnError::TooShort { min: 20, got: n });
    }
    if reps < 100 {
        return Err(LsnError::invalid_parameter(
            "reps",
            format!("need at least 100 replications, got {reps}"),
        ));
    }
    Ok(())
}

/// Simulate the null distribution of the pipeline statistic under AR(1)
/// noise with standard normal innovations (1000-step burn-in). One seed
/// stream per replication; the result is independent of thread scheduling.
pub fn simulate_null_distribution(
    n: usize,
    rho: f64,
    epsilon: f64,
    reps: usize,
    seed: u64,
) -> Result<NullDistribution> {
    validate_sim_params(n, reps)?;
    let model = NoiseModel::ar(rho)?;
    let mut draws: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let noise = generate_noise(&model, n, SeedSpec::new(seed, r))
                .expect("validated model");
            let process = crate::detectors::cusum_process(&noise).expect("n >= 20");
            lsn_test_statistic(&process, epsilon).expect("epsilon validated by caller pipeline")
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    Ok(NullDistribution {
        sorted: draws,
        n,
        param: NullParam::Ar { rho },
        epsilon,
        seed,
    })
}

/// Simulate the null distribution under exact fractional Gaussian noise of
/// Hurst index `H`. The self-normalizer cancels the unknown scaling of the
/// partial sums, so no normalizing sequence is needed.
pub fn simulate_null_distribution_fbm(
    hurst: f64,
    n: usize,
    epsilon: f64,
    reps: usize,
    seed: u64,
) -> Result<NullDistribution> {
    validate_sim_params(n, reps)?;
    let sampler = FgnSampler::new(hurst, n)?;
    let mut draws: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = SeedSpec::new(seed, r).rng();
            let noise = Series::new(sampler.sample(&mut rng)).expect("finite fGn");
            let process = crate::detectors::cusum_process(&noise).expect("n >= 20");
            lsn_test_statistic(&process, epsilon).expect("epsilon validated by caller pipeline")
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    Ok(NullDistribution {
        sorted: draws,
        n,
        param: NullParam::FractionalNoise { hurst },
        epsilon,
        seed,
    })
}

/// Add-one Monte Carlo p-value `(1 + #{draws >= stat}) / (reps + 1)`.
pub fn p_value(stat: f64, null: &NullDistribution) -> f64 {
    let below = null.sorted.partition_point(|&v| v < stat);
    let at_least = null.sorted.len() - below;
    (1.0 + at_least as f64) / (null.sorted.len() as f64 + 1.0)
}

/// Options for [`full_test`].
#[derive(Debug, Clone, Copy)]
pub struct TestOptions {
    pub epsilon: f64,
    pub alpha: f64,
    /// Simulate a Monte Carlo p-value with this many replications (0 skips it).
    pub pvalue_reps: usize,
    pub seed: u64,
    /// Simulate the p-value under fGn with this Hurst index instead of AR(1).
    pub hurst: Option<f64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            epsilon: 0.1,
            alpha: 0.05,
            pvalue_reps: 0,
            seed: 0,
            hurst: None,
        }
    }
}

/// Everything the three-step testing procedure produces.
#[derive(Debug, Clone, Copy)]
pub struct TestOutcome {
    pub statistic: f64,
    pub epsilon: f64,
    pub rho_hat: RhoHat,
    pub critical_value: f64,
    pub p_value: Option<f64>,
    pub reject: bool,
    pub elapsed: Duration,
}

/// The three-step test: estimate rho from lag-b differences, look up the
/// adjusted critical value, reject when the statistic exceeds it. A Monte
/// Carlo p-value at `(n, rho_hat)` (or at the requested Hurst index) is
/// simulated on demand.
pub fn full_test(series: &Series, detector: DetectorKind, opts: &TestOptions) -> Result<TestOutcome> {
    let started = Instant::now();
    let rho_hat = lag1_acf_differenced(series)?;
    let critical_value = CritGrid::embedded().lookup(opts.alpha, series.len(), rho_hat.clamped)?;
    let process = detector.build(series)?;
    let statistic = lsn_test_statistic(&process, opts.epsilon)?;
    let p = if opts.pvalue_reps > 0 {
        let null = match opts.hurst {
            Some(h) => simulate_null_distribution_fbm(
                h,
                series.len(),
                opts.epsilon,
                opts.pvalue_reps,
                opts.seed,
            )?,
            None => simulate_null_distribution(
                series.len(),
                rho_hat.clamped,
                opts.epsilon,
                opts.pvalue_reps,
                opts.seed,
            )?,
        };
        Some(p_value(statistic, &null))
    } else {
        None
    };
    Ok(TestOutcome {
        statistic,
        epsilon: opts.epsilon,
        rho_hat,
        critical_value,
        p_value: p,
        reject: statistic > critical_value,
        elapsed: started.elapsed(),
    })
}
