//! Competing change-point tests used by the comparison harness: the
//! Kolmogorov-Smirnov test with an estimated long-run variance, the
//! self-normalized one-change and m-change supervised tests, and the
//! unsupervised two-scan test.

use crate::detectors::cusum_process;
use crate::error::{LsnError, Result};
use crate::lsn::trim_len;
use crate::series::Series;
use crate::window::PrefixSums;

/// A long-run variance estimate together with how it was produced.
#[derive(Debug, Clone, Copy)]
pub struct LrvEstimate {
    pub variance: f64,
    pub bandwidth: usize,
    pub kernel: &'static str,
}

/// Bartlett-kernel long-run variance of the demeaned series. Default
/// bandwidth `floor(1.3 n^{1/3})`. The kernel is positive semi-definite, so
/// the estimate is nonnegative; constant input is rejected.
pub fn lrv_bartlett(series: &Series, bandwidth: Option<usize>) -> Result<LrvEstimate> {
    let n = series.len();
    if n < 8 {
        return Err(LsnError::TooShort { min: 8, got: n });
    }
    let q = bandwidth.unwrap_or((1.3 * (n as f64).cbrt()).floor() as usize);
    let q = q.min(n - 1);
    let mean = series.mean();
    let x: Vec<f64> = series.values().iter().map(|v| v - mean).collect();
    let acov = |h: usize| -> f64 {
        x.iter()
            .take(n - h)
            .zip(x.iter().skip(h))
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = acov(0);
    if gamma0 <= 0.0 {
        return Err(LsnError::Degenerate(
            "constant series has no long-run variance".into(),
        ));
    }
    let mut variance = gamma0;
    for h in 1..=q {
        let w = 1.0 - h as f64 / (q + 1) as f64;
        variance += 2.0 * w * acov(h);
    }
    if variance <= 0.0 {
        return Err(LsnError::Degenerate(format!(
            "Bartlett long-run variance not positive ({variance})"
        )));
    }
    Ok(LrvEstimate {
        variance,
        bandwidth: q,
        kernel: "bartlett",
    })
}

/// Survival function of the Kolmogorov distribution,
/// `P(sup |bridge| > x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`,
/// truncated at 100 terms.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for j in 1..=100u32 {
        let term = (-2.0 * (j * j) as f64 * x * x).exp();
        if j % 2 == 1 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// CDF of the Kolmogorov distribution.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    1.0 - kolmogorov_sf(x)
}

/// Outcome of the Kolmogorov-Smirnov change-point test.
#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub lrv: LrvEstimate,
}

/// Kolmogorov-Smirnov test: `sup_k |C_n(k)| / sigma_hat` with the Bartlett
/// long-run variance, p-value from the sup-of-Brownian-bridge distribution.
pub fn ks_test(series: &Series) -> Result<KsOutcome> {
    let lrv = lrv_bartlett(series, None)?;
    let process = cusum_process(series)?;
    let sup = process
        .values()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let statistic = sup / lrv.variance.sqrt();
    Ok(KsOutcome {
        statistic,
        p_value: kolmogorov_sf(statistic),
        lrv,
    })
}

/// Per-split values of the self-normalized one-change statistic
/// `S(k) = C_n(k)^2 / V_n(k)`, `k = 1..n-1`, computed from partial sums of
/// the raw data (independent of the localized route in [`crate::lsn`]).
pub fn shao_one_cp_scores(series: &Series) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(LsnError::TooShort { min: 2, got: n });
    }
    let nf = n as f64;
    // xi[j] = sum_{i<=j} x_i
    let mut xi = Vec::with_capacity(n + 1);
    xi.push(0.0);
    let mut acc = 0.0;
    for &v in series.values() {
        acc += v;
        xi.push(acc);
    }
    let total = xi[n];
    let mut scores = Vec::with_capacity(n - 1);
    for k in 1..n {
        let kf = k as f64;
        let c = (xi[k] - kf / nf * total) / nf.sqrt();
        let mut v = 0.0;
        for i in 1..=k {
            let dev = xi[i] - i as f64 / kf * xi[k];
            v += dev * dev;
        }
        let tail_k = total - xi[k];
        for i in (k + 1)..=n {
            let tail_i = total - xi[i - 1];
            let dev = tail_i - (n - i + 1) as f64 / (n - k) as f64 * tail_k;
            v += dev * dev;
        }
        v /= nf * nf;
        scores.push(if v > 0.0 { c * c / v } else { 0.0 });
    }
    Ok(scores)
}

/// The one-change test statistic `sup_k S(k)`.
pub fn shao_one_cp(series: &Series) -> Result<f64> {
    Ok(shao_one_cp_scores(series)?
        .into_iter()
        .fold(0.0, f64::max))
}

fn lsn_at(process: &crate::detectors::GlobalProcess, sums: &PrefixSums, s: usize, k: usize, e: usize) -> f64 {
    crate::lsn::lsn_stat_from_sums(
        process,
        sums,
        crate::window::Window::new(s, k, e).expect("validated loop bounds"),
    )
}

/// Supervised m-change test: the supremum over spacing-constrained split
/// tuples of summed per-segment LSN statistics. Cost grows as O(n^m); m is
/// capped at 3.
pub fn shao_m_cp(series: &Series, m: usize, epsilon: f64) -> Result<f64> {
    if !(1..=3).contains(&m) {
        return Err(LsnError::invalid_parameter(
            "m",
            format!("supported range is 1..=3, got {m}"),
        ));
    }
    let n = series.len();
    let h = trim_len(n, epsilon).max(1);
    // k_0 = 1 and k_{m+1} = n with gaps of at least h between consecutive splits
    if n < (m + 1) * h + 1 {
        return Err(LsnError::TooShort {
            min: (m + 1) * h + 1,
            got: n,
        });
    }
    let process = cusum_process(series)?;
    let sums = PrefixSums::from_values(process.values());
    let mut best = 0.0f64;
    match m {
        1 => {
            for k1 in (1 + h)..=(n - h) {
                best = best.max(lsn_at(&process, &sums, 1, k1, n));
            }
        }
        2 => {
            for k1 in (1 + h)..=(n - 2 * h) {
                for k2 in (k1 + h)..=(n - h) {
                    let t = lsn_at(&process, &sums, 1, k1, k2)
                        + lsn_at(&process, &sums, k1, k2, n);
                    best = best.max(t);
                }
            }
        }
        _ => {
            for k1 in (1 + h)..=(n - 3 * h) {
                for k2 in (k1 + h)..=(n - 2 * h) {
                    let first = lsn_at(&process, &sums, 1, k1, k2);
                    for k3 in (k2 + h)..=(n - h) {
                        let t = first
                            + lsn_at(&process, &sums, k1, k2, k3)
                            + lsn_at(&process, &sums, k2, k3, n);
                        best = best.max(t);
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Unsupervised two-scan test: a forward scan anchored at time 1 plus a
/// backward scan anchored at time n, each over the spacing-constrained pair
/// region. O(n^2).
pub fn zhang_test(series: &Series, epsilon: f64) -> Result<f64> {
    let n = series.len();
    let h = trim_len(n, epsilon).max(1);
    if n < 3 * h + 1 {
        return Err(LsnError::TooShort {
            min: 3 * h + 1,
            got: n,
        });
    }
    let process = cusum_process(series)?;
    let sums = PrefixSums::from_values(process.values());
    let mut forward = 0.0f64;
    let mut backward = 0.0f64;
    for k1 in (1 + h)..=(n - 2 * h) {
        for k2 in (k1 + h)..=(n - h) {
            forward = forward.max(lsn_at(&process, &sums, 1, k1, k2));
            backward = backward.max(lsn_at(&process, &sums, k1, k2, n));
        }
    }
    Ok(forward + backward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsn::lsn_stat;
    use crate::rng::SeedSpec;
    use crate::window::Window;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_series(n: usize, seed: SeedSpec) -> Series {
        let mut rng = seed.rng();
        Series::new((0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    fn ar1_series(n: usize, phi: f64, seed: SeedSpec) -> Series {
        let mut rng = seed.rng();
        let mut z = 0.0;
        for _ in 0..1000 {
            z = phi * z + rng.sample::<f64, _>(StandardNormal);
        }
        Series::new(
            (0..n)
                .map(|_| {
                    z = phi * z + rng.sample::<f64, _>(StandardNormal);
                    z
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn lrv_iid_near_one() {
        let s = normal_series(5000, SeedSpec::new(40, 0));
        let est = lrv_bartlett(&s, None).unwrap();
        assert!(
            est.variance > 0.85 && est.variance < 1.15,
            "sigma^2 = {}",
            est.variance
        );
        assert_eq!(est.bandwidth, (1.3 * 5000f64.cbrt()).floor() as usize);
    }

    #[test]
    fn lrv_ar1_matches_closed_form() {
        // AR(1) with phi = 0.5 has LRV 1/(1-phi)^2 = 4
        let s = ar1_series(5000, 0.5, SeedSpec::new(41, 0));
        let est = lrv_bartlett(&s, None).unwrap();
        assert!(
            (est.variance - 4.0).abs() / 4.0 < 0.2,
            "sigma^2 = {}",
            est.variance
        );
    }

    #[test]
    fn lrv_quadratic_scaling() {
        let s = normal_series(200, SeedSpec::new(42, 0));
        let t = Series::new(s.values().iter().map(|&x| 3.0 * x).collect()).unwrap();
        let a = lrv_bartlett(&s, Some(6)).unwrap().variance;
        let b = lrv_bartlett(&t, Some(6)).unwrap().variance;
        assert!((b - 9.0 * a).abs() < 1e-9 * (1.0 + b.abs()));
    }

    #[test]
    fn lrv_rejects_constant_and_short() {
        assert!(lrv_bartlett(&Series::new(vec![2.0; 50]).unwrap(), None).is_err());
        assert!(lrv_bartlett(&Series::new(vec![1.0; 7]).unwrap(), None).is_err());
    }

    #[test]
    fn kolmogorov_95_point() {
        // solve K(x) = 0.95 by bisection; the classical value is 1.358
        let (mut lo, mut hi) = (0.5, 3.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if kolmogorov_cdf(mid) < 0.95 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 1.358).abs() < 1e-3, "95% point = {lo}");
    }

    #[test]
    fn ks_invariant_under_affine_maps() {
        let s = normal_series(300, SeedSpec::new(43, 0));
        let t = Series::new(s.values().iter().map(|&x| 5.0 * x - 2.0).collect()).unwrap();
        let a = ks_test(&s).unwrap().statistic;
        let b = ks_test(&t).unwrap().statistic;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ks_size_on_iid_data() {
        // asymptotic validity: mild oversize is expected at n = 500
        let mut rejections = 0;
        let runs = 400;
        for r in 0..runs {
            let s = normal_series(500, SeedSpec::new(44, r));
            if ks_test(&s).unwrap().p_value < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / runs as f64;
        assert!((0.02..=0.10).contains(&rate), "rate = {rate}");
    }

    #[test]
    fn shao_constant_series_zero() {
        let s = Series::new(vec![1.5; 40]).unwrap();
        assert_eq!(shao_one_cp(&s).unwrap(), 0.0);
        assert_eq!(shao_m_cp(&s, 2, 0.1).unwrap(), 0.0);
        assert_eq!(zhang_test(&s, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn shao_one_cp_equals_full_window_lsn() {
        let s = normal_series(100, SeedSpec::new(45, 0));
        let scores = shao_one_cp_scores(&s).unwrap();
        let process = cusum_process(&s).unwrap();
        let mut max_diff = 0.0f64;
        for k in 1..100usize {
            let t = lsn_stat(&process, Window::new(1, k, 100).unwrap());
            max_diff = max_diff.max((t - scores[k - 1]).abs());
        }
        assert!(max_diff < 1e-12, "max diff {max_diff}");
    }

    #[test]
    fn shao_one_cp_ramp_peaks_centrally() {
        let n = 80;
        let s = Series::new((0..n).map(|i| if i >= n / 2 { 4.0 } else { 0.0 }).collect()).unwrap();
        let scores = shao_one_cp_scores(&s).unwrap();
        let argmax = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
            + 1;
        assert!((argmax as i64 - 40).abs() <= 2, "argmax {argmax}");
    }

    #[test]
    fn shao_m1_reduces_to_trimmed_full_window_sup() {
        let s = normal_series(60, SeedSpec::new(46, 0));
        let process = cusum_process(&s).unwrap();
        let h = trim_len(60, 0.1);
        let expected = (1 + h..=60 - h)
            .map(|k| lsn_stat(&process, Window::new(1, k, 60).unwrap()))
            .fold(0.0, f64::max);
        let got = shao_m_cp(&s, 1, 0.1).unwrap();
        assert!((got - expected).abs() <= 1e-9 * (1.0 + expected));
    }

    #[test]
    fn shao_m2_matches_nested_loop_oracle() {
        let s = normal_series(60, SeedSpec::new(47, 0));
        let process = cusum_process(&s).unwrap();
        let n = 60usize;
        let h = trim_len(n, 0.1);
        let mut best = 0.0f64;
        for k1 in 2..n {
            for k2 in (k1 + 1)..n {
                if k1 - 1 < h || k2 - k1 < h || n - k2 < h {
                    continue;
                }
                let t = lsn_stat(&process, Window::new(1, k1, k2).unwrap())
                    + lsn_stat(&process, Window::new(k1, k2, n).unwrap());
                best = best.max(t);
            }
        }
        let got = shao_m_cp(&s, 2, 0.1).unwrap();
        assert!((got - best).abs() <= 1e-9 * (1.0 + best));
    }

    #[test]
    fn shao_m_relaxing_epsilon_cannot_decrease() {
        let s = normal_series(80, SeedSpec::new(48, 0));
        let tight = shao_m_cp(&s, 2, 0.15).unwrap();
        let loose = shao_m_cp(&s, 2, 0.08).unwrap();
        assert!(loose + 1e-12 >= tight);
    }

    #[test]
    fn shao_m_validation() {
        let s = normal_series(30, SeedSpec::new(49, 0));
        assert!(shao_m_cp(&s, 0, 0.1).is_err());
        assert!(shao_m_cp(&s, 4, 0.1).is_err());
        let tiny = normal_series(8, SeedSpec::new(49, 1));
        assert!(matches!(
            shao_m_cp(&tiny, 3, 0.4),
            Err(LsnError::TooShort { .. })
        ));
    }

    #[test]
    fn zhang_matches_double_loop_oracle() {
        let s = normal_series(80, SeedSpec::new(50, 0));
        let process = cusum_process(&s).unwrap();
        let n = 80usize;
        let h = trim_len(n, 0.1);
        let mut fwd = 0.0f64;
        let mut bwd = 0.0f64;
        for k1 in 2..n {
            for k2 in (k1 + 1)..n {
                if k1 - 1 < h || k2 - k1 < h || n - k2 < h {
                    continue;
                }
                fwd = fwd.max(lsn_stat(&process, Window::new(1, k1, k2).unwrap()));
                bwd = bwd.max(lsn_stat(&process, Window::new(k1, k2, n).unwrap()));
            }
        }
        let got = zhang_test(&s, 0.1).unwrap();
        assert!((got - (fwd + bwd)).abs() <= 1e-9 * (1.0 + fwd + bwd));
    }

    #[test]
    fn baselines_shift_invariant() {
        let s = normal_series(60, SeedSpec::new(51, 0));
        let t = Series::new(s.values().iter().map(|&x| x + 100.0).collect()).unwrap();
        let a = shao_one_cp(&s).unwrap();
        let b = shao_one_cp(&t).unwrap();
        assert!((a - b).abs() < 1e-6 * (1.0 + a));
        let za = zhang_test(&s, 0.1).unwrap();
        let zb = zhang_test(&t, 0.1).unwrap();
        assert!((za - zb).abs() < 1e-6 * (1.0 + za));
    }
}
