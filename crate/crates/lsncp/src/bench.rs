//! Timing comparison between the recursive (prefix-sum) score-curve sweep
//! and the direct per-window evaluation, across a ladder of sample sizes.

use crate::detectors::cusum_process;
use crate::error::Result;
use crate::lsn::{score_curve, score_curve_reference};
use crate::rng::SeedSpec;
use crate::series::Series;
use rand::Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub n: usize,
    pub recursive_secs: f64,
    pub brute_secs: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log(recursive time) against log(n).
    pub recursive_loglog_slope: f64,
}

/// Time both score-curve routes on seeded standard normal data. The
/// recursive route is repeated until at least `min_measure_secs` of work
/// accumulates so small sizes are not dominated by timer noise.
pub fn bench_score_curve(sizes: &[usize], epsilon: f64, seed: u64) -> Result<BenchReport> {
    let mut rows = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        let mut rng = SeedSpec::new(seed, i as u64).rng();
        let series = Series::new((0..n).map(|_| rng.sample(StandardNormal)).collect())?;
        let process = cusum_process(&series)?;

        let recursive_secs = time_adaptive(0.2, || {
            score_curve(&process, epsilon).expect("valid inputs");
        });
        let started = Instant::now();
        score_curve_reference(&process, epsilon)?;
        let brute_secs = started.elapsed().as_secs_f64();

        rows.push(BenchRow {
            n,
            recursive_secs,
            brute_secs,
            speedup: brute_secs / recursive_secs,
        });
    }
    let slope = loglog_slope(
        &rows.iter().map(|r| r.n as f64).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.recursive_secs).collect::<Vec<_>>(),
    );
    Ok(BenchReport {
        rows,
        recursive_loglog_slope: slope,
    })
}

fn time_adaptive(min_measure_secs: f64, mut work: impl FnMut()) -> f64 {
    // warm-up pass (thread pool startup, allocator)
    work();
    let mut reps = 1u32;
    loop {
        let started = Instant::now();
        for _ in 0..reps {
            work();
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= min_measure_secs || reps >= 1 << 14 {
            return elapsed / reps as f64;
        }
        reps *= 2;
    }
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_quadratic_is_two() {
        let x = [500.0, 1000.0, 2000.0, 4000.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0e-9 * v * v).collect();
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_bench_runs() {
        let report = bench_score_curve(&[60, 120], 0.1, 5).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.recursive_secs > 0.0 && row.brute_secs > 0.0);
        }
    }
}
