//! Change-point location estimation on top of the score curve: local-maxima
//! scanning, screening-and-ranking selection, and p-value-driven binary
//! segmentation.

use crate::critval::{p_value, simulate_null_distribution, NullDistribution};
use crate::detectors::DetectorKind;
use crate::error::{LsnError, Result};
use crate::lsn::{score_curve, test_statistic, trim_len, Aggregator, ScoreCurve};
use crate::rng::derive_seed;
use crate::series::Series;
use std::collections::HashMap;
use std::sync::Mutex;

/// One estimated change point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangePoint {
    /// 1-based index `k`: the last observation of the segment before the change.
    pub index: usize,
    /// Score-curve value at the index (segment-local for binary segmentation).
    pub score: f64,
    /// Segment-level Monte Carlo p-value, when the method computes one.
    pub p_value: Option<f64>,
}

/// A sorted, duplicate-free set of estimated change points plus selection
/// metadata.
#[derive(Debug, Clone)]
pub struct ChangePointSet {
    points: Vec<ChangePoint>,
    pub method: &'static str,
    pub threshold: Option<f64>,
}

impl ChangePointSet {
    fn new(mut points: Vec<ChangePoint>, method: &'static str, threshold: Option<f64>) -> Self {
        points.sort_by_key(|p| p.index);
        points.dedup_by_key(|p| p.index);
        ChangePointSet {
            points,
            method,
            threshold,
        }
    }

    pub fn points(&self) -> &[ChangePoint] {
        &self.points
    }

    pub fn indices(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.index).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Local maximizers of the score curve above a threshold. An index wins its
/// neighborhood `(k - h, k + h]` (h = the curve's trim count) when nothing to
/// its left ties or beats it and nothing to its right beats it, so plateaus
/// contribute exactly their leftmost index.
pub fn local_max_cps(curve: &ScoreCurve, threshold: f64) -> ChangePointSet {
    let h = trim_len(curve.n(), curve.epsilon());
    let scores = curve.scores();
    let k_start = curve.k_start();
    let mut points = Vec::new();
    for (i, &score) in scores.iter().enumerate() {
        if !(score > threshold) {
            continue;
        }
        let lo = i.saturating_sub(h);
        let hi = (i + h).min(scores.len() - 1);
        let beaten_left = scores[lo..i].iter().any(|&v| v >= score);
        let beaten_right = scores[i + 1..=hi].iter().any(|&v| v > score);
        if !beaten_left && !beaten_right {
            points.push(ChangePoint {
                index: k_start + i,
                score,
                p_value: None,
            });
        }
    }
    ChangePointSet::new(points, "local-max", Some(threshold))
}

/// Model-selection criterion for screening-and-ranking.
pub enum Criterion {
    /// Segment least-squares residual sum of squares plus
    /// `penalty * j * ln(n)` for `j` selected change points.
    LeastSquaresBic { penalty: f64 },
    /// A user-supplied cost of a sorted candidate set.
    User(Box<dyn Fn(&Series, &[usize]) -> f64 + Send + Sync>),
}

impl Default for Criterion {
    fn default() -> Self {
        Criterion::LeastSquaresBic { penalty: 1.0 }
    }
}

impl Criterion {
    fn evaluate(&self, series: &Series, sorted_cps: &[usize]) -> f64 {
        match self {
            Criterion::LeastSquaresBic { penalty } => {
                let n = series.len();
                let rss = segment_rss(series, sorted_cps);
                rss + penalty * sorted_cps.len() as f64 * (n as f64).ln()
            }
            Criterion::User(f) => f(series, sorted_cps),
        }
    }
}

fn segment_rss(series: &Series, sorted_cps: &[usize]) -> f64 {
    let x = series.values();
    let mut rss = 0.0;
    let mut start = 0usize;
    let mut bounds: Vec<usize> = sorted_cps.to_vec();
    bounds.push(x.len());
    for end in bounds {
        let seg = &x[start..end];
        if !seg.is_empty() {
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            rss += seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        start = end;
    }
    rss
}

/// Screening-and-ranking: order the candidates by score, keep the prefix
/// whose criterion value is smallest. Returns the empty set for empty input.
pub fn sara_select(
    initial: &ChangePointSet,
    series: &Series,
    criterion: &Criterion,
) -> ChangePointSet {
    if initial.is_empty() {
        return ChangePointSet::new(Vec::new(), "sara", initial.threshold);
    }
    let mut ranked: Vec<ChangePoint> = initial.points().to_vec();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));

    let mut best_j = 1;
    let mut best_cost = f64::INFINITY;
    for j in 1..=ranked.len() {
        let mut prefix: Vec<usize> = ranked[..j].iter().map(|p| p.index).collect();
        prefix.sort_unstable();
        let cost = criterion.evaluate(series, &prefix);
        if cost < best_cost {
            best_cost = cost;
            best_j = j;
        }
    }
    ChangePointSet::new(ranked[..best_j].to_vec(), "sara", initial.threshold)
}

/// Shared cache of simulated segment-level null distributions, keyed by the
/// segment length rounded to the nearest 50 and rho_hat rounded to the
/// nearest 0.1. Cell seeds derive from the configured seed and the cell key,
/// so results do not depend on evaluation order.
pub struct NullCache {
    epsilon: f64,
    reps: usize,
    seed: u64,
    cells: Mutex<HashMap<(usize, i32), std::sync::Arc<NullDistribution>>>,
}

impl NullCache {
    pub fn new(epsilon: f64, reps: usize, seed: u64) -> Self {
        NullCache {
            epsilon,
            reps,
            seed,
            cells: Mutex::new(HashMap::new()),
        }
    }

    fn get(&self, len: usize, rho: f64) -> Result<std::sync::Arc<NullDistribution>> {
        let rounded_len = ((len as f64 / 50.0).round() as usize).max(1) * 50;
        let bucket = (rho.clamp(-0.9, 0.9) * 10.0).round() as i32;
        let key = (rounded_len, bucket);
        if let Some(hit) = self.cells.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let cell_seed = derive_seed(self.seed, rounded_len as u64, (bucket + 16) as u64);
        let null = std::sync::Arc::new(simulate_null_distribution(
            rounded_len,
            bucket as f64 / 10.0,
            self.epsilon,
            self.reps,
            cell_seed,
        )?);
        let mut cells = self.cells.lock().unwrap();
        Ok(cells.entry(key).or_insert(null).clone())
    }
}

/// Configuration for [`binary_segmentation`].
#[derive(Debug, Clone, Copy)]
pub struct BinSegConfig {
    /// Split a segment while its p-value stays below this threshold.
    pub p0: f64,
    pub epsilon: f64,
    pub detector: DetectorKind,
    /// Replications per cached segment-level null distribution.
    pub null_reps: usize,
    pub seed: u64,
}

impl Default for BinSegConfig {
    fn default() -> Self {
        BinSegConfig {
            p0: 0.05,
            epsilon: 0.1,
            detector: DetectorKind::Cusum,
            null_reps: 400,
            seed: 0,
        }
    }
}

/// Binary segmentation driven by the localized test: a segment splits at the
/// best score of its own curve while the segment-level Monte Carlo p-value
/// stays below `p0`; recursion continues on both sides. Each segment is
/// trimmed with its own length (`floor(eps * segment length)`).
pub fn binary_segmentation(series: &Series, config: &BinSegConfig) -> Result<ChangePointSet> {
    if !(config.p0 > 0.0 && config.p0 < 1.0) {
        return Err(LsnError::invalid_parameter(
            "p0",
            format!("must lie in (0, 1), got {}", config.p0),
        ));
    }
    let n = series.len();
    let min_window = trim_len(n, config.epsilon);
    let cache = NullCache::new(config.epsilon, config.null_reps, config.seed);
    let mut found: Vec<ChangePoint> = Vec::new();
    let mut stack: Vec<(usize, usize)> = vec![(1, n)];
    while let Some((start, end)) = stack.pop() {
        if let Some(cp) = segment_split(series, start, end, min_window, config, &cache)? {
            stack.push((start, cp.index));
            stack.push((cp.index + 1, end));
            found.push(cp);
        }
    }
    Ok(ChangePointSet::new(found, "binseg", None))
}

// Segments shorter than this cannot support a rho estimate or a trimmed
// curve; they are never tested.
const MIN_SEGMENT: usize = 20;

fn segment_split(
    series: &Series,
    start: usize,
    end: usize,
    min_window: usize,
    config: &BinSegConfig,
    cache: &NullCache,
) -> Result<Option<ChangePoint>> {
    if end <= start {
        return Ok(None);
    }
    let len = end - start + 1;
    if len < min_window.max(MIN_SEGMENT) {
        return Ok(None);
    }
    let segment = series.slice(start, end)?;
    let rho = match crate::critval::lag1_acf_differenced(&segment) {
        Ok(r) => r,
        // flat segments carry no evidence of change
        Err(LsnError::Degenerate(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let process = config.detector.build(&segment)?;
    let curve = match score_curve(&process, config.epsilon) {
        Ok(c) => c,
        Err(LsnError::TooShort { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let stat = test_statistic(&curve, &Aggregator::Mean)?;
    let null = cache.get(len, rho.clamped)?;
    let p = p_value(stat, &null);
    if p >= config.p0 {
        return Ok(None);
    }
    // leftmost argmax of the segment curve, mapped to global coordinates
    let mut best = (curve.k_start(), f64::NEG_INFINITY);
    for (k, score, _) in curve.iter() {
        if score > best.1 {
            best = (k, score);
        }
    }
    Ok(Some(ChangePoint {
        index: start - 1 + best.0,
        score: best.1,
        p_value: Some(p),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::cusum_process;
    use crate::rng::SeedSpec;
    use crate::sim::{add_mean, generate_noise, mean_function, MeanSpec, NoiseModel};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_series(n: usize, seed: SeedSpec) -> Series {
        let mut rng = seed.rng();
        Series::new((0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    fn shifted_series(n: usize, spec: &MeanSpec, seed: SeedSpec) -> Series {
        let noise = generate_noise(&NoiseModel::iid(), n, seed).unwrap();
        add_mean(&noise, &mean_function(spec, n).unwrap())
    }

    #[test]
    fn all_zero_curve_gives_empty_set() {
        let s = Series::new(vec![4.0; 100]).unwrap();
        let curve = score_curve(&cusum_process(&s).unwrap(), 0.1).unwrap();
        let cps = local_max_cps(&curve, 0.0);
        assert!(cps.is_empty());
    }

    fn synthetic_curve(n: usize, epsilon: f64, scores: Vec<f64>) -> ScoreCurve {
        let h = trim_len(n, epsilon);
        let len = scores.len();
        assert_eq!(len, n - 2 * h - 1);
        ScoreCurve::from_parts(epsilon, n, h + 1, scores, vec![(h, h); len])
    }

    #[test]
    fn plateau_selects_leftmost_only() {
        let n = 100;
        let mut scores = vec![0.0; n - 2 * 10 - 1];
        for slot in &mut scores[30..=34] {
            *slot = 7.5;
        }
        let curve = synthetic_curve(n, 0.1, scores);
        let cps = local_max_cps(&curve, 1.0);
        assert_eq!(cps.len(), 1);
        assert_eq!(cps.indices()[0], curve.k_start() + 30);
    }

    #[test]
    fn strong_five_cp_fixture_recovers_all() {
        let n = 500;
        let spec = MeanSpec::Alternating { m: 5, delta: 4.0 };
        let truth = spec.change_points(n);
        let mut hits = 0;
        let trials = 20;
        for r in 0..trials {
            let series = shifted_series(n, &spec, SeedSpec::new(91, r));
            let curve =
                score_curve(&cusum_process(&series).unwrap(), 0.1).unwrap();
            let cps = local_max_cps(&curve, 19.0);
            if cps.len() == truth.len()
                && cps
                    .indices()
                    .iter()
                    .zip(&truth)
                    .all(|(got, want)| got.abs_diff(*want) <= 50)
            {
                hits += 1;
            }
        }
        assert!(hits >= trials - 1, "recovered in {hits}/{trials} trials");
    }

    #[test]
    fn sara_keeps_true_points_drops_spurious() {
        let n = 400;
        let spec = MeanSpec::Alternating { m: 3, delta: 4.0 };
        let truth = spec.change_points(n);
        let series = shifted_series(n, &spec, SeedSpec::new(92, 0));
        let curve = score_curve(&cusum_process(&series).unwrap(), 0.1).unwrap();
        let mut points: Vec<ChangePoint> = truth
            .iter()
            .map(|&k| ChangePoint {
                index: k,
                score: curve.score_at(k).unwrap_or(50.0),
                p_value: None,
            })
            .collect();
        // pad with three low-score spurious candidates away from the truth
        for (i, k) in [60usize, 160, 260].iter().enumerate() {
            points.push(ChangePoint {
                index: *k + i,
                score: 0.3,
                p_value: None,
            });
        }
        let initial = ChangePointSet::new(points, "local-max", None);
        let selected = sara_select(&initial, &series, &Criterion::default());
        assert_eq!(selected.indices(), truth, "selected {:?}", selected.indices());
    }

    #[test]
    fn sara_oracle_criterion_comparison() {
        // the criterion value of the true set must beat true-set-plus-noise
        let n = 300;
        let spec = MeanSpec::Alternating { m: 2, delta: 4.0 };
        let truth = spec.change_points(n);
        let series = shifted_series(n, &spec, SeedSpec::new(93, 0));
        let crit = Criterion::default();
        let cost_true = crit.evaluate(&series, &truth);
        let mut padded = truth.clone();
        padded.push(77);
        padded.sort_unstable();
        let cost_padded = crit.evaluate(&series, &padded);
        assert!(cost_true < cost_padded);
        let missing = &truth[..1];
        assert!(crit.evaluate(&series, missing) > cost_true);
    }

    #[test]
    fn sara_single_candidate_trivial() {
        let series = normal_series(50, SeedSpec::new(94, 0));
        let initial = ChangePointSet::new(
            vec![ChangePoint {
                index: 25,
                score: 3.0,
                p_value: None,
            }],
            "local-max",
            None,
        );
        let out = sara_select(&initial, &series, &Criterion::default());
        assert_eq!(out.indices(), vec![25]);
    }

    #[test]
    fn sara_empty_input_empty_output() {
        let series = normal_series(50, SeedSpec::new(95, 0));
        let initial = ChangePointSet::new(Vec::new(), "local-max", None);
        assert!(sara_select(&initial, &series, &Criterion::default()).is_empty());
    }

    #[test]
    fn binseg_two_strong_cps_recovered() {
        let n = 300;
        let spec = MeanSpec::Alternating { m: 2, delta: 4.0 };
        let truth = spec.change_points(n);
        let series = shifted_series(n, &spec, SeedSpec::new(96, 0));
        let cfg = BinSegConfig {
            null_reps: 200,
            ..BinSegConfig::default()
        };
        let cps = binary_segmentation(&series, &cfg).unwrap();
        assert_eq!(cps.len(), 2, "found {:?}", cps.indices());
        for (got, want) in cps.indices().iter().zip(&truth) {
            assert!(got.abs_diff(*want) <= trim_len(n, 0.1), "{got} vs {want}");
        }
        for p in cps.points() {
            assert!(p.p_value.unwrap() < 0.05);
        }
    }

    #[test]
    fn binseg_deterministic() {
        let series = shifted_series(
            250,
            &MeanSpec::Alternating { m: 1, delta: 3.0 },
            SeedSpec::new(97, 0),
        );
        let cfg = BinSegConfig {
            null_reps: 150,
            seed: 3,
            ..BinSegConfig::default()
        };
        let a = binary_segmentation(&series, &cfg).unwrap();
        let b = binary_segmentation(&series, &cfg).unwrap();
        assert_eq!(a.indices(), b.indices());
    }

    #[test]
    fn binseg_short_series_empty() {
        let series = normal_series(12, SeedSpec::new(98, 0));
        let cps = binary_segmentation(&series, &BinSegConfig::default()).unwrap();
        assert!(cps.is_empty());
    }

    #[test]
    fn every_index_lies_in_trimmed_range() {
        let n = 300;
        let series = shifted_series(
            n,
            &MeanSpec::Alternating { m: 2, delta: 3.0 },
            SeedSpec::new(99, 0),
        );
        let curve = score_curve(&cusum_process(&series).unwrap(), 0.1).unwrap();
        let cps = local_max_cps(&curve, 5.0);
        for idx in cps.indices() {
            assert!(idx >= curve.k_start() && idx <= curve.k_end());
        }
    }

    #[test]
    fn local_max_affine_invariant_for_cusum() {
        let n = 250;
        let series = shifted_series(
            n,
            &MeanSpec::Alternating { m: 2, delta: 3.0 },
            SeedSpec::new(100, 0),
        );
        let mapped =
            Series::new(series.values().iter().map(|&x| -1.5 * x + 3.0).collect()).unwrap();
        let c1 = score_curve(&cusum_process(&series).unwrap(), 0.1).unwrap();
        let c2 = score_curve(&cusum_process(&mapped).unwrap(), 0.1).unwrap();
        assert_eq!(
            local_max_cps(&c1, 10.0).indices(),
            local_max_cps(&c2, 10.0).indices()
        );
    }
}
