//! Size / power experiment harness.
//!
//! An experiment runs a grid of noise-model parameter cases, draws `reps`
//! replications per case with one RNG stream per replication, evaluates a
//! set of competing test statistics on every replication, and reduces to
//! rejection rates. Power experiments additionally sweep a mean-change
//! magnitude grid, reusing the same noise streams across magnitudes so the
//! power curves are smooth in delta.
//!
//! Decision rules per test:
//! * the localized self-normalized tests use the finite-n adjusted critical
//!   value `c_alpha(n, rho_hat)` with `rho_hat` re-estimated per replication;
//! * the Kolmogorov-Smirnov test uses its analytic sup-of-bridge cutoff;
//! * the remaining self-normalized baselines have no tabulated finite-n
//!   values here, so their raw cutoffs are simulated once per run under iid
//!   Gaussian noise at the experiment's n (cached, seeded deterministically).
//!
//! Size-adjusted power replaces every cutoff with the empirical (1 - alpha)
//! quantile of the test's own statistics on the matched null arm (delta = 0)
//! of the same experiment.

use crate::baselines::{kolmogorov_sf, ks_test, shao_m_cp, shao_one_cp, zhang_test};
use crate::critval::{lag1_acf_differenced, quantile_sorted, CritGrid};
use crate::error::{LsnError, Result};
use crate::lsn::lsn_test_statistic;
use crate::rng::{derive_seed, SeedSpec};
use crate::series::Series;
use crate::sim::{
    add_mean, generate_noise, mean_function, Innovation, MeanSpec, NoiseKind, NoiseModel,
};
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::io::Write;

/// The competing tests the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TestKind {
    Ks,
    ShaoOne,
    ShaoTwo,
    ShaoThree,
    Zhang,
    LsnCusum,
    LsnWilcoxon,
    LsnHodgesLehmann,
}

impl TestKind {
    pub fn name(&self) -> &'static str {
        match self {
            TestKind::Ks => "KS",
            TestKind::ShaoOne => "S1",
            TestKind::ShaoTwo => "S2",
            TestKind::ShaoThree => "S3",
            TestKind::Zhang => "Z",
            TestKind::LsnCusum => "T_C",
            TestKind::LsnWilcoxon => "T_W",
            TestKind::LsnHodgesLehmann => "T_H",
        }
    }

    /// Localized self-normalized tests calibrate against the adjusted
    /// critical-value table.
    pub fn uses_adjusted_table(&self) -> bool {
        matches!(
            self,
            TestKind::LsnCusum | TestKind::LsnWilcoxon | TestKind::LsnHodgesLehmann
        )
    }

    pub fn statistic(&self, series: &Series, epsilon: f64) -> Result<f64> {
        match self {
            TestKind::Ks => Ok(ks_test(series)?.statistic),
            TestKind::ShaoOne => shao_one_cp(series),
            TestKind::ShaoTwo => shao_m_cp(series, 2, epsilon),
            TestKind::ShaoThree => shao_m_cp(series, 3, epsilon),
            TestKind::Zhang => zhang_test(series, epsilon),
            TestKind::LsnCusum => {
                lsn_test_statistic(&crate::detectors::cusum_process(series)?, epsilon)
            }
            TestKind::LsnWilcoxon => {
                lsn_test_statistic(&crate::detectors::wilcoxon_process(series)?, epsilon)
            }
            TestKind::LsnHodgesLehmann => {
                lsn_test_statistic(&crate::detectors::hodges_lehmann_process(series)?, epsilon)
            }
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = LsnError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ks" => TestKind::Ks,
            "s1" => TestKind::ShaoOne,
            "s2" => TestKind::ShaoTwo,
            "s3" => TestKind::ShaoThree,
            "z" | "zhang" => TestKind::Zhang,
            "t-cusum" | "t_c" | "tc" => TestKind::LsnCusum,
            "t-wilcoxon" | "t_w" | "tw" => TestKind::LsnWilcoxon,
            "t-hl" | "t_h" | "th" => TestKind::LsnHodgesLehmann,
            other => {
                return Err(LsnError::Parse(format!(
                    "unknown test `{other}`; expected ks, s1, s2, s3, z, t-cusum, \
                     t-wilcoxon or t-hl"
                )))
            }
        })
    }
}

/// A fully resolved size experiment.
#[derive(Debug, Clone)]
pub struct SizeExperiment {
    pub models: Vec<NoiseModel>,
    pub n: usize,
    pub reps: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub seed: u64,
    pub tests: Vec<TestKind>,
}

/// A fully resolved power experiment.
#[derive(Debug, Clone)]
pub struct PowerExperiment {
    pub models: Vec<NoiseModel>,
    pub mean: MeanFamily,
    pub deltas: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub seed: u64,
    pub tests: Vec<TestKind>,
}

/// Mean-change families the config file can request; the magnitude slot is
/// filled per grid value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanFamily {
    Alternating { m: usize },
    Case1,
    Case2,
    Case3,
}

impl MeanFamily {
    pub fn spec(&self, delta: f64) -> MeanSpec {
        match self {
            MeanFamily::Alternating { m } => MeanSpec::Alternating { m: *m, delta },
            MeanFamily::Case1 => MeanSpec::Case1 { delta },
            MeanFamily::Case2 => MeanSpec::Case2 { delta },
            MeanFamily::Case3 => MeanSpec::Case3 { delta },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            MeanFamily::Alternating { m } => format!("alternating(m={m})"),
            MeanFamily::Case1 => "case1".into(),
            MeanFamily::Case2 => "case2".into(),
            MeanFamily::Case3 => "case3".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SizeRow {
    pub test: &'static str,
    pub model: String,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SizeTable {
    pub rows: Vec<SizeRow>,
    /// Root mean squared deviation of the rejection rate from alpha, per
    /// test, across the model cases.
    pub rmse: Vec<(&'static str, f64)>,
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PowerRow {
    pub test: &'static str,
    pub model: String,
    pub mean: String,
    pub delta: f64,
    pub power_raw: f64,
    pub power_adjusted: f64,
}

#[derive(Debug, Clone)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

fn validate_common(n: usize, reps: usize, epsilon: f64, alpha: f64, tests: &[TestKind]) -> Result<()> {
    if reps == 0 {
        return Err(LsnError::invalid_parameter("reps", "must be positive"));
    }
    if n < 20 {
        return Err(LsnError::TooShort { min: 20, got: n });
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(LsnError::invalid_parameter(
            "epsilon",
            format!("must lie in (0, 0.5), got {epsilon}"),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LsnError::invalid_parameter(
            "alpha",
            format!("must lie in (0, 1), got {alpha}"),
        ));
    }
    if tests.is_empty() {
        return Err(LsnError::invalid_parameter("tests", "no tests requested"));
    }
    Ok(())
}

/// Simulated iid-noise cutoffs for the baselines without tabulated values.
struct BaselineCutoffs {
    cutoffs: BTreeMap<TestKind, f64>,
}

impl BaselineCutoffs {
    fn compute(
        tests: &[TestKind],
        n: usize,
        epsilon: f64,
        alpha: f64,
        seed: u64,
        reps: usize,
    ) -> Result<Self> {
        let mut cutoffs = BTreeMap::new();
        let iid = NoiseModel::iid();
        for (i, kind) in tests.iter().enumerate() {
            if kind.uses_adjusted_table() || *kind == TestKind::Ks {
                continue;
            }
            let master = derive_seed(seed, 0xBA5E, i as u64);
            let mut draws: Vec<f64> = (0..reps as u64)
                .into_par_iter()
                .map(|r| {
                    let series = generate_noise(&iid, n, SeedSpec::new(master, r))
                        .expect("validated model");
                    kind.statistic(&series, epsilon).expect("validated inputs")
                })
                .collect();
            draws.sort_by(f64::total_cmp);
            cutoffs.insert(*kind, quantile_sorted(&draws, 1.0 - alpha));
        }
        Ok(BaselineCutoffs { cutoffs })
    }

    fn get(&self, kind: TestKind) -> f64 {
        self.cutoffs[&kind]
    }
}

struct RepOutcome {
    /// statistic per (delta, test)
    stats: Vec<Vec<f64>>,
    /// adjusted critical value `c_alpha(n, rho_hat)` per delta
    adjusted_crit: Vec<f64>,
}

fn evaluate_case(
    model: &NoiseModel,
    means: &[Series],
    tests: &[TestKind],
    n: usize,
    reps: usize,
    epsilon: f64,
    alpha: f64,
    seed: u64,
    case_index: usize,
) -> Result<Vec<RepOutcome>> {
    let grid = CritGrid::embedded();
    (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<RepOutcome> {
            let stream = case_index as u64 * reps as u64 + r;
            let noise = generate_noise(model, n, SeedSpec::new(seed, stream))?;
            let mut stats = Vec::with_capacity(means.len());
            let mut adjusted_crit = Vec::with_capacity(means.len());
            for mu in means {
                let series = add_mean(&noise, mu);
                let rho = lag1_acf_differenced(&series)?;
                adjusted_crit.push(grid.lookup(alpha, n, rho.clamped)?);
                let mut row = Vec::with_capacity(tests.len());
                for kind in tests {
                    row.push(kind.statistic(&series, epsilon)?);
                }
                stats.push(row);
            }
            Ok(RepOutcome {
                stats,
                adjusted_crit,
            })
        })
        .collect()
}

fn raw_reject(
    kind: TestKind,
    stat: f64,
    adjusted_crit: f64,
    alpha: f64,
    baselines: &BaselineCutoffs,
) -> bool {
    if kind.uses_adjusted_table() {
        stat > adjusted_crit
    } else if kind == TestKind::Ks {
        kolmogorov_sf(stat) < alpha
    } else {
        stat > baselines.get(kind)
    }
}

/// Null rejection rates per (model case, test), plus the per-test RMSE of
/// the rejection rate against the nominal level.
pub fn run_size_experiment(cfg: &SizeExperiment) -> Result<SizeTable> {
    validate_common(cfg.n, cfg.reps, cfg.epsilon, cfg.alpha, &cfg.tests)?;
    if cfg.models.is_empty() {
        return Err(LsnError::invalid_parameter("models", "no model cases"));
    }
    let baselines = BaselineCutoffs::compute(
        &cfg.tests,
        cfg.n,
        cfg.epsilon,
        cfg.alpha,
        cfg.seed,
        cfg.reps.max(500),
    )?;
    let null_mean = mean_function(&MeanSpec::Null, cfg.n)?;
    let mut rows = Vec::new();
    let mut deviations: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for (case_index, model) in cfg.models.iter().enumerate() {
        let outcomes = evaluate_case(
            model,
            std::slice::from_ref(&null_mean),
            &cfg.tests,
            cfg.n,
            cfg.reps,
            cfg.epsilon,
            cfg.alpha,
            cfg.seed,
            case_index,
        )?;
        for (t, kind) in cfg.tests.iter().enumerate() {
            let rejections = outcomes
                .iter()
                .filter(|o| raw_reject(*kind, o.stats[0][t], o.adjusted_crit[0], cfg.alpha, &baselines))
                .count();
            let rate = rejections as f64 / cfg.reps as f64;
            deviations
                .entry(kind.name())
                .or_default()
                .push(rate - cfg.alpha);
            rows.push(SizeRow {
                test: kind.name(),
                model: model.describe(),
                rejection_rate: rate,
            });
        }
    }
    let rmse = deviations
        .into_iter()
        .map(|(name, devs)| {
            let mean_sq = devs.iter().map(|d| d * d).sum::<f64>() / devs.len() as f64;
            (name, mean_sq.sqrt())
        })
        .collect();
    Ok(SizeTable {
        rows,
        rmse,
        n: cfg.n,
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        reps: cfg.reps,
        seed: cfg.seed,
    })
}

/// Raw and size-adjusted power over the delta grid, sharing noise streams
/// across deltas (common random numbers).
pub fn run_power_experiment(cfg: &PowerExperiment) -> Result<PowerTable> {
    validate_common(cfg.n, cfg.reps, cfg.epsilon, cfg.alpha, &cfg.tests)?;
    if cfg.models.is_empty() {
        return Err(LsnError::invalid_parameter("models", "no model cases"));
    }
    if cfg.deltas.is_empty() {
        return Err(LsnError::invalid_parameter("deltas", "empty delta grid"));
    }
    let baselines = BaselineCutoffs::compute(
        &cfg.tests,
        cfg.n,
        cfg.epsilon,
        cfg.alpha,
        cfg.seed,
        cfg.reps.max(500),
    )?;
    // delta = 0 is the null arm; prepend it when absent so size-adjusted
    // cutoffs always come from the matched null
    let mut deltas = cfg.deltas.clone();
    let has_zero = deltas.iter().any(|&d| d == 0.0);
    if !has_zero {
        deltas.insert(0, 0.0);
    }
    let means: Vec<Series> = deltas
        .iter()
        .map(|&d| mean_function(&cfg.mean.spec(d), cfg.n))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (case_index, model) in cfg.models.iter().enumerate() {
        let outcomes = evaluate_case(
            model,
            &means,
            &cfg.tests,
            cfg.n,
            cfg.reps,
            cfg.epsilon,
            cfg.alpha,
            cfg.seed,
            case_index,
        )?;
        let zero_idx = deltas.iter().position(|&d| d == 0.0).unwrap();
        for (t, kind) in cfg.tests.iter().enumerate() {
            // matched-null cutoff for size adjustment
            let mut null_stats: Vec<f64> =
                outcomes.iter().map(|o| o.stats[zero_idx][t]).collect();
            null_stats.sort_by(f64::total_cmp);
            let adjusted_cutoff = quantile_sorted(&null_stats, 1.0 - cfg.alpha);
            for (d_idx, &delta) in deltas.iter().enumerate() {
                if !has_zero && d_idx == zero_idx {
                    continue;
                }
                let mut raw = 0usize;
                let mut adjusted = 0usize;
                for o in &outcomes {
                    let stat = o.stats[d_idx][t];
                    if raw_reject(*kind, stat, o.adjusted_crit[d_idx], cfg.alpha, &baselines) {
                        raw += 1;
                    }
                    if stat > adjusted_cutoff {
                        adjusted += 1;
                    }
                }
                rows.push(PowerRow {
                    test: kind.name(),
                    model: model.describe(),
                    mean: cfg.mean.describe(),
                    delta,
                    power_raw: raw as f64 / cfg.reps as f64,
                    power_adjusted: adjusted as f64 / cfg.reps as f64,
                });
            }
        }
    }
    Ok(PowerTable {
        rows,
        n: cfg.n,
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        reps: cfg.reps,
        seed: cfg.seed,
    })
}

// ---------------------------------------------------------------------------
// config file parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    model: String,
    #[serde(default)]
    phi: Option<OneOrMany>,
    #[serde(default)]
    psi: Option<OneOrMany>,
    #[serde(default)]
    varpi: Option<OneOrMany>,
    #[serde(default)]
    vartheta: Option<OneOrMany>,
    #[serde(default)]
    varpi1: Option<OneOrMany>,
    #[serde(default)]
    varpi2: Option<OneOrMany>,
    #[serde(default = "default_innovation")]
    innovation: String,
    #[serde(default = "default_df")]
    df: f64,
    n: usize,
    reps: usize,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    seed: u64,
    tests: Vec<String>,
    #[serde(default)]
    mean: Option<String>,
    #[serde(default)]
    m: Option<usize>,
    #[serde(default)]
    deltas: Option<Vec<f64>>,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_alpha() -> f64 {
    0.05
}

fn default_innovation() -> String {
    "normal".into()
}

fn default_df() -> f64 {
    5.0
}

/// A parsed experiment configuration.
#[derive(Debug, Clone)]
pub enum ExperimentSpec {
    Size(SizeExperiment),
    Power(PowerExperiment),
}

fn require_params(values: Option<&OneOrMany>, name: &'static str) -> Result<Vec<f64>> {
    values
        .map(|v| v.values())
        .filter(|v| !v.is_empty())
        .ok_or_else(|| LsnError::invalid_parameter(name, "required by the chosen model"))
}

fn build_models(raw: &RawConfig) -> Result<Vec<NoiseModel>> {
    let innovation = match raw.innovation.as_str() {
        "normal" => Innovation::Normal,
        "student-t" | "t" => Innovation::StudentT { df: raw.df },
        other => {
            return Err(LsnError::invalid_parameter(
                "innovation",
                format!("unknown innovation `{other}`"),
            ))
        }
    };
    let kinds: Vec<NoiseKind> = match raw.model.as_str() {
        "iid" => vec![NoiseKind::Ar { phi: 0.0 }],
        "ar" => require_params(raw.phi.as_ref(), "phi")?
            .into_iter()
            .map(|phi| NoiseKind::Ar { phi })
            .collect(),
        "arma" => {
            let mut kinds = Vec::new();
            for phi in require_params(raw.phi.as_ref(), "phi")? {
                for psi in require_params(raw.psi.as_ref(), "psi")? {
                    kinds.push(NoiseKind::Arma { phi, psi });
                }
            }
            kinds
        }
        "bar" => {
            let mut kinds = Vec::new();
            for varpi in require_params(raw.varpi.as_ref(), "varpi")? {
                for vartheta in require_params(raw.vartheta.as_ref(), "vartheta")? {
                    kinds.push(NoiseKind::Bar { varpi, vartheta });
                }
            }
            kinds
        }
        "tar" => {
            let mut kinds = Vec::new();
            for positive in require_params(raw.varpi1.as_ref(), "varpi1")? {
                for negative in require_params(raw.varpi2.as_ref(), "varpi2")? {
                    kinds.push(NoiseKind::Tar { positive, negative });
                }
            }
            kinds
        }
        "nar" => require_params(raw.varpi.as_ref(), "varpi")?
            .into_iter()
            .map(|varpi| NoiseKind::Nar { varpi })
            .collect(),
        other => {
            return Err(LsnError::invalid_parameter(
                "model",
                format!("unknown model `{other}`"),
            ))
        }
    };
    kinds
        .into_iter()
        .map(|kind| NoiseModel::new(kind, innovation))
        .collect()
}

/// Parse a TOML experiment configuration.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| LsnError::Parse(e.to_string()))?;
    let models = build_models(&raw)?;
    let tests: Vec<TestKind> = raw
        .tests
        .iter()
        .map(|t| t.parse())
        .collect::<Result<_>>()?;
    match raw.experiment.as_str() {
        "size" => Ok(ExperimentSpec::Size(SizeExperiment {
            models,
            n: raw.n,
            reps: raw.reps,
            epsilon: raw.epsilon,
            alpha: raw.alpha,
            seed: raw.seed,
            tests,
        })),
        "power" => {
            let mean = match raw.mean.as_deref() {
                Some("alternating") => MeanFamily::Alternating {
                    m: raw.m.ok_or_else(|| {
                        LsnError::invalid_parameter("m", "alternating mean needs m")
                    })?,
                },
                Some("case1") => MeanFamily::Case1,
                Some("case2") => MeanFamily::Case2,
                Some("case3") => MeanFamily::Case3,
                Some(other) => {
                    return Err(LsnError::invalid_parameter(
                        "mean",
                        format!("unknown mean family `{other}`"),
                    ))
                }
                None => {
                    return Err(LsnError::invalid_parameter(
                        "mean",
                        "power experiments need a mean family",
                    ))
                }
            };
            let deltas = raw.deltas.clone().ok_or_else(|| {
                LsnError::invalid_parameter("deltas", "power experiments need a delta grid")
            })?;
            Ok(ExperimentSpec::Power(PowerExperiment {
                models,
                mean,
                deltas,
                n: raw.n,
                reps: raw.reps,
                epsilon: raw.epsilon,
                alpha: raw.alpha,
                seed: raw.seed,
                tests,
            }))
        }
        other => Err(LsnError::invalid_parameter(
            "experiment",
            format!("unknown experiment `{other}`"),
        )),
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

pub fn write_size_csv(table: &SizeTable, out: &mut impl Write) -> Result<()> {
    writeln!(out, "test,model,n,epsilon,reps,seed,metric,value")?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},rejection_rate,{}",
            row.test, row.model, table.n, table.epsilon, table.reps, table.seed, row.rejection_rate
        )?;
    }
    for (test, rmse) in &table.rmse {
        writeln!(
            out,
            "{},all,{},{},{},{},rmse,{}",
            test, table.n, table.epsilon, table.reps, table.seed, rmse
        )?;
    }
    Ok(())
}

pub fn write_power_csv(table: &PowerTable, out: &mut impl Write) -> Result<()> {
    writeln!(
        out,
        "test,model,mean,delta,n,epsilon,reps,seed,power_raw,power_adjusted"
    )?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.test,
            row.model,
            row.mean,
            row.delta,
            table.n,
            table.epsilon,
            table.reps,
            table.seed,
            row.power_raw,
            row.power_adjusted
        )?;
    }
    Ok(())
}

/// Run manifest: enough to reproduce the CSV byte for byte.
pub fn write_manifest(config_text: &str, seed: u64, out: &mut impl Write) -> Result<()> {
    writeln!(out, "crate = \"lsncp\"")?;
    writeln!(out, "version = \"{}\"", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "seed = {seed}")?;
    writeln!(out, "config = '''")?;
    write!(out, "{config_text}")?;
    if !config_text.ends_with('\n') {
        writeln!(out)?;
    }
    writeln!(out, "'''")?;
    Ok(())
}
