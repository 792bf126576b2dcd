//! `lsncp` command line: change-point tests, score curves, location
//! estimates, critical values, and simulation experiments.

use clap::{Args, Parser, Subcommand};
use lsncp::bench::bench_score_curve;
use lsncp::critval::{
    full_test, simulate_null_distribution, simulate_null_distribution_fbm, CritGrid, TestOptions,
};
use lsncp::detectors::DetectorKind;
use lsncp::error::LsnError;
use lsncp::estimate::{binary_segmentation, local_max_cps, sara_select, BinSegConfig, Criterion};
use lsncp::experiments::{
    parse_config, run_power_experiment, run_size_experiment, write_manifest, write_power_csv,
    write_size_csv, ExperimentSpec,
};
use lsncp::lsn::score_curve;
use lsncp::series::Series;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lsncp",
    version,
    about = "Locally self-normalized multiple change-point tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the change-point test on a series
    Test(TestArgs),
    /// Emit the score curve as CSV (k, score, argmax_d)
    Scores(ScoresArgs),
    /// Estimate change-point locations
    Estimate(EstimateArgs),
    /// Look up or simulate critical values
    Critval(CritvalArgs),
    /// Run a size/power experiment from a config file
    Simulate(SimulateArgs),
    /// Time the recursive sweep against brute force
    Bench(BenchArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV: one observation per line, optional header
    input: PathBuf,
    #[arg(long, default_value = "cusum")]
    detector: String,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also simulate a Monte Carlo p-value at (n, rho_hat)
    #[arg(long)]
    simulate_pvalue: bool,
    /// Replications for the simulated p-value
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulate the p-value under fractional Gaussian noise with this Hurst index
    #[arg(long)]
    hurst: Option<f64>,
    /// Machine-readable JSON output
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ScoresArgs {
    input: PathBuf,
    #[arg(long, default_value = "cusum")]
    detector: String,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Write CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    input: PathBuf,
    /// localmax | sara | binseg
    #[arg(long, default_value = "localmax")]
    method: String,
    #[arg(long, default_value = "cusum")]
    detector: String,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Score threshold for localmax/sara (default: the adjusted critical value)
    #[arg(long)]
    threshold: Option<f64>,
    /// Segment p-value threshold for binseg
    #[arg(long, default_value_t = 0.05)]
    p0: f64,
    /// Penalty multiplier of the selection criterion (sara)
    #[arg(long, default_value_t = 1.0)]
    penalty: f64,
    /// Replications per simulated null (binseg)
    #[arg(long, default_value_t = 400)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CritvalArgs {
    /// Interpolated table lookup: ALPHA N RHO
    #[arg(long, num_args = 3, value_names = ["ALPHA", "N", "RHO"])]
    lookup: Option<Vec<String>>,
    /// Simulate a null distribution cell instead
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulate under fractional Gaussian noise with this Hurst index
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment configuration (TOML key-value file)
    config: PathBuf,
    /// Directory for the CSV and manifest
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000, 4000])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Scores(args) => cmd_scores(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Critval(args) => cmd_critval(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// 2 for I/O and input parsing problems, 3 for parameter and feasibility
/// problems; a completed test run exits 0 regardless of the decision.
fn exit_code_for(err: &LsnError) -> u8 {
    match err {
        LsnError::Io(_) | LsnError::Parse(_) | LsnError::NonFinite { .. } => 2,
        _ => 3,
    }
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, LsnError> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(row) => rows.push(row),
            None if rows.is_empty() && line_no == 0 => {
                // header line: first token is not numeric
                continue;
            }
            None => {
                return Err(LsnError::Parse(format!(
                    "line {}: expected numeric fields, got `{line}`",
                    line_no + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(LsnError::Parse("no observations in input".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(LsnError::Parse("rows have inconsistent column counts".into()));
    }
    Ok(rows)
}

fn read_series(path: &Path) -> Result<Series, LsnError> {
    let rows = read_matrix(path)?;
    if rows[0].len() != 1 {
        return Err(LsnError::Parse(format!(
            "expected a univariate series (one column), got {} columns",
            rows[0].len()
        )));
    }
    Series::new(rows.into_iter().map(|r| r[0]).collect())
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), LsnError> {
    match path {
        Some(p) => {
            fs::write(p, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct TestReport {
    detector: &'static str,
    n: usize,
    epsilon: f64,
    alpha: f64,
    statistic: f64,
    rho_hat: f64,
    rho_hat_clamped: f64,
    critical_value: f64,
    p_value: Option<f64>,
    reject: bool,
}

fn cmd_test(args: TestArgs) -> Result<(), LsnError> {
    let series = read_series(&args.input)?;
    let detector: DetectorKind = args.detector.parse()?;
    let opts = TestOptions {
        epsilon: args.epsilon,
        alpha: args.alpha,
        pvalue_reps: if args.simulate_pvalue { args.reps } else { 0 },
        seed: args.seed,
        hurst: args.hurst,
    };
    let outcome = full_test(&series, detector, &opts)?;
    let report = TestReport {
        detector: detector.name(),
        n: series.len(),
        epsilon: outcome.epsilon,
        alpha: args.alpha,
        statistic: outcome.statistic,
        rho_hat: outcome.rho_hat.raw,
        rho_hat_clamped: outcome.rho_hat.clamped,
        critical_value: outcome.critical_value,
        p_value: outcome.p_value,
        reject: outcome.reject,
    };
    if args.json {
        println!("{}", serde_json::to_string(&report).expect("serializable"));
    } else {
        println!(
            "n: {}  detector: {}  epsilon: {}  alpha: {}",
            report.n, report.detector, report.epsilon, report.alpha
        );
        println!("statistic: {:.6}", report.statistic);
        println!(
            "rho_hat: {:.4} (clamped {:.4}, lag {})",
            report.rho_hat, report.rho_hat_clamped, outcome.rho_hat.block
        );
        println!("critical value: {:.4}", report.critical_value);
        if let Some(p) = report.p_value {
            println!("p-value: {p:.6}");
        }
        println!("reject: {}", report.reject);
        println!("elapsed: {:.1} ms", outcome.elapsed.as_secs_f64() * 1e3);
    }
    Ok(())
}

fn cmd_scores(args: ScoresArgs) -> Result<(), LsnError> {
    let series = read_series(&args.input)?;
    let detector: DetectorKind = args.detector.parse()?;
    let process = detector.build(&series)?;
    let curve = score_curve(&process, args.epsilon)?;
    let mut out = String::from("k,score,argmax_d\n");
    for (k, score, (d, _)) in curve.iter() {
        out.push_str(&format!("{k},{score},{d}\n"));
    }
    write_output(args.output.as_deref(), &out)
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), LsnError> {
    let series = read_series(&args.input)?;
    let detector: DetectorKind = args.detector.parse()?;
    let set = match args.method.as_str() {
        "localmax" | "sara" => {
            let process = detector.build(&series)?;
            let curve = score_curve(&process, args.epsilon)?;
            let threshold = match args.threshold {
                Some(t) => t,
                None => {
                    let rho = lsncp::critval::lag1_acf_differenced(&series)?;
                    CritGrid::embedded().lookup(args.alpha, series.len(), rho.clamped)?
                }
            };
            let initial = local_max_cps(&curve, threshold);
            if args.method == "sara" {
                sara_select(
                    &initial,
                    &series,
                    &Criterion::LeastSquaresBic {
                        penalty: args.penalty,
                    },
                )
            } else {
                initial
            }
        }
        "binseg" => {
            let cfg = BinSegConfig {
                p0: args.p0,
                epsilon: args.epsilon,
                detector,
                null_reps: args.reps,
                seed: args.seed,
            };
            binary_segmentation(&series, &cfg)?
        }
        other => {
            return Err(LsnError::invalid_parameter(
                "method",
                format!("unknown method `{other}`; expected localmax, sara or binseg"),
            ))
        }
    };
    let mut out = String::from("index,score,p_value\n");
    for p in set.points() {
        match p.p_value {
            Some(pv) => out.push_str(&format!("{},{},{}\n", p.index, p.score, pv)),
            None => out.push_str(&format!("{},{},\n", p.index, p.score)),
        }
    }
    write_output(args.output.as_deref(), &out)
}

#[derive(Serialize)]
struct CritvalReport {
    n: usize,
    epsilon: f64,
    reps: usize,
    seed: u64,
    model: String,
    q90: f64,
    q95: f64,
    q99: f64,
}

fn cmd_critval(args: CritvalArgs) -> Result<(), LsnError> {
    if let Some(lookup) = &args.lookup {
        let alpha: f64 = lookup[0]
            .parse()
            .map_err(|e| LsnError::Parse(format!("alpha: {e}")))?;
        let n: usize = lookup[1]
            .parse()
            .map_err(|e| LsnError::Parse(format!("n: {e}")))?;
        let rho: f64 = lookup[2]
            .parse()
            .map_err(|e| LsnError::Parse(format!("rho: {e}")))?;
        let value = CritGrid::embedded().lookup(alpha, n, rho)?;
        println!("{value}");
        return Ok(());
    }
    if !args.simulate {
        return Err(LsnError::invalid_parameter(
            "critval",
            "pass --lookup ALPHA N RHO or --simulate",
        ));
    }
    let null = match args.hurst {
        Some(h) => simulate_null_distribution_fbm(h, args.n, args.epsilon, args.reps, args.seed)?,
        None => simulate_null_distribution(args.n, args.rho, args.epsilon, args.reps, args.seed)?,
    };
    let report = CritvalReport {
        n: args.n,
        epsilon: args.epsilon,
        reps: args.reps,
        seed: args.seed,
        model: match args.hurst {
            Some(h) => format!("fgn(hurst={h})"),
            None => format!("ar(rho={})", args.rho),
        },
        q90: null.quantile(0.90),
        q95: null.quantile(0.95),
        q99: null.quantile(0.99),
    };
    if args.json {
        println!("{}", serde_json::to_string(&report).expect("serializable"));
    } else {
        println!("model: {}  n: {}  reps: {}  seed: {}", report.model, report.n, report.reps, report.seed);
        println!("quantile(0.90) = {:.4}", report.q90);
        println!("quantile(0.95) = {:.4}", report.q95);
        println!("quantile(0.99) = {:.4}", report.q99);
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), LsnError> {
    let config_text = fs::read_to_string(&args.config)?;
    let spec = parse_config(&config_text)?;
    fs::create_dir_all(&args.output_dir)?;
    let (csv_name, seed) = match &spec {
        ExperimentSpec::Size(cfg) => ("size.csv", cfg.seed),
        ExperimentSpec::Power(cfg) => ("power.csv", cfg.seed),
    };
    let csv_path = args.output_dir.join(csv_name);
    let mut csv = Vec::new();
    match spec {
        ExperimentSpec::Size(cfg) => {
            let table = run_size_experiment(&cfg)?;
            write_size_csv(&table, &mut csv)?;
        }
        ExperimentSpec::Power(cfg) => {
            let table = run_power_experiment(&cfg)?;
            write_power_csv(&table, &mut csv)?;
        }
    }
    fs::write(&csv_path, &csv)?;
    let manifest_path = args.output_dir.join("manifest.toml");
    let mut manifest = Vec::new();
    write_manifest(&config_text, seed, &mut manifest)?;
    fs::write(&manifest_path, &manifest)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), LsnError> {
    let report = bench_score_curve(&args.sizes, args.epsilon, args.seed)?;
    println!("{:>8} {:>14} {:>14} {:>10}", "n", "recursive_ms", "brute_ms", "speedup");
    for row in &report.rows {
        println!(
            "{:>8} {:>14.3} {:>14.3} {:>10.1}",
            row.n,
            row.recursive_secs * 1e3,
            row.brute_secs * 1e3,
            row.speedup
        );
    }
    println!(
        "recursive log-log slope: {:.3} (quadratic cost is 2.0)",
        report.recursive_loglog_slope
    );
    Ok(())
}
