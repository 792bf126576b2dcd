//! Locally self-normalized multiple change-point tests for time series.
//!
//! The pipeline has three interchangeable layers:
//!
//! 1. a global one-change-point detecting process ([`detectors`]): CUSUM,
//!    Wilcoxon ranks, Hodges-Lehmann medians, or any user-supplied subsample
//!    estimator;
//! 2. localization plus self-normalization ([`lsn`]), which turns the process
//!    into a per-split score curve without estimating a long-run variance;
//! 3. calibration ([`critval`]): finite-n adjusted critical values matched on
//!    the lag-1 autocorrelation of lag-b differences, with Monte Carlo
//!    p-values on demand (Brownian or fractional-Brownian null).
//!
//! On top of that sit change-point location estimators ([`estimate`]),
//! competing tests for benchmarking ([`baselines`]), and a simulation harness
//! ([`sim`], [`experiments`]) that reproduces size/power studies at desk
//! scale. The `lsncp` binary exposes all of it on the command line.

pub mod baselines;
pub mod bench;
pub mod critval;
pub mod detectors;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod fgn;
pub mod lsn;
pub mod rng;
pub mod series;
pub mod sim;
pub mod window;

pub use detectors::{DetectorKind, GlobalProcess, MultiProcess, ProcessKind, WindowEstimator};
pub use error::{LsnError, Result};
pub use lsn::{Aggregator, ScoreCurve};
pub use rng::SeedSpec;
pub use series::{MultiSeries, Series};
pub use window::{PrefixSums, Window};
