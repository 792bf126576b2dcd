//! Noise models and mean functions for the simulation studies.
//!
//! All noise recursions run on the zero-mean process `Z_i`; a signal is added
//! afterwards via [`mean_function`]. Every generator discards 1000 burn-in
//! steps so draws start from (near-)stationarity.

use crate::error::{LsnError, Result};
use crate::rng::SeedSpec;
use crate::series::Series;
use rand::Rng;
use rand_distr::{StandardNormal, StudentT};
use serde::Deserialize;

pub const BURN_IN: usize = 1000;

/// Innovation distribution for the noise recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Normal,
    StudentT { df: f64 },
}

impl Innovation {
    fn validate(&self) -> Result<()> {
        if let Innovation::StudentT { df } = self {
            if !(*df > 2.0) {
                return Err(LsnError::invalid_parameter(
                    "df",
                    format!("Student-t degrees of freedom must exceed 2, got {df}"),
                ));
            }
        }
        Ok(())
    }
}

/// The noise recursions of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// `Z_i = phi Z_{i-1} + e_i`
    Ar { phi: f64 },
    /// `Z_i = phi Z_{i-1} + e_i + psi e_{i-1}`
    Arma { phi: f64, psi: f64 },
    /// Bilinear: `Z_i = (varpi + vartheta e_i) Z_{i-1} + e_i`
    Bar { varpi: f64, vartheta: f64 },
    /// Threshold: the AR coefficient switches on the sign of `Z_{i-1}`
    Tar { positive: f64, negative: f64 },
    /// Absolute-value nonlinear: `Z_i = varpi |Z_{i-1}| + e_i sqrt(1 - varpi^2)`
    Nar { varpi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub innovation: Innovation,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, innovation: Innovation) -> Result<Self> {
        innovation.validate()?;
        let stationary = match kind {
            NoiseKind::Ar { phi } => phi.abs() < 1.0,
            NoiseKind::Arma { phi, psi } => phi.abs() < 1.0 && psi.abs() < 1.0,
            NoiseKind::Bar { varpi, vartheta } => varpi * varpi + vartheta * vartheta < 1.0,
            NoiseKind::Tar { positive, negative } => {
                positive.abs() < 1.0 && negative.abs() < 1.0
            }
            NoiseKind::Nar { varpi } => varpi.abs() < 1.0,
        };
        if !stationary {
            return Err(LsnError::invalid_parameter(
                "noise model",
                format!("parameters outside the stationarity region: {kind:?}"),
            ));
        }
        Ok(NoiseModel { kind, innovation })
    }

    pub fn ar(phi: f64) -> Result<Self> {
        NoiseModel::new(NoiseKind::Ar { phi }, Innovation::Normal)
    }

    pub fn iid() -> Self {
        NoiseModel {
            kind: NoiseKind::Ar { phi: 0.0 },
            innovation: Innovation::Normal,
        }
    }

    pub fn describe(&self) -> String {
        let kind = match self.kind {
            NoiseKind::Ar { phi } => format!("ar(phi={phi})"),
            NoiseKind::Arma { phi, psi } => format!("arma(phi={phi},psi={psi})"),
            NoiseKind::Bar { varpi, vartheta } => {
                format!("bar(varpi={varpi},vartheta={vartheta})")
            }
            NoiseKind::Tar { positive, negative } => {
                format!("tar(pos={positive},neg={negative})")
            }
            NoiseKind::Nar { varpi } => format!("nar(varpi={varpi})"),
        };
        match self.innovation {
            Innovation::Normal => kind,
            Innovation::StudentT { df } => format!("{kind}/t{df}"),
        }
    }
}

/// Draw a stationary length-n path of the model, burn-in discarded.
pub fn generate_noise(model: &NoiseModel, n: usize, seed: SeedSpec) -> Result<Series> {
    if n == 0 {
        return Err(LsnError::TooShort { min: 1, got: 0 });
    }
    // revalidate so hand-built structs cannot smuggle explosive parameters
    NoiseModel::new(model.kind, model.innovation)?;
    let mut rng = seed.rng();
    let student = match model.innovation {
        Innovation::StudentT { df } => Some(StudentT::new(df).map_err(|e| {
            LsnError::invalid_parameter("df", e.to_string())
        })?),
        Innovation::Normal => None,
    };
    let draw = move |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        match &student {
            Some(t) => rng.sample(*t),
            None => rng.sample(StandardNormal),
        }
    };

    let mut z = 0.0f64;
    let mut prev_eps = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for step in 0..(BURN_IN + n) {
        let eps = draw(&mut rng);
        z = match model.kind {
            NoiseKind::Ar { phi } => phi * z + eps,
            NoiseKind::Arma { phi, psi } => phi * z + eps + psi * prev_eps,
            NoiseKind::Bar { varpi, vartheta } => (varpi + vartheta * eps) * z + eps,
            NoiseKind::Tar { positive, negative } => {
                let coef = if z >= 0.0 { positive } else { negative };
                coef * z + eps
            }
            NoiseKind::Nar { varpi } => varpi * z.abs() + eps * (1.0 - varpi * varpi).sqrt(),
        };
        prev_eps = eps;
        if step >= BURN_IN {
            out.push(z);
        }
    }
    Series::new(out)
}

/// Deterministic mean (signal) specifications.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanSpec {
    /// No change: `mu = 0`.
    Null,
    /// `m` evenly spaced changes with alternating directions and magnitude
    /// `delta`: jump `j` happens where `i (m+1) > j n`.
    Alternating { m: usize, delta: f64 },
    /// Three changes of equal magnitude at n/4, 2n/4, 3n/4.
    Case1 { delta: f64 },
    /// Same change times, but the outer jumps at half magnitude.
    Case2 { delta: f64 },
    /// Unevenly spaced changes at 0.15n, 0.3n, 0.85n.
    Case3 { delta: f64 },
    /// Explicit piecewise-constant levels: `mu_i = level_j` for
    /// `i > at_j` (starting level 0); change indices strictly increasing.
    Custom { steps: Vec<(usize, f64)> },
}

impl MeanSpec {
    fn validate(&self, n: usize) -> Result<()> {
        if let MeanSpec::Custom { steps } = self {
            let mut prev = 0usize;
            for &(at, _) in steps {
                if at <= prev && !(prev == 0 && at > 0) {
                    return Err(LsnError::invalid_parameter(
                        "steps",
                        "change indices must be strictly increasing and >= 1",
                    ));
                }
                if at >= n {
                    return Err(LsnError::invalid_parameter(
                        "steps",
                        format!("change index {at} not below n={n}"),
                    ));
                }
                prev = at;
            }
        }
        Ok(())
    }

    /// Indices `k` with `mu_k != mu_{k+1}`.
    pub fn change_points(&self, n: usize) -> Vec<usize> {
        let mu = mean_values(self, n);
        (1..n).filter(|&k| mu[k] != mu[k - 1]).map(|k| k).collect()
    }
}

fn mean_values(spec: &MeanSpec, n: usize) -> Vec<f64> {
    let mut mu = vec![0.0; n];
    match spec {
        MeanSpec::Null => {}
        MeanSpec::Alternating { m, delta } => {
            for (idx, slot) in mu.iter_mut().enumerate() {
                let i = idx + 1;
                let mut acc = 0.0;
                for j in 1..=*m {
                    // i/n > j/(m+1), kept in integers
                    if i * (m + 1) > j * n {
                        acc += if j % 2 == 1 { *delta } else { -*delta };
                    }
                }
                *slot = acc;
            }
        }
        MeanSpec::Case1 { delta } | MeanSpec::Case2 { delta } => {
            let outer = if matches!(spec, MeanSpec::Case2 { .. }) {
                0.5
            } else {
                1.0
            };
            let (a, b, c) = (n / 4, 2 * n / 4, 3 * n / 4);
            for (idx, slot) in mu.iter_mut().enumerate() {
                let i = idx + 1;
                let mut acc = 0.0;
                if i > a {
                    acc += outer * delta;
                }
                if i > b {
                    acc -= delta;
                }
                if i > c {
                    acc += outer * delta;
                }
                *slot = acc;
            }
        }
        MeanSpec::Case3 { delta } => {
            let (a, b, c) = (
                (0.15 * n as f64).floor() as usize,
                (0.3 * n as f64).floor() as usize,
                (0.85 * n as f64).floor() as usize,
            );
            for (idx, slot) in mu.iter_mut().enumerate() {
                let i = idx + 1;
                let mut acc = 0.0;
                if i > a {
                    acc += delta;
                }
                if i > b {
                    acc -= delta;
                }
                if i > c {
                    acc += delta;
                }
                *slot = acc;
            }
        }
        MeanSpec::Custom { steps } => {
            for (idx, slot) in mu.iter_mut().enumerate() {
                let i = idx + 1;
                let mut level = 0.0;
                for &(at, value) in steps {
                    if i > at {
                        level = value;
                    }
                }
                *slot = level;
            }
        }
    }
    mu
}

/// Evaluate the mean function `mu_1..mu_n`.
pub fn mean_function(spec: &MeanSpec, n: usize) -> Result<Series> {
    if n == 0 {
        return Err(LsnError::TooShort { min: 1, got: 0 });
    }
    spec.validate(n)?;
    Series::new(mean_values(spec, n))
}

/// Signal plus noise: `X = mu + Z`.
pub fn add_mean(noise: &Series, mu: &Series) -> Series {
    Series::new(
        noise
            .values()
            .iter()
            .zip(mu.values())
            .map(|(z, m)| z + m)
            .collect(),
    )
    .expect("finite by construction")
}
