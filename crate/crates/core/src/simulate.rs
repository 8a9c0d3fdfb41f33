//! Brownian covariates, deviation functionals and Monte Carlo level/power studies.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{BootstrapDraws, BootstrapPlan};
use crate::error::{Error, Result};
use crate::funcspace::{kl_sine, Curve, Grid};
use crate::models::ModelKind;
use crate::pipeline::{PreparedTest, TestConfig};
use crate::rng::{derive_seed, stream_rng, tag};
use crate::scalar::Scalar;

/// Karhunen–Loève terms used when a scenario does not say otherwise.
pub const DEFAULT_KL_TERMS: usize = 100;

/// Bandwidths explored by default.
pub const DEFAULT_BANDWIDTHS: [f64; 4] = [0.18, 0.30, 0.44, 0.59];

/// Brownian paths from the truncated expansion
/// `X(t) = Σ_{j≤J} x_j √2 sin((j − ½)πt) / ((j − ½)π)`.
pub fn simulate_brownian<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    grid: &Arc<Grid<T>>,
    terms: usize,
    rng: &mut R,
) -> Result<Vec<Curve<T>>> {
    if terms == 0 {
        return Err(Error::InvalidArgument("need at least one KL term".into()));
    }
    // basis[j][g] = √2 sin((j − ½)π t_g) / ((j − ½)π)
    let basis: Vec<Vec<T>> = (1..=terms)
        .map(|j| {
            let scale = T::one() / ((T::lit(j as f64) - T::lit(0.5)) * T::PI());
            grid.points()
                .iter()
                .map(|&t| kl_sine(j, t) * scale)
                .collect()
        })
        .collect();
    (0..n)
        .map(|_| {
            let mut values = vec![T::zero(); grid.len()];
            for b in &basis {
                let x = T::standard_normal(rng);
                for (v, &bg) in values.iter_mut().zip(b) {
                    *v += x * bg;
                }
            }
            Curve::new(grid.clone(), values)
        })
        .collect()
}

/// `c((∫X)² − 1/3)`.
pub fn delta_quadratic<T: Scalar>(x: &Curve<T>, c: T) -> T {
    let m = x.integral();
    c * (m * m - T::one() / T::lit(3.0))
}

/// `d((∫X)³ − ∫X)`.
pub fn delta_cubic<T: Scalar>(x: &Curve<T>, d: T) -> T {
    let m = x.integral();
    d * (m * m * m - m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `Y = ∫X + U`.
    LinearNull,
    /// `Y = ∫X + c((∫X)² − 1/3) + U`, tested against the linear model.
    LinearVsQuadratic,
    /// `Y = ∫X + d((∫X)³ − ∫X) + U`, tested against the linear model.
    LinearVsCubic,
    /// `Y = ∫X + 0.6(∫X)² + d((∫X)³ − ∫X) + U`, tested against the quadratic model.
    QuadraticVsCubic,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::LinearNull => "linear_null",
            ScenarioKind::LinearVsQuadratic => "linear_vs_quadratic",
            ScenarioKind::LinearVsCubic => "linear_vs_cubic",
            ScenarioKind::QuadraticVsCubic => "quadratic_vs_cubic",
        }
    }

    /// Model family fitted under the null.
    pub fn null_model(self) -> ModelKind {
        match self {
            ScenarioKind::QuadraticVsCubic => ModelKind::Quadratic,
            _ => ModelKind::Linear,
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linear_null" => Ok(ScenarioKind::LinearNull),
            "linear_vs_quadratic" => Ok(ScenarioKind::LinearVsQuadratic),
            "linear_vs_cubic" => Ok(ScenarioKind::LinearVsCubic),
            "quadratic_vs_cubic" => Ok(ScenarioKind::QuadraticVsCubic),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A data-generating process; `deviation = 0` is the null of the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scenario<T> {
    pub kind: ScenarioKind,
    pub n: usize,
    /// `c` or `d`; ignored by `linear_null`.
    pub deviation: T,
    pub kl_terms: usize,
    pub noise_sd: T,
    pub grid_size: usize,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(kind: ScenarioKind, n: usize, deviation: T) -> Self {
        Self {
            kind,
            n,
            deviation,
            kl_terms: DEFAULT_KL_TERMS,
            noise_sd: T::one(),
            grid_size: crate::funcspace::DEFAULT_GRID_SIZE,
        }
    }

    /// Systematic part `E(Y | X)`.
    pub fn regression(&self, x: &Curve<T>) -> T {
        let m = x.integral();
        match self.kind {
            ScenarioKind::LinearNull => m,
            ScenarioKind::LinearVsQuadratic => m + delta_quadratic(x, self.deviation),
            ScenarioKind::LinearVsCubic => m + delta_cubic(x, self.deviation),
            ScenarioKind::QuadraticVsCubic => {
                m + T::lit(0.6) * m * m + delta_cubic(x, self.deviation)
            }
        }
    }
}

/// Draws `(X, Y)` for one Monte Carlo sample.
pub fn generate_scenario<T: Scalar, R: Rng + ?Sized>(
    scenario: &Scenario<T>,
    rng: &mut R,
) -> Result<(Vec<Curve<T>>, Vec<T>)> {
    let grid = Arc::new(Grid::uniform(scenario.grid_size)?);
    let x = simulate_brownian(scenario.n, &grid, scenario.kl_terms, rng)?;
    let y = x
        .iter()
        .map(|c| scenario.regression(c) + scenario.noise_sd * T::standard_normal(rng))
        .collect();
    Ok((x, y))
}

/// Rejections of one Monte Carlo sample, one entry per bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ReplicateOutcome<T> {
    pub statistic: T,
    pub p_value: f64,
    pub reject: bool,
    pub gamma_hat_is_gamma0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: String,
    pub deviation: f64,
    pub h: f64,
    pub rejection_rate: f64,
    /// `√(r(1 − r)/reps)`.
    pub se: f64,
    /// Replicates that produced a decision.
    pub mc_reps: usize,
    /// Fraction of replicates whose selected direction was `γ0`.
    pub gamma0_fraction: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    /// Mean rejection rate over the rows.
    pub fn average_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        self.rows.iter().map(|r| r.rejection_rate).sum::<f64>() / self.rows.len() as f64
    }

    /// Long format: `scenario,deviation,h,rejection_rate,se,mc_reps,gamma0_fraction,failed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Outcomes of every replicate at every bandwidth: `outcomes[rep][k]` for
/// bandwidth `k`, or the error that stopped the replicate.
pub fn run_replicates<T: Scalar>(
    scenario: &Scenario<T>,
    bandwidths: &[T],
    config: &TestConfig<T>,
    mc_reps: usize,
    plan: &BootstrapPlan,
) -> Result<Vec<Result<Vec<ReplicateOutcome<T>>>>> {
    if mc_reps == 0 {
        return Err(Error::InvalidArgument("mc_reps must be positive".into()));
    }
    if bandwidths.is_empty() {
        return Err(Error::InvalidArgument("empty bandwidth grid".into()));
    }
    let mut config = config.clone();
    config.model = scenario.kind.null_model();
    config.bandwidths = bandwidths.to_vec();
    config.validate()?;
    plan.validate()?;
    let level = config.level.as_f64();
    Ok((0..mc_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(config.seed, &[tag::DATA, rep as u64]);
            let (x, y) = generate_scenario(scenario, &mut rng)?;
            let prep = PreparedTest::new(&config, &x, &y)?;
            let rep_plan = BootstrapPlan {
                seed: derive_seed(plan.seed, &[tag::REPLICATE, rep as u64]),
                ..*plan
            };
            let draws = BootstrapDraws::generate(&prep, &rep_plan)?;
            bandwidths
                .iter()
                .map(|&h| {
                    let r = prep.evaluate(h, Some(&draws), false)?;
                    let p_value = r.p_value_bootstrap.unwrap_or(r.p_value_normal);
                    Ok(ReplicateOutcome {
                        statistic: r.statistic,
                        p_value,
                        reject: p_value <= level,
                        gamma_hat_is_gamma0: r.gamma_hat_is_gamma0,
                    })
                })
                .collect()
        })
        .collect())
}

/// Aggregates replicate outcomes into one row per bandwidth.
pub fn summarize<T: Scalar>(
    scenario: &Scenario<T>,
    bandwidths: &[T],
    outcomes: &[Result<Vec<ReplicateOutcome<T>>>],
) -> PowerTable {
    let ok: Vec<&Vec<ReplicateOutcome<T>>> =
        outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failed = outcomes.len() - ok.len();
    let reps = ok.len();
    let rows = bandwidths
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let rejections = ok.iter().filter(|o| o[k].reject).count();
            let at_gamma0 = ok.iter().filter(|o| o[k].gamma_hat_is_gamma0).count();
            let (rate, frac) = if reps == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (
                    rejections as f64 / reps as f64,
                    at_gamma0 as f64 / reps as f64,
                )
            };
            PowerRow {
                scenario: scenario.kind.name().to_string(),
                deviation: scenario.deviation.as_f64(),
                h: h.as_f64(),
                rejection_rate: rate,
                se: (rate * (1.0 - rate) / reps as f64).sqrt(),
                mc_reps: reps,
                gamma0_fraction: frac,
                failed,
            }
        })
        .collect();
    PowerTable { rows }
}

/// Rejection frequencies over `mc_reps` simulated samples at each bandwidth.
///
/// Every bandwidth sees the same samples and the same bootstrap multipliers.
/// Replicates that fail are counted in `failed` and left out of the rates.
pub fn power_study<T: Scalar>(
    scenario: &Scenario<T>,
    bandwidths: &[T],
    config: &TestConfig<T>,
    mc_reps: usize,
    plan: &BootstrapPlan,
) -> Result<PowerTable> {
    let outcomes = run_replicates(scenario, bandwidths, config, mc_reps, plan)?;
    if outcomes.iter().all(|o| o.is_err()) {
        // every replicate failed; surface the first reason
        return Err(outcomes.into_iter().find_map(|o| o.err()).unwrap());
    }
    Ok(summarize(scenario, bandwidths, &outcomes))
}
