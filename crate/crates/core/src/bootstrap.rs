//! Wild bootstrap calibration.
//!
//! Residuals are multiplied by `Z = V/√2 + (V² − 1)/2`, `V ~ N(0, 1)`, which
//! has mean 0 and variance 1. When a model was fitted, the multiplied
//! residuals are added back to the fitted values and the model is refitted,
//! so every bootstrap statistic is built the same way as the observed one.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direction::{select_directions, standardized_at};
use crate::error::{Error, Result};
use crate::pipeline::PreparedTest;
use crate::rng::{stream_rng, tag};
use crate::scalar::Scalar;

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// `V/√2 + (V² − 1)/2` with standard normal `V`.
    #[default]
    MammenGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub replicates: usize,
    pub seed: u64,
    pub multiplier: Multiplier,
    /// Reuse the observed `γ̂` instead of searching again.
    pub freeze_direction: bool,
    /// Use `Z_i Û_i` directly instead of refitting the model.
    pub freeze_model: bool,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        Self {
            replicates: 199,
            seed: 0,
            multiplier: Multiplier::MammenGaussian,
            freeze_direction: false,
            freeze_model: false,
        }
    }
}

impl BootstrapPlan {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument(
                "bootstrap needs at least one replicate".to_string(),
            ));
        }
        Ok(())
    }
}

/// One multiplier per observation.
pub fn draw_multipliers<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n)
        .map(|_| mammen_gaussian(T::standard_normal(rng)))
        .collect()
}

/// `V/√2 + (V² − 1)/2`.
#[inline]
pub fn mammen_gaussian<T: Scalar>(v: T) -> T {
    let half = T::lit(0.5);
    v * T::FRAC_1_SQRT_2() + (v * v - T::one()) * half
}

/// Observed statistic with its bootstrap distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CalibrationResult<T> {
    pub observed_stat: T,
    /// Statistics of the successful replicates, in replicate order.
    pub bootstrap_stats: Vec<T>,
    pub failed_replicates: usize,
    /// `(1 + #{b : T_b ≥ T_obs}) / (B + 1)`.
    pub p_value: f64,
}

impl<T: Scalar> CalibrationResult<T> {
    pub fn new(observed_stat: T, bootstrap_stats: Vec<T>, failed_replicates: usize) -> Self {
        let p_value = bootstrap_p_value(observed_stat, &bootstrap_stats);
        Self {
            observed_stat,
            bootstrap_stats,
            failed_replicates,
            p_value,
        }
    }

    /// Empirical `(1 − level)` quantile of the bootstrap statistics.
    pub fn critical_value(&self, level: f64) -> T {
        let mut sorted = self.bootstrap_stats.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let b = sorted.len();
        let rank = ((1.0 - level) * b as f64).ceil() as usize;
        sorted[rank.clamp(1, b) - 1]
    }
}

pub fn bootstrap_p_value<T: Scalar>(observed: T, stats: &[T]) -> f64 {
    let exceed = stats.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (stats.len() + 1) as f64
}

/// Bootstrap residual vectors for a prepared test; independent of the bandwidth.
#[derive(Debug, Clone)]
pub struct BootstrapDraws<T> {
    pub plan: BootstrapPlan,
    /// `residuals[b]` for replicate `b`; `None` when the refit failed.
    pub residuals: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> BootstrapDraws<T> {
    /// Draws the multipliers of every replicate, each from its own stream.
    pub fn generate(prep: &PreparedTest<T>, plan: &BootstrapPlan) -> Result<Self> {
        plan.validate()?;
        let u = prep.residuals();
        let n = u.len();
        let residuals = (0..plan.replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(plan.seed, &[tag::BOOTSTRAP, b as u64]);
                let z: Vec<T> = draw_multipliers(n, &mut rng);
                let star: Vec<T> = u.iter().zip(&z).map(|(&r, &zi)| r * zi).collect();
                match (prep.model(), plan.freeze_model) {
                    (Some(model), false) => {
                        let y: Vec<T> = model
                            .fitted
                            .iter()
                            .zip(&star)
                            .map(|(&f, &e)| f + e)
                            .collect();
                        model.refit(&y).ok().map(|m| m.residuals)
                    }
                    _ => Some(star),
                }
            })
            .collect();
        Ok(Self {
            plan: *plan,
            residuals,
        })
    }
}

fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }
    Ok(())
}

/// Bootstrap distribution of `T_n` at bandwidth `h`, given the observed statistic
/// and its selected direction.
pub fn calibrate<T: Scalar>(
    prep: &PreparedTest<T>,
    h: T,
    observed_stat: T,
    observed_gamma: &[T],
    draws: &BootstrapDraws<T>,
) -> Result<CalibrationResult<T>> {
    let params = prep.params(h);
    let cols: Vec<&[T]> = draws
        .residuals
        .iter()
        .filter_map(|r| r.as_deref())
        .collect();
    let mut failed = draws.residuals.len() - cols.len();
    let stats: Vec<Result<T>> = if draws.plan.freeze_direction {
        standardized_at(&cols, prep.scores(), observed_gamma, prep.gamma0(), &params)?
    } else {
        select_directions(
            &cols,
            prep.scores(),
            prep.direction_grid(),
            prep.gamma0(),
            &params,
            &prep.search_settings(),
        )?
        .into_iter()
        .map(|r| r.map(|s| s.statistic))
        .collect()
    };
    let mut ok = Vec::with_capacity(stats.len());
    for s in stats {
        match s {
            Ok(v) => ok.push(v),
            Err(Error::DegenerateVariance(_)) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    check_failures(failed, draws.residuals.len())?;
    Ok(CalibrationResult::new(observed_stat, ok, failed))
}

/// Observed statistic plus a full wild bootstrap at bandwidth `h`.
pub fn bootstrap_test<T: Scalar>(
    prep: &PreparedTest<T>,
    h: T,
    plan: &BootstrapPlan,
) -> Result<CalibrationResult<T>> {
    let observed = prep.observed(h, false)?;
    let draws = BootstrapDraws::generate(prep, plan)?;
    calibrate(prep, h, observed.statistic, &observed.gamma_hat, &draws)
}
