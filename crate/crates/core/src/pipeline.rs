//! End-to-end goodness-of-fit test: fit, project, search, standardize, calibrate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bootstrap::{calibrate, BootstrapDraws, BootstrapPlan, CalibrationResult};
use crate::direction::{
    default_grid_size, default_refinement_fanout, select_direction, sphere_grid,
    uninformative_gamma0, DirectionGrid, DirectionValue, SearchSettings, DEFAULT_ALPHA_N,
};
use crate::error::{Error, Result};
use crate::funcspace::{kl_sine_basis, project, same_grid, Basis, Curve, ScoreMatrix};
use crate::models::{fit_flm_with, fit_fqm_with, fpca, FittedModel, ModelKind};
use crate::rng::{derive_seed, tag};
use crate::scalar::Scalar;
use crate::teststat::{default_variance_bandwidth, Kernel, StatParams, VarianceChoice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `√2 sin((j − ½)πt)`.
    #[default]
    KlSine,
    /// Leading empirical eigenfunctions of the curves.
    Fpca,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl_sine" | "kl-sine" | "sine" => Ok(BasisKind::KlSine),
            "fpca" => Ok(BasisKind::Fpca),
            other => Err(Error::InvalidArgument(format!("unknown basis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    #[default]
    Bootstrap,
    /// Standard normal upper-tail p-values only.
    Normal,
}

impl std::str::FromStr for Calibration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bootstrap" => Ok(Calibration::Bootstrap),
            "normal" | "asymptotic" => Ok(Calibration::Normal),
            other => Err(Error::InvalidArgument(format!(
                "unknown calibration '{other}'"
            ))),
        }
    }
}

/// Every tuning parameter of a test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct TestConfig<T> {
    pub model: ModelKind,
    /// Projection dimension.
    pub p: usize,
    pub basis: BasisKind,
    /// Number of FPCA components in the fitted model.
    pub m: usize,
    /// Bandwidths `h` in projection units; one result per value.
    pub bandwidths: Vec<T>,
    pub kernel: Kernel,
    pub alpha_n: T,
    pub variance: VarianceChoice,
    /// Conditional-variance bandwidth; `0.5 n^{-1/6}` when unset.
    pub h_v: Option<T>,
    /// Sphere grid size; 300 for p = 3, 1280 for p = 5 when unset.
    pub grid_size: Option<usize>,
    /// Local refinement size; `3^(p-1)` when unset.
    pub refinement_fanout: Option<usize>,
    /// Local refinement radius in radians; nearest-neighbor distance when unset.
    pub refinement_radius: Option<T>,
    pub calibration: Calibration,
    /// Bootstrap replicates.
    pub replicates: usize,
    pub level: T,
    pub seed: u64,
    pub freeze_direction: bool,
    pub freeze_model: bool,
}

impl<T: Scalar> Default for TestConfig<T> {
    fn default() -> Self {
        Self {
            model: ModelKind::Linear,
            p: 3,
            basis: BasisKind::KlSine,
            m: 3,
            bandwidths: vec![T::lit(0.30)],
            kernel: Kernel::Epanechnikov,
            alpha_n: T::lit(DEFAULT_ALPHA_N),
            variance: VarianceChoice::Cond,
            h_v: None,
            grid_size: None,
            refinement_fanout: None,
            refinement_radius: None,
            calibration: Calibration::Bootstrap,
            replicates: 199,
            level: T::lit(0.05),
            seed: 0,
            freeze_direction: false,
            freeze_model: false,
        }
    }
}

impl<T: Scalar> TestConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.model != ModelKind::None && self.m == 0 {
            return bad("m must be positive".into());
        }
        if self.bandwidths.is_empty() {
            return bad("at least one bandwidth is required".into());
        }
        if let Some(h) = self
            .bandwidths
            .iter()
            .find(|h| !(**h > T::zero()) || !h.is_finite())
        {
            return bad(format!("bandwidth must be positive, got {h}"));
        }
        if !(self.alpha_n >= T::zero()) {
            return bad(format!("alpha_n must be nonnegative, got {}", self.alpha_n));
        }
        if let Some(hv) = self.h_v {
            if !(hv > T::zero()) {
                return bad(format!("h_v must be positive, got {hv}"));
            }
        }
        if self.grid_size == Some(0) {
            return bad("grid_size must be positive".into());
        }
        if self.refinement_fanout == Some(0) {
            return bad("refinement_fanout must be positive".into());
        }
        if let Some(r) = self.refinement_radius {
            if !(r > T::zero()) {
                return bad(format!("refinement_radius must be positive, got {r}"));
            }
        }
        if self.calibration == Calibration::Bootstrap && self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if !(self.level > T::zero() && self.level < T::one()) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        Ok(())
    }

    pub fn bootstrap_plan(&self) -> BootstrapPlan {
        BootstrapPlan {
            replicates: self.replicates,
            seed: derive_seed(self.seed, &[tag::BOOTSTRAP]),
            freeze_direction: self.freeze_direction,
            freeze_model: self.freeze_model,
            ..BootstrapPlan::default()
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

/// Residuals at rounding level of the response carry no signal; the
/// standardized statistic would only measure floating-point noise.
fn check_residual_scale<T: Scalar>(residuals: &[T], y: &[T]) -> Result<()> {
    let n = T::from_usize(y.len()).unwrap();
    let mean = y.iter().copied().sum::<T>() / n;
    let spread: T = y.iter().map(|&v| (v - mean) * (v - mean) + v * v).sum();
    let rss: T = residuals.iter().map(|&r| r * r).sum();
    let floor = spread * (T::epsilon() * T::lit(1.0e3)).powi(2);
    if rss <= floor {
        return Err(Error::DegenerateVariance(rss.as_f64() / y.len() as f64));
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Data-dependent state shared by every bandwidth and bootstrap replicate.
#[derive(Debug, Clone)]
pub struct PreparedTest<T> {
    config: TestConfig<T>,
    model: Option<FittedModel<T>>,
    residuals: Vec<T>,
    scores: ScoreMatrix<T>,
    gamma0: Vec<T>,
    grid: DirectionGrid<T>,
    h_v: T,
}

impl<T: Scalar> PreparedTest<T> {
    /// Fits the null model (unless `model = none`, in which case `response`
    /// holds the observed errors), projects the curves and builds the sphere grid.
    pub fn new(config: &TestConfig<T>, curves: &[Curve<T>], response: &[T]) -> Result<Self> {
        config.validate()?;
        let n = curves.len();
        let needed = match config.model {
            ModelKind::None => 10.max(config.p),
            _ => 10.max(config.m + config.p),
        };
        if n < needed {
            return Err(Error::TooFewObservations { needed, got: n });
        }
        if response.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: response.len(),
            });
        }
        let grid0 = curves[0].grid().clone();
        if curves.iter().any(|c| !same_grid(&grid0, c.grid())) {
            return Err(Error::GridMismatch);
        }
        let needs_fpca = config.model != ModelKind::None || config.basis == BasisKind::Fpca;
        let decomposition = if needs_fpca {
            Some(Arc::new(fpca(curves)?))
        } else {
            None
        };
        let model = match config.model {
            ModelKind::None => None,
            ModelKind::Linear => Some(fit_flm_with(
                decomposition.clone().unwrap(),
                response,
                config.m,
            )?),
            ModelKind::Quadratic => Some(fit_fqm_with(
                decomposition.clone().unwrap(),
                response,
                config.m,
            )?),
        };
        let residuals = match &model {
            Some(m) => {
                check_residual_scale(&m.residuals, response)?;
                m.residuals.clone()
            }
            None => response.to_vec(),
        };
        let basis: Basis<T> = match config.basis {
            BasisKind::KlSine => kl_sine_basis(grid0, config.p)?,
            BasisKind::Fpca => {
                let dec = decomposition.as_ref().unwrap();
                if dec.rank() < config.p {
                    return Err(Error::NonPositiveEigenvalue {
                        index: config.p,
                        value: dec
                            .eigenvalues
                            .get(config.p - 1)
                            .map_or(0.0, |v| v.as_f64()),
                    });
                }
                dec.eigenfunctions.truncated(config.p)?
            }
        };
        let scores = project(curves, &basis)?;
        Self::from_parts(config, model, residuals, scores)
    }

    /// Prepared state from precomputed residuals and projection scores.
    pub fn from_parts(
        config: &TestConfig<T>,
        model: Option<FittedModel<T>>,
        residuals: Vec<T>,
        scores: ScoreMatrix<T>,
    ) -> Result<Self> {
        config.validate()?;
        if residuals.len() != scores.n() {
            return Err(Error::LengthMismatch {
                expected: scores.n(),
                got: residuals.len(),
            });
        }
        let p = scores.p();
        let gamma0 = uninformative_gamma0(p)?;
        let size = config.grid_size.unwrap_or_else(|| default_grid_size(p));
        let fanout = config
            .refinement_fanout
            .unwrap_or_else(|| default_refinement_fanout(p));
        let grid = sphere_grid(
            p,
            size,
            derive_seed(config.seed, &[tag::GRID]),
            Some(&gamma0),
        )?
        .with_refinement_fanout(fanout);
        let h_v = config
            .h_v
            .unwrap_or_else(|| default_variance_bandwidth(scores.n()));
        Ok(Self {
            config: config.clone(),
            model,
            residuals,
            scores,
            gamma0,
            grid,
            h_v,
        })
    }

    pub fn config(&self) -> &TestConfig<T> {
        &self.config
    }

    pub fn model(&self) -> Option<&FittedModel<T>> {
        self.model.as_ref()
    }

    pub fn residuals(&self) -> &[T] {
        &self.residuals
    }

    pub fn scores(&self) -> &ScoreMatrix<T> {
        &self.scores
    }

    pub fn gamma0(&self) -> &[T] {
        &self.gamma0
    }

    pub fn direction_grid(&self) -> &DirectionGrid<T> {
        &self.grid
    }

    pub fn h_v(&self) -> T {
        self.h_v
    }

    pub fn params(&self, h: T) -> StatParams<T> {
        StatParams {
            h,
            kernel: self.config.kernel,
            variance: self.config.variance,
            h_v: self.h_v,
        }
    }

    pub fn search_settings(&self) -> SearchSettings<T> {
        SearchSettings {
            alpha_n: self.config.alpha_n,
            fanout: Some(self.grid.refinement_fanout()),
            radius: self.config.refinement_radius,
        }
    }

    /// Penalized direction search on the observed residuals.
    pub fn observed(&self, h: T, record: bool) -> Result<crate::direction::SelectionResult<T>> {
        select_direction(
            &self.residuals,
            &self.scores,
            &self.grid,
            &self.gamma0,
            &self.params(h),
            &self.search_settings(),
            record,
        )
    }

    /// Runs the test at every configured bandwidth.
    pub fn run(&self, record: bool) -> Result<TestResult<T>> {
        let draws = match self.config.calibration {
            Calibration::Bootstrap => Some(BootstrapDraws::generate(
                self,
                &self.config.bootstrap_plan(),
            )?),
            Calibration::Normal => None,
        };
        let per_bandwidth = self
            .config
            .bandwidths
            .iter()
            .map(|&h| self.evaluate(h, draws.as_ref(), record))
            .collect::<Result<Vec<_>>>()?;
        Ok(TestResult {
            n: self.scores.n(),
            p: self.scores.p(),
            m: self.model.as_ref().map(|m| m.truncation),
            model: self.config.model,
            h_v: self.h_v,
            grid_points: self.grid.len(),
            per_bandwidth,
            provenance: Provenance {
                config_hash: self.config.hash(),
                data_hash: self.data_hash(),
                seed: self.config.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            config: self.config.clone(),
        })
    }

    /// Result at one bandwidth, bootstrapping with `draws` when given.
    pub fn evaluate(
        &self,
        h: T,
        draws: Option<&BootstrapDraws<T>>,
        record: bool,
    ) -> Result<BandwidthResult<T>> {
        let sel = self.observed(h, record)?;
        let p_value_normal = normal_upper_tail(sel.statistic);
        let calibration = match draws {
            Some(d) => Some(calibrate(self, h, sel.statistic, &sel.gamma_hat, d)?),
            None => None,
        };
        let p_value_bootstrap = calibration.as_ref().map(|c| c.p_value);
        let primary = p_value_bootstrap.unwrap_or(p_value_normal);
        Ok(BandwidthResult {
            h,
            statistic: sel.statistic,
            gamma_hat: sel.gamma_hat,
            gamma_hat_is_gamma0: !sel.penalized,
            q_n: sel.q_n,
            variance: sel.variance,
            variance_direction: match self.config.variance {
                VarianceChoice::Cond => "gamma0".to_string(),
                VarianceChoice::Min => "min(gamma_hat, gamma0)".to_string(),
            },
            statistic_at_gamma0: sel.statistic_at_gamma0,
            p_value_normal,
            p_value_bootstrap,
            p_value_percent: 100.0 * primary,
            reject: primary <= self.config.level.as_f64(),
            calibration,
            per_direction_values: sel.per_direction_values,
        })
    }

    fn data_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for r in self.scores.rows() {
            for v in r {
                hasher.update(v.as_f64().to_le_bytes());
            }
        }
        for v in &self.residuals {
            hasher.update(v.as_f64().to_le_bytes());
        }
        hex(&hasher.finalize())
    }
}

/// `1 − Φ(t)`.
pub fn normal_upper_tail<T: Scalar>(t: T) -> f64 {
    Normal::standard().sf(t.as_f64())
}

/// Standard normal `1 − level` quantile.
pub fn normal_critical_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - level)
}

/// Output at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BandwidthResult<T> {
    pub h: T,
    /// `T_n`.
    pub statistic: T,
    pub gamma_hat: Vec<T>,
    pub gamma_hat_is_gamma0: bool,
    pub q_n: T,
    pub variance: T,
    /// Direction(s) at which the variance estimate was evaluated.
    pub variance_direction: String,
    pub statistic_at_gamma0: T,
    pub p_value_normal: f64,
    pub p_value_bootstrap: Option<f64>,
    /// Primary p-value (bootstrap when run, else normal) in percent.
    pub p_value_percent: f64,
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationResult<T>>,
    #[serde(skip)]
    pub per_direction_values: Option<Vec<DirectionValue<T>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub data_hash: String,
    pub seed: u64,
    pub version: String,
}

/// Full output of a test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TestResult<T> {
    pub n: usize,
    pub p: usize,
    pub m: Option<usize>,
    pub model: ModelKind,
    pub h_v: T,
    pub grid_points: usize,
    pub per_bandwidth: Vec<BandwidthResult<T>>,
    pub provenance: Provenance,
    pub config: TestConfig<T>,
}

/// Convenience wrapper: prepare and run in one call.
pub fn run_test<T: Scalar>(
    config: &TestConfig<T>,
    curves: &[Curve<T>],
    response: &[T],
) -> Result<TestResult<T>> {
    PreparedTest::new(config, curves, response)?.run(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = TestConfig::<f64>::default();
        assert!(c.validate().is_ok());
        c.level = 1.0;
        assert!(c.validate().is_err());
        c.level = 0.05;
        c.bandwidths = vec![0.3, -1.0];
        assert!(c.validate().is_err());
        c.bandwidths = vec![];
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_hash_changes_with_content() {
        let a = TestConfig::<f64>::default();
        let mut b = a.clone();
        b.seed = 9;
        assert_eq!(a.hash(), TestConfig::<f64>::default().hash());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn normal_tail() {
        assert!((normal_upper_tail(0.0f64) - 0.5).abs() < 1e-15);
        assert!((normal_critical_value(0.05) - 1.6448536269514722).abs() < 1e-9);
    }
}
