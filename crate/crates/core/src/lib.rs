//! Projection-based goodness-of-fit tests for regression models with a
//! functional covariate.
//!
//! Curves are projected on a `p`-dimensional basis, residuals of the fitted
//! model are smoothed along a selected direction of the projection and the
//! resulting kernel U-statistic is standardized and calibrated either by the
//! normal approximation or by a wild bootstrap.
//!
//! ```
//! use fgof::{Grid64, TestConfig64, simulate::{generate_scenario, Scenario, ScenarioKind}};
//! use fgof::rng::stream_rng;
//!
//! let scenario = Scenario { grid_size: 41, ..Scenario::new(ScenarioKind::LinearNull, 60, 0.0) };
//! let (x, y) = generate_scenario(&scenario, &mut stream_rng(1, &[0])).unwrap();
//! let config = TestConfig64 { replicates: 49, grid_size: Some(40), ..Default::default() };
//! let result = fgof::run_test(&config, &x, &y).unwrap();
//! let row = &result.per_bandwidth[0];
//! assert!(row.p_value_bootstrap.unwrap() > 0.0);
//! # let _ = Grid64::uniform(3);
//! ```

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the matrix algorithms they implement
#![allow(clippy::needless_range_loop)]

pub mod bootstrap;
pub mod direction;
pub mod error;
pub mod funcspace;
pub mod io;
mod linalg;
pub mod models;
pub mod pipeline;
pub mod rng;
mod scalar;
pub mod simulate;
pub mod teststat;

pub use bootstrap::{bootstrap_test, BootstrapPlan, CalibrationResult};
pub use direction::{
    select_direction, sphere_grid, DirectionGrid, SearchSettings, SelectionResult,
};
pub use error::{Error, ErrorKind, Result};
pub use funcspace::{inner_product, kl_sine_basis, project, Basis, Curve, Grid, ScoreMatrix};
pub use models::{fit_flm, fit_fqm, fpca, residuals, FittedModel, FpcaDecomposition, ModelKind};
pub use pipeline::{run_test, BasisKind, Calibration, PreparedTest, TestConfig, TestResult};
pub use scalar::Scalar;
pub use teststat::{
    q_n, standardized_stat, tau_hat_sq, v_hat_sq_cond, v_hat_sq_min, Kernel, StatParams,
    VarianceChoice,
};

pub type Grid64 = Grid<f64>;
pub type Curve64 = Curve<f64>;
pub type Basis64 = Basis<f64>;
pub type ScoreMatrix64 = ScoreMatrix<f64>;
pub type TestConfig64 = TestConfig<f64>;
pub type TestResult64 = TestResult<f64>;
pub type FittedModel64 = FittedModel<f64>;

pub type Grid32 = Grid<f32>;
pub type Curve32 = Curve<f32>;
pub type Basis32 = Basis<f32>;
pub type ScoreMatrix32 = ScoreMatrix<f32>;
pub type TestConfig32 = TestConfig<f32>;
