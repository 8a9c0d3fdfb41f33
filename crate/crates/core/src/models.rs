//! Functional principal components and the functional linear / quadratic
//! regression fits whose residuals are tested.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{same_grid, Basis, Curve, Grid, ScoreMatrix};
use crate::linalg::{symmetric_eigen, LeastSquares};
use crate::scalar::Scalar;

/// Spectral decomposition of the empirical covariance operator.
#[derive(Debug, Clone)]
pub struct FpcaDecomposition<T> {
    pub mean_curve: Curve<T>,
    /// Nonincreasing, clamped at zero.
    pub eigenvalues: Vec<T>,
    pub eigenfunctions: Basis<T>,
    /// Centered scores ⟨X_i − X̄, φ_j⟩ for every eigenfunction.
    pub scores: ScoreMatrix<T>,
    curves: Vec<Curve<T>>,
}

impl<T: Scalar> FpcaDecomposition<T> {
    /// The curves the decomposition was computed from.
    pub fn curves(&self) -> &[Curve<T>] {
        &self.curves
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.mean_curve.grid()
    }

    /// Number of eigenvalues above the numerical noise floor.
    pub fn rank(&self) -> usize {
        let floor = self.noise_floor();
        self.eigenvalues.iter().take_while(|&&v| v > floor).count()
    }

    fn noise_floor(&self) -> T {
        let top = self.eigenvalues.first().copied().unwrap_or(T::zero());
        // roundoff in the covariance scales with the raw second moment
        let n = T::from_usize(self.curves.len().max(1)).unwrap();
        let second: T = self.curves.iter().map(|c| c.l2_norm().powi(2)).sum::<T>() / n;
        (top * T::lit(1.0e4)).max(second * T::lit(1.0e2)) * T::epsilon()
    }

    /// Centered scores of new curves on the first `m` eigenfunctions.
    pub fn centered_scores(&self, sample: &[Curve<T>], m: usize) -> Result<Vec<Vec<T>>> {
        let grid = self.grid();
        let phis = &self.eigenfunctions.elements()[..m];
        sample
            .iter()
            .map(|x| {
                if !same_grid(grid, x.grid()) {
                    return Err(Error::GridMismatch);
                }
                let centered = center(x.values(), self.mean_curve.values());
                Ok(phis
                    .iter()
                    .map(|phi| grid.integrate_product(&centered, phi.values()))
                    .collect())
            })
            .collect()
    }
}

fn center<T: Scalar>(x: &[T], mean: &[T]) -> Vec<T> {
    x.iter().zip(mean).map(|(&a, &b)| a - b).collect()
}

fn common_grid<T: Scalar>(sample: &[Curve<T>]) -> Result<Arc<Grid<T>>> {
    let grid = sample
        .first()
        .ok_or(Error::TooFewObservations { needed: 1, got: 0 })?
        .grid()
        .clone();
    if sample.iter().any(|x| !same_grid(&grid, x.grid())) {
        return Err(Error::GridMismatch);
    }
    Ok(grid)
}

/// FPCA of a sample of curves.
///
/// The covariance is normalized by `1/n` and symmetrized with square-root
/// quadrature weights, so eigenpairs approximate those of the integral
/// operator. Each eigenfunction has unit L² norm and its largest-magnitude
/// value positive.
pub fn fpca<T: Scalar>(sample: &[Curve<T>]) -> Result<FpcaDecomposition<T>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let grid = common_grid(sample)?;
    let g = grid.len();
    let nf = T::from_usize(n).unwrap();

    let mut mean = vec![T::zero(); g];
    for x in sample {
        for (m, &v) in mean.iter_mut().zip(x.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let centered: Vec<Vec<T>> = sample.iter().map(|x| center(x.values(), &mean)).collect();

    let sqrt_w: Vec<T> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let mut cov = vec![T::zero(); g * g];
    for xc in &centered {
        let scaled: Vec<T> = xc.iter().zip(&sqrt_w).map(|(&a, &s)| a * s).collect();
        for r in 0..g {
            let a = scaled[r];
            let row = &mut cov[r * g..(r + 1) * g];
            for (c, &b) in row.iter_mut().zip(&scaled).take(r + 1) {
                *c += a * b;
            }
        }
    }
    for r in 0..g {
        for c in 0..=r {
            let v = cov[r * g + c] / nf;
            cov[r * g + c] = v;
            cov[c * g + r] = v;
        }
    }

    let eig = symmetric_eigen(&cov, g)?;
    let eigenvalues: Vec<T> = eig.values.iter().map(|&v| v.max(T::zero())).collect();
    let mean_curve = Curve::new(grid.clone(), mean)?;
    let elements = eig
        .vectors
        .into_iter()
        .map(|v| {
            let mut phi: Vec<T> = v.iter().zip(&sqrt_w).map(|(&a, &s)| a / s).collect();
            let lead =
                phi.iter().copied().fold(
                    T::zero(),
                    |best, x| if x.abs() > best.abs() { x } else { best },
                );
            if lead < T::zero() {
                phi.iter_mut().for_each(|x| *x = -*x);
            }
            Curve::new(grid.clone(), phi)
        })
        .collect::<Result<Vec<_>>>()?;
    let eigenfunctions = Basis::unchecked(elements)?;
    let mut data = Vec::with_capacity(n * g);
    for xc in &centered {
        for phi in eigenfunctions.elements() {
            data.push(grid.integrate_product(xc, phi.values()));
        }
    }
    let scores = ScoreMatrix::from_vec(n, g, data)?;
    Ok(FpcaDecomposition {
        mean_curve,
        eigenvalues,
        eigenfunctions,
        scores,
        curves: sample.to_vec(),
    })
}

/// Null model family whose goodness of fit is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Residuals are observed directly; no model is fitted.
    None,
    #[default]
    Linear,
    Quadratic,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ModelKind::None),
            "linear" => Ok(ModelKind::Linear),
            "quadratic" => Ok(ModelKind::Quadratic),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

/// A fitted functional regression model.
#[derive(Debug, Clone)]
pub struct FittedModel<T> {
    pub kind: ModelKind,
    /// `â`. For the quadratic model this is the constant of the score regression.
    pub intercept: T,
    /// `b̂_j` in the eigenfunction basis.
    pub slope_coeffs: Vec<T>,
    /// Symmetric `m×m` coefficients of score products (quadratic model only).
    pub quadratic_coeffs: Option<Vec<Vec<T>>>,
    pub truncation: usize,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    pub decomposition: Arc<FpcaDecomposition<T>>,
    design: Option<Arc<LeastSquares<T>>>,
}

impl<T: Scalar> FittedModel<T> {
    /// `b̂(t) = Σ_j b̂_j φ̂_j(t)`.
    pub fn slope_curve(&self) -> Curve<T> {
        let basis = self
            .decomposition
            .eigenfunctions
            .truncated(self.truncation)
            .expect("truncation validated at fit time");
        basis
            .reconstruct(&self.slope_coeffs)
            .expect("coefficient count matches truncation")
    }

    /// Predictions `E[Y | X]` under the fitted model.
    pub fn predict(&self, sample: &[Curve<T>]) -> Result<Vec<T>> {
        match self.kind {
            ModelKind::Linear => {
                let slope = self.slope_curve();
                let grid = slope.grid();
                sample
                    .iter()
                    .map(|x| {
                        if !same_grid(grid, x.grid()) {
                            return Err(Error::GridMismatch);
                        }
                        Ok(self.intercept + grid.integrate_product(slope.values(), x.values()))
                    })
                    .collect()
            }
            ModelKind::Quadratic => {
                let scores = self
                    .decomposition
                    .centered_scores(sample, self.truncation)?;
                Ok(scores.iter().map(|xi| self.quadratic_value(xi)).collect())
            }
            ModelKind::None => Err(Error::InvalidArgument(
                "no model has been fitted".to_string(),
            )),
        }
    }

    fn quadratic_value(&self, xi: &[T]) -> T {
        let h = self.quadratic_coeffs.as_ref().expect("quadratic model");
        let mut v = self.intercept;
        for (j, (&b, &x)) in self.slope_coeffs.iter().zip(xi).enumerate() {
            v += b * x;
            for k in j..xi.len() {
                let c = if j == k { h[j][k] } else { h[j][k] + h[k][j] };
                v += c * x * xi[k];
            }
        }
        v
    }

    /// Refits the same model family to a new response on the same curves,
    /// reusing the FPCA and least-squares factorization.
    pub fn refit(&self, y: &[T]) -> Result<FittedModel<T>> {
        let n = self.decomposition.scores.n();
        if y.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: y.len(),
            });
        }
        match self.kind {
            ModelKind::Linear => fit_linear_on(self.decomposition.clone(), y, self.truncation),
            ModelKind::Quadratic => {
                let design = self.design.clone().expect("quadratic design");
                fit_quadratic_on(self.decomposition.clone(), design, y, self.truncation)
            }
            ModelKind::None => Err(Error::InvalidArgument(
                "no model has been fitted".to_string(),
            )),
        }
    }

    pub fn report(&self) -> ModelReport<T> {
        let n = self.residuals.len();
        let nf = T::from_usize(n).unwrap();
        let mean = self.residuals.iter().copied().sum::<T>() / nf;
        let rss = self.residuals.iter().map(|&r| r * r).sum::<T>();
        let var = self
            .residuals
            .iter()
            .map(|&r| (r - mean) * (r - mean))
            .sum::<T>()
            / T::from_usize(n.saturating_sub(1).max(1)).unwrap();
        let min = self.residuals.iter().copied().fold(T::infinity(), T::min);
        let max = self
            .residuals
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let shown = self
            .decomposition
            .eigenvalues
            .len()
            .min(self.truncation.max(10));
        ModelReport {
            kind: self.kind,
            intercept: self.intercept,
            slope_coeffs: self.slope_coeffs.clone(),
            quadratic_coeffs: self.quadratic_coeffs.clone(),
            truncation: self.truncation,
            eigenvalues: self.decomposition.eigenvalues[..shown].to_vec(),
            residuals: ResidualSummary {
                n,
                mean,
                sd: var.sqrt(),
                min,
                max,
                rss,
            },
        }
    }
}

/// Serializable summary of a [`FittedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelReport<T> {
    pub kind: ModelKind,
    pub intercept: T,
    pub slope_coeffs: Vec<T>,
    pub quadratic_coeffs: Option<Vec<Vec<T>>>,
    pub truncation: usize,
    pub eigenvalues: Vec<T>,
    pub residuals: ResidualSummary<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ResidualSummary<T> {
    pub n: usize,
    pub mean: T,
    pub sd: T,
    pub min: T,
    pub max: T,
    pub rss: T,
}

fn check_truncation<T: Scalar>(dec: &FpcaDecomposition<T>, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "truncation m must be positive".to_string(),
        ));
    }
    if m > dec.eigenvalues.len() {
        return Err(Error::NonPositiveEigenvalue {
            index: m,
            value: 0.0,
        });
    }
    let theta = dec.eigenvalues[m - 1];
    if !(theta > dec.noise_floor()) {
        return Err(Error::NonPositiveEigenvalue {
            index: m,
            value: theta.as_f64(),
        });
    }
    Ok(())
}

fn check_response<T: Scalar>(sample: &[Curve<T>], y: &[T]) -> Result<()> {
    if y.len() != sample.len() {
        return Err(Error::LengthMismatch {
            expected: sample.len(),
            got: y.len(),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "response {i} is not finite"
        )));
    }
    Ok(())
}

/// FPCA slope estimator `b̂_j = ĝ_j / θ̂_j`, `â = Ȳ − ∫ b̂ X̄`.
pub fn fit_flm<T: Scalar>(sample: &[Curve<T>], y: &[T], m: usize) -> Result<FittedModel<T>> {
    check_response(sample, y)?;
    let dec = Arc::new(fpca(sample)?);
    fit_linear_on(dec, y, m)
}

/// FLM fit reusing an existing decomposition of the same curves.
pub fn fit_flm_with<T: Scalar>(
    decomposition: Arc<FpcaDecomposition<T>>,
    y: &[T],
    m: usize,
) -> Result<FittedModel<T>> {
    if y.len() != decomposition.scores.n() {
        return Err(Error::LengthMismatch {
            expected: decomposition.scores.n(),
            got: y.len(),
        });
    }
    fit_linear_on(decomposition, y, m)
}

fn fit_linear_on<T: Scalar>(
    dec: Arc<FpcaDecomposition<T>>,
    y: &[T],
    m: usize,
) -> Result<FittedModel<T>> {
    check_truncation(&dec, m)?;
    let n = y.len();
    let nf = T::from_usize(n).unwrap();
    let y_bar = y.iter().copied().sum::<T>() / nf;
    let slope_coeffs: Vec<T> = (0..m)
        .map(|j| {
            let g_j = y.iter().enumerate().fold(T::zero(), |acc, (i, &yi)| {
                acc + (yi - y_bar) * dec.scores.get(i, j)
            }) / nf;
            g_j / dec.eigenvalues[j]
        })
        .collect();
    let slope = dec
        .eigenfunctions
        .truncated(m)?
        .reconstruct(&slope_coeffs)?;
    let grid = dec.grid().clone();
    let intercept = y_bar - grid.integrate_product(slope.values(), dec.mean_curve.values());
    let mut model = FittedModel {
        kind: ModelKind::Linear,
        intercept,
        slope_coeffs,
        quadratic_coeffs: None,
        truncation: m,
        fitted: Vec::new(),
        residuals: Vec::new(),
        decomposition: dec,
        design: None,
    };
    let curves = model.decomposition.curves.clone();
    model.fitted = model.predict(&curves)?;
    model.residuals = y.iter().zip(&model.fitted).map(|(&a, &b)| a - b).collect();
    Ok(model)
}

fn quadratic_columns<T: Scalar>(scores: &ScoreMatrix<T>, m: usize) -> Vec<Vec<T>> {
    let n = scores.n();
    let mut cols = vec![vec![T::one(); n]];
    for j in 0..m {
        cols.push((0..n).map(|i| scores.get(i, j)).collect());
    }
    for j in 0..m {
        for k in j..m {
            cols.push(
                (0..n)
                    .map(|i| scores.get(i, j) * scores.get(i, k))
                    .collect(),
            );
        }
    }
    cols
}

/// Least squares of `Y` on an intercept, the first `m` centered FPCA scores
/// and all their pairwise products `ξ_j ξ_k` (`j ≤ k`).
pub fn fit_fqm<T: Scalar>(sample: &[Curve<T>], y: &[T], m: usize) -> Result<FittedModel<T>> {
    check_response(sample, y)?;
    let dec = Arc::new(fpca(sample)?);
    fit_fqm_with(dec, y, m)
}

/// FQM fit reusing an existing decomposition of the same curves.
pub fn fit_fqm_with<T: Scalar>(
    dec: Arc<FpcaDecomposition<T>>,
    y: &[T],
    m: usize,
) -> Result<FittedModel<T>> {
    let n = dec.scores.n();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    check_truncation(&dec, m)?;
    let k = 1 + m + m * (m + 1) / 2;
    if n <= k {
        return Err(Error::TooFewObservations {
            needed: k + 1,
            got: n,
        });
    }
    let design = Arc::new(LeastSquares::new(&quadratic_columns(&dec.scores, m))?);
    fit_quadratic_on(dec, design, y, m)
}

fn fit_quadratic_on<T: Scalar>(
    dec: Arc<FpcaDecomposition<T>>,
    design: Arc<LeastSquares<T>>,
    y: &[T],
    m: usize,
) -> Result<FittedModel<T>> {
    let beta = design.solve(y)?;
    let intercept = beta[0];
    let slope_coeffs = beta[1..=m].to_vec();
    let mut h = vec![vec![T::zero(); m]; m];
    let mut idx = 1 + m;
    let half = T::lit(0.5);
    for j in 0..m {
        for k in j..m {
            if j == k {
                h[j][j] = beta[idx];
            } else {
                h[j][k] = beta[idx] * half;
                h[k][j] = beta[idx] * half;
            }
            idx += 1;
        }
    }
    let mut model = FittedModel {
        kind: ModelKind::Quadratic,
        intercept,
        slope_coeffs,
        quadratic_coeffs: Some(h),
        truncation: m,
        fitted: Vec::new(),
        residuals: Vec::new(),
        decomposition: dec,
        design: Some(design),
    };
    let n = y.len();
    model.fitted = (0..n)
        .map(|i| model.quadratic_value(&model.decomposition.scores.row(i)[..m]))
        .collect();
    model.residuals = y.iter().zip(&model.fitted).map(|(&a, &b)| a - b).collect();
    Ok(model)
}

/// `Y_i − Ŷ_i` for the fitted model on (possibly new) curves.
pub fn residuals<T: Scalar>(
    model: &FittedModel<T>,
    sample: &[Curve<T>],
    y: &[T],
) -> Result<Vec<T>> {
    check_response(sample, y)?;
    let pred = model.predict(sample)?;
    Ok(y.iter().zip(&pred).map(|(&a, &b)| a - b).collect())
}
