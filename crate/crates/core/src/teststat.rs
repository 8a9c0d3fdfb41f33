//! The projected kernel U-statistic and its variance estimators.
//!
//! For residuals `u`, projection scores `x_i` and a unit direction `γ`,
//!
//! ```text
//! Q_n(γ)  = 1/(n(n-1)h) Σ_{i≠j} u_i u_j K((⟨x_i - x_j, γ⟩)/h)
//! τ̂²(γ)   = 2/(n(n-1)h) Σ_{i≠j} u_i² u_j² K²((⟨x_i - x_j, γ⟩)/h)
//! ```
//!
//! and the standardized statistic is `n h^{1/2} Q_n(γ) / v̂(γ)`. The kernel is
//! used unnormalized; any constant factor cancels in the standardized form.
//!
//! All pair sums go through one routine that accumulates over `i < j` in
//! index order, so results do not depend on how callers parallelize.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::ScoreMatrix;
use crate::scalar::{is_unit, norm, Scalar};

/// Smoothing kernel for projected differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `1 - x²` on `[-1, 1]`.
    #[default]
    Epanechnikov,
    /// `exp(-x²/2)`.
    Gaussian,
}

impl Kernel {
    #[inline]
    pub fn evaluate<T: Scalar>(self, x: T) -> T {
        match self {
            Kernel::Epanechnikov => {
                if x.abs() < T::one() {
                    T::one() - x * x
                } else {
                    T::zero()
                }
            }
            Kernel::Gaussian => (-(x * x) / T::lit(2.0)).exp(),
        }
    }

    /// Half-width of the support, `None` when unbounded.
    pub fn support(self) -> Option<f64> {
        match self {
            Kernel::Epanechnikov => Some(1.0),
            Kernel::Gaussian => None,
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Which estimate of the variance of `n h^{1/2} Q_n` standardizes the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceChoice {
    /// `min(τ̂²(γ), τ̂²(γ₀))`.
    Min,
    /// Conditional-variance plug-in evaluated at `γ₀`.
    #[default]
    Cond,
}

impl std::str::FromStr for VarianceChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(VarianceChoice::Min),
            "cond" => Ok(VarianceChoice::Cond),
            other => Err(Error::InvalidArgument(format!(
                "unknown variance estimator '{other}'"
            ))),
        }
    }
}

/// Smoothing settings shared by every evaluation of the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StatParams<T> {
    /// Bandwidth for projected differences.
    pub h: T,
    pub kernel: Kernel,
    pub variance: VarianceChoice,
    /// Bandwidth of the uniform-kernel conditional variance smoother.
    pub h_v: T,
}

impl<T: Scalar> StatParams<T> {
    /// Epanechnikov kernel, conditional variance, `h_v = 0.5 n^{-1/6}`.
    pub fn new(h: T, n: usize) -> Self {
        Self {
            h,
            kernel: Kernel::Epanechnikov,
            variance: VarianceChoice::Cond,
            h_v: default_variance_bandwidth(n),
        }
    }

    pub fn with_bandwidth(mut self, h: T) -> Self {
        self.h = h;
        self
    }
}

/// `0.5 n^{-1/6}`.
pub fn default_variance_bandwidth<T: Scalar>(n: usize) -> T {
    T::lit(0.5) * T::from_usize(n).unwrap().powf(T::lit(-1.0 / 6.0))
}

/// `out[b] += Σ_{i<j} w_ij vals[i][b] vals[j][b]` for a row-major `n×width`
/// matrix `vals`, with `w_ij = K((p_i - p_j)/h)` (squared when `squared`).
pub(crate) fn pair_sums<T: Scalar>(
    proj: &[T],
    h: T,
    kernel: Kernel,
    squared: bool,
    vals: &[T],
    width: usize,
    out: &mut [T],
) {
    let n = proj.len();
    debug_assert_eq!(vals.len(), n * width);
    debug_assert_eq!(out.len(), width);
    let inv_h = T::one() / h;
    let bounded = kernel.support().is_some();
    let mut partial = vec![T::zero(); width];
    for i in 0..n {
        let pi = proj[i];
        partial.iter_mut().for_each(|s| *s = T::zero());
        let mut touched = false;
        for j in (i + 1)..n {
            let x = (pi - proj[j]) * inv_h;
            if bounded && x.abs() >= T::one() {
                continue;
            }
            let mut w = kernel.evaluate(x);
            if squared {
                w = w * w;
            }
            touched = true;
            let row = &vals[j * width..(j + 1) * width];
            for (s, &v) in partial.iter_mut().zip(row) {
                *s += w * v;
            }
        }
        if touched {
            let row = &vals[i * width..(i + 1) * width];
            for ((o, &s), &v) in out.iter_mut().zip(&partial).zip(row) {
                *o += v * s;
            }
        }
    }
}

/// Normalizing constant `1/(n(n-1)h)` shared by all pair-sum statistics.
pub(crate) fn pair_scale<T: Scalar>(n: usize, h: T) -> T {
    let nf = T::from_usize(n).unwrap();
    T::one() / (nf * (nf - T::one()) * h)
}

pub(crate) fn check_inputs<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    gamma: &[T],
    h: T,
) -> Result<()> {
    let n = scores.n();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    if u.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: u.len(),
        });
    }
    check_bandwidth(h)?;
    check_direction(gamma, scores.p())
}

pub(crate) fn check_bandwidth<T: Scalar>(h: T) -> Result<()> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::NonPositiveBandwidth(h.as_f64()));
    }
    Ok(())
}

pub(crate) fn check_direction<T: Scalar>(gamma: &[T], p: usize) -> Result<()> {
    if gamma.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            got: gamma.len(),
        });
    }
    if !is_unit(gamma) {
        return Err(Error::NotUnitNorm(norm(gamma).as_f64()));
    }
    Ok(())
}

/// The projected U-statistic `Q_n(γ)`.
pub fn q_n<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    gamma: &[T],
    h: T,
    kernel: Kernel,
) -> Result<T> {
    check_inputs(u, scores, gamma, h)?;
    let proj = scores.project_onto(gamma);
    Ok(q_n_projected(u, &proj, h, kernel))
}

pub(crate) fn q_n_projected<T: Scalar>(u: &[T], proj: &[T], h: T, kernel: Kernel) -> T {
    let mut s = [T::zero()];
    pair_sums(proj, h, kernel, false, u, 1, &mut s);
    T::lit(2.0) * s[0] * pair_scale(proj.len(), h)
}

/// `τ̂²(γ)`, the unconditional variance estimate built from squared residuals.
pub fn tau_hat_sq<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    gamma: &[T],
    h: T,
    kernel: Kernel,
) -> Result<T> {
    check_inputs(u, scores, gamma, h)?;
    let proj = scores.project_onto(gamma);
    let u2: Vec<T> = u.iter().map(|&x| x * x).collect();
    Ok(squared_kernel_form(&u2, &proj, h, kernel))
}

/// `2/(n(n-1)h) Σ_{i≠j} a_i a_j K²(·)`.
pub(crate) fn squared_kernel_form<T: Scalar>(a: &[T], proj: &[T], h: T, kernel: Kernel) -> T {
    let mut s = [T::zero()];
    pair_sums(proj, h, kernel, true, a, 1, &mut s);
    T::lit(4.0) * s[0] * pair_scale(proj.len(), h)
}

/// `min(τ̂²(γ̂), τ̂²(γ₀))`.
pub fn v_hat_sq_min<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    gamma_hat: &[T],
    gamma0: &[T],
    h: T,
    kernel: Kernel,
) -> Result<T> {
    let a = tau_hat_sq(u, scores, gamma_hat, h, kernel)?;
    let b = tau_hat_sq(u, scores, gamma0, h, kernel)?;
    Ok(a.min(b))
}

/// Uniform-kernel Nadaraya–Watson estimate of `E[U² | ⟨X, γ₀⟩ = t]`.
///
/// An empty window falls back to the global mean of `U²`.
pub fn sigma_hat_sq<T: Scalar>(t: T, u: &[T], proj: &[T], h_v: T) -> Result<T> {
    if u.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    if u.len() != proj.len() {
        return Err(Error::LengthMismatch {
            expected: proj.len(),
            got: u.len(),
        });
    }
    check_bandwidth(h_v)?;
    let (mut sum, mut count) = (T::zero(), 0usize);
    for (&ui, &pi) in u.iter().zip(proj) {
        if (pi - t).abs() <= h_v {
            sum += ui * ui;
            count += 1;
        }
    }
    if count == 0 {
        let total = u.iter().fold(T::zero(), |a, &x| a + x * x);
        return Ok(total / T::from_usize(u.len()).unwrap());
    }
    Ok(sum / T::from_usize(count).unwrap())
}

/// For each observation `i`, the indices within `h_v` of `proj[i]`.
pub(crate) fn variance_windows<T: Scalar>(proj: &[T], h_v: T) -> Vec<Vec<usize>> {
    proj.iter()
        .map(|&t| {
            proj.iter()
                .enumerate()
                .filter(|(_, &p)| (p - t).abs() <= h_v)
                .map(|(k, _)| k)
                .collect()
        })
        .collect()
}

/// `σ̂²(⟨X_i, γ₀⟩)` for every observation and every column of the row-major
/// `n×width` matrix of squared residuals.
pub(crate) fn windowed_means<T: Scalar>(windows: &[Vec<usize>], sq: &[T], width: usize) -> Vec<T> {
    let mut out = vec![T::zero(); sq.len()];
    for (i, w) in windows.iter().enumerate() {
        let row = &mut out[i * width..(i + 1) * width];
        for &k in w {
            for (o, &v) in row.iter_mut().zip(&sq[k * width..(k + 1) * width]) {
                *o += v;
            }
        }
        let count = T::from_usize(w.len()).unwrap();
        row.iter_mut().for_each(|o| *o /= count);
    }
    out
}

/// Conditional-variance estimate
/// `2/(n(n-1)h) Σ_{i≠j} σ̂²(⟨X_i,γ₀⟩) σ̂²(⟨X_j,γ₀⟩) K²(⟨X_i - X_j, γ₀⟩/h)`.
pub fn v_hat_sq_cond<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    gamma0: &[T],
    h: T,
    h_v: T,
    kernel: Kernel,
) -> Result<T> {
    check_inputs(u, scores, gamma0, h)?;
    check_bandwidth(h_v)?;
    let proj = scores.project_onto(gamma0);
    let sigma = proj
        .iter()
        .map(|&t| sigma_hat_sq(t, u, &proj, h_v))
        .collect::<Result<Vec<_>>>()?;
    Ok(squared_kernel_form(&sigma, &proj, h, kernel))
}

/// Variance estimate selected by `params.variance`, for direction `gamma`.
pub fn variance_estimate<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    gamma: &[T],
    gamma0: &[T],
    params: &StatParams<T>,
) -> Result<T> {
    match params.variance {
        VarianceChoice::Min => v_hat_sq_min(u, scores, gamma, gamma0, params.h, params.kernel),
        VarianceChoice::Cond => {
            check_direction(gamma, scores.p())?;
            v_hat_sq_cond(u, scores, gamma0, params.h, params.h_v, params.kernel)
        }
    }
}

/// `n h^{1/2} Q_n / v̂`, rejecting a zero variance estimate as degenerate.
pub(crate) fn standardize<T: Scalar>(n: usize, h: T, q: T, var: T) -> Result<T> {
    if !(var > T::zero()) || !var.is_finite() {
        return Err(Error::DegenerateVariance(var.as_f64()));
    }
    Ok(T::from_usize(n).unwrap() * h.sqrt() * q / var.sqrt())
}

/// The standardized statistic `n h^{1/2} Q_n(γ) / v̂(γ)`.
pub fn standardized_stat<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    gamma: &[T],
    gamma0: &[T],
    params: &StatParams<T>,
) -> Result<T> {
    let q = q_n(u, scores, gamma, params.h, params.kernel)?;
    let var = variance_estimate(u, scores, gamma, gamma0, params)?;
    standardize(scores.n(), params.h, q, var)
}
