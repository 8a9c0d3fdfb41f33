//! Discretized L²[0,1]: uniform grids, curves, orthonormal bases and projections.
//!
//! Integrals are trapezoidal sums on a uniform grid. A [`Grid`] is shared
//! between curves through an [`Arc`], so compatibility checks are usually a
//! pointer comparison.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance for the numerical orthonormality check of a [`Basis`].
pub const ORTHONORMALITY_TOL: f64 = 1.0e-3;

/// Default number of grid points.
pub const DEFAULT_GRID_SIZE: usize = 101;

/// Uniform grid on [0,1] with cached trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    /// `size` equally spaced points from 0 to 1.
    pub fn uniform(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {size}"
            )));
        }
        let last = T::from_usize(size - 1).unwrap();
        let points = (0..size)
            .map(|k| T::from_usize(k).unwrap() / last)
            .collect();
        Ok(Self::with_points(points))
    }

    /// Validates an explicit list of abscissae on [0,1].
    pub fn from_points(points: Vec<T>) -> Result<Self> {
        let g = points.len();
        if g < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {g}"
            )));
        }
        if points[0] != T::zero() || points[g - 1] != T::one() {
            return Err(Error::InvalidGrid(
                "grid must start at 0 and end at 1".to_string(),
            ));
        }
        let spacing = T::one() / T::from_usize(g - 1).unwrap();
        let tol = T::lit(1.0e-12).max(T::unit_tolerance()) * spacing;
        for (k, w) in points.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step <= T::zero() {
                return Err(Error::InvalidGrid(format!(
                    "points not strictly increasing at index {}",
                    k + 1
                )));
            }
            if (step - spacing).abs() > tol {
                return Err(Error::InvalidGrid(format!(
                    "non-uniform spacing at index {}",
                    k + 1
                )));
            }
        }
        Ok(Self::with_points(points))
    }

    /// Maps arbitrary increasing, uniformly spaced abscissae affinely onto [0,1].
    pub fn from_abscissae(raw: &[T]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                raw.len()
            )));
        }
        let lo = raw[0];
        let span = raw[raw.len() - 1] - lo;
        if span <= T::zero() {
            return Err(Error::InvalidGrid(
                "abscissae must be increasing".to_string(),
            ));
        }
        let g = raw.len();
        let last = T::from_usize(g - 1).unwrap();
        let spacing = T::one() / last;
        let tol = T::lit(1.0e-6).max(T::unit_tolerance());
        for (k, &x) in raw.iter().enumerate() {
            let mapped = (x - lo) / span;
            let expected = T::from_usize(k).unwrap() * spacing;
            if (mapped - expected).abs() > tol * spacing {
                return Err(Error::InvalidGrid(format!(
                    "abscissa {k} breaks uniform spacing"
                )));
            }
        }
        Self::uniform(g)
    }

    fn with_points(points: Vec<T>) -> Self {
        let g = points.len();
        let spacing = T::one() / T::from_usize(g - 1).unwrap();
        let half = spacing / T::lit(2.0);
        let mut weights = vec![spacing; g];
        weights[0] = half;
        weights[g - 1] = half;
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Trapezoid quadrature weights; they sum to one.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn spacing(&self) -> T {
        self.points[1] - self.points[0]
    }

    /// Trapezoidal integral of sampled values over [0,1].
    pub fn integrate(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.len());
        self.weights
            .iter()
            .zip(values)
            .fold(T::zero(), |acc, (&w, &v)| acc + w * v)
    }

    /// Trapezoidal integral of the product of two sampled functions.
    pub fn integrate_product(&self, f: &[T], g: &[T]) -> T {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .fold(T::zero(), |acc, (&w, (&a, &b))| acc + w * a * b)
    }
}

pub(crate) fn same_grid<T: Scalar>(a: &Arc<Grid<T>>, b: &Arc<Grid<T>>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

/// A function on [0,1] known through its values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> Curve<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "curve value at grid index {k} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// ∫₀¹ f(t) dt.
    pub fn integral(&self) -> T {
        self.grid.integrate(&self.values)
    }

    pub fn l2_norm(&self) -> T {
        self.grid
            .integrate_product(&self.values, &self.values)
            .sqrt()
    }

    /// `self - other`, pointwise.
    pub fn sub(&self, other: &Curve<T>) -> Result<Curve<T>> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Curve {
            grid: self.grid.clone(),
            values,
        })
    }
}

/// Trapezoidal L² inner product ⟨f, g⟩ = ∫₀¹ f(t) g(t) dt.
pub fn inner_product<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Result<T> {
    if !same_grid(&f.grid, &g.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(f.grid.integrate_product(&f.values, &g.values))
}

/// Ordered family of orthonormal curves sharing one grid.
#[derive(Debug, Clone)]
pub struct Basis<T> {
    grid: Arc<Grid<T>>,
    elements: Vec<Curve<T>>,
}

impl<T: Scalar> Basis<T> {
    /// Wraps `elements`, rejecting them unless their Gram matrix is the
    /// identity within [`ORTHONORMALITY_TOL`].
    pub fn new(elements: Vec<Curve<T>>) -> Result<Self> {
        let basis = Self::unchecked(elements)?;
        let dev = basis.orthonormality_defect();
        if dev > T::lit(ORTHONORMALITY_TOL) {
            return Err(Error::InvalidArgument(format!(
                "basis is not orthonormal (max Gram deviation {dev})"
            )));
        }
        Ok(basis)
    }

    /// Classical Gram–Schmidt (applied twice) on `elements`.
    pub fn orthonormalized(elements: Vec<Curve<T>>) -> Result<Self> {
        let mut basis = Self::unchecked(elements)?;
        let grid = basis.grid.clone();
        let mut done: Vec<Vec<T>> = Vec::with_capacity(basis.elements.len());
        for (j, e) in basis.elements.iter().enumerate() {
            let mut v = e.values.clone();
            for _ in 0..2 {
                for q in &done {
                    let c = grid.integrate_product(&v, q);
                    for (x, &y) in v.iter_mut().zip(q) {
                        *x -= c * y;
                    }
                }
            }
            let nrm = grid.integrate_product(&v, &v).sqrt();
            if nrm <= T::epsilon() {
                return Err(Error::InvalidArgument(format!(
                    "basis element {j} is linearly dependent on its predecessors"
                )));
            }
            v.iter_mut().for_each(|x| *x /= nrm);
            done.push(v);
        }
        basis.elements = done
            .into_iter()
            .map(|values| Curve {
                grid: grid.clone(),
                values,
            })
            .collect();
        Ok(basis)
    }

    pub(crate) fn unchecked(elements: Vec<Curve<T>>) -> Result<Self> {
        let first = elements.first().ok_or(Error::EmptyBasis)?;
        let grid = first.grid.clone();
        if elements.iter().any(|e| !same_grid(&grid, &e.grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, elements })
    }

    /// Largest absolute entry of `Gram - I`.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for (i, a) in self.elements.iter().enumerate() {
            for (j, b) in self.elements.iter().enumerate().skip(i) {
                let ip = self.grid.integrate_product(&a.values, &b.values);
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Curve<T>] {
        &self.elements
    }

    /// Keeps the first `p` elements.
    pub fn truncated(&self, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::EmptyBasis);
        }
        if p > self.len() {
            return Err(Error::InvalidArgument(format!(
                "requested {p} basis elements, only {} available",
                self.len()
            )));
        }
        Ok(Self {
            grid: self.grid.clone(),
            elements: self.elements[..p].to_vec(),
        })
    }

    /// Σ_j coeffs[j] ρ_j.
    pub fn reconstruct(&self, coeffs: &[T]) -> Result<Curve<T>> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let mut values = vec![T::zero(); self.grid.len()];
        for (c, e) in coeffs.iter().zip(&self.elements) {
            for (v, &x) in values.iter_mut().zip(&e.values) {
                *v += *c * x;
            }
        }
        Ok(Curve {
            grid: self.grid.clone(),
            values,
        })
    }
}

/// The Karhunen–Loève basis of Brownian motion, ρ_j(t) = √2 sin((j − ½)πt).
pub fn kl_sine_basis<T: Scalar>(grid: Arc<Grid<T>>, p: usize) -> Result<Basis<T>> {
    if p == 0 {
        return Err(Error::EmptyBasis);
    }
    let elements = (1..=p)
        .map(|j| Curve::from_fn(grid.clone(), |t| kl_sine(j, t)))
        .collect::<Result<Vec<_>>>()?;
    Basis::new(elements)
}

#[inline]
pub(crate) fn kl_sine<T: Scalar>(j: usize, t: T) -> T {
    let freq = (T::from_usize(j).unwrap() - T::lit(0.5)) * T::PI();
    T::SQRT_2() * (freq * t).sin()
}

/// Row-major n×p matrix of projection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> ScoreMatrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 {
            return Err(Error::InvalidArgument(
                "score matrix needs at least one column".to_string(),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite score".to_string()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.rows
    }

    /// Number of basis directions.
    pub fn p(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    /// Keeps the first `p` columns.
    pub fn leading_columns(&self, p: usize) -> Result<Self> {
        if p == 0 || p > self.cols {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {p} of {} score columns",
                self.cols
            )));
        }
        let data = self.rows().flat_map(|r| r[..p].iter().copied()).collect();
        Ok(Self {
            rows: self.rows,
            cols: p,
            data,
        })
    }

    /// Scalar projections ⟨X_i, γ⟩ = Σ_j x_ij γ_j.
    pub fn project_onto(&self, gamma: &[T]) -> Vec<T> {
        debug_assert_eq!(gamma.len(), self.cols);
        self.rows().map(|r| crate::scalar::dot(r, gamma)).collect()
    }

    /// Applies a row permutation: row `k` of the result is row `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let data = perm
            .iter()
            .flat_map(|&i| self.row(i).iter().copied())
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// scores[i][j] = ⟨X_i, ρ_j⟩.
pub fn project<T: Scalar>(sample: &[Curve<T>], basis: &Basis<T>) -> Result<ScoreMatrix<T>> {
    let grid = basis.grid();
    let mut data = Vec::with_capacity(sample.len() * basis.len());
    for x in sample {
        if !same_grid(grid, &x.grid) {
            return Err(Error::GridMismatch);
        }
        for e in basis.elements() {
            data.push(grid.integrate_product(&x.values, &e.values));
        }
    }
    ScoreMatrix::from_vec(sample.len(), basis.len(), data)
}
