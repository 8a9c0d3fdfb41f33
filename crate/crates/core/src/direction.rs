//! Direction search on the unit hypersphere.
//!
//! Each candidate direction γ is scored by the standardized statistic minus a
//! penalty `α_n` charged to every direction except the privileged `γ₀`. The
//! grid scan runs once over all candidates, optionally for many residual
//! vectors at the same time (bootstrap replicates share the projections), and
//! is followed by a single local refinement around each winner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::funcspace::ScoreMatrix;
use crate::scalar::{dot, is_unit, norm, normalize, Scalar};
use crate::teststat::{
    check_bandwidth, check_direction, pair_scale, pair_sums, q_n_projected, squared_kernel_form,
    standardize, variance_windows, windowed_means, StatParams, VarianceChoice,
};

/// Directions with `|⟨a, b⟩| > 1 - SAME_DIRECTION_TOL` are treated as one.
const SAME_DIRECTION_TOL: f64 = 1.0e-12;

/// Default penalty for leaving `γ₀`.
pub const DEFAULT_ALPHA_N: f64 = 5.0;

/// `(1, …, 1)/√p`.
pub fn uninformative_gamma0<T: Scalar>(p: usize) -> Result<Vec<T>> {
    if p == 0 {
        return Err(Error::InvalidArgument(
            "direction dimension must be positive".to_string(),
        ));
    }
    let v = T::one() / T::from_usize(p).unwrap().sqrt();
    Ok(vec![v; p])
}

/// Grid sizes used for the sphere scan: 300 points for p = 3 and 1280 for p = 5,
/// doubling per extra dimension beyond that.
pub fn default_grid_size(p: usize) -> usize {
    match p {
        0 | 1 => 1,
        2 => 60,
        3 => 300,
        4 => 640,
        5 => 1280,
        _ => 1280usize.saturating_mul(1 << (p - 5).min(16)),
    }
}

/// Local refinement size `3^(p-1)`: a 3-level lattice on the tangent space.
pub fn default_refinement_fanout(p: usize) -> usize {
    3usize.saturating_pow(p.saturating_sub(1) as u32)
}

/// A finite set of unit vectors in R^p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DirectionGrid<T> {
    p: usize,
    points: Vec<Vec<T>>,
    refinement_fanout: usize,
}

impl<T: Scalar> DirectionGrid<T> {
    /// Wraps explicit directions; every point must be unit-norm.
    pub fn from_points(p: usize, points: Vec<Vec<T>>, refinement_fanout: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument(
                "dimension must be positive".to_string(),
            ));
        }
        for pt in &points {
            check_direction(pt, p)?;
        }
        Ok(Self {
            p,
            points,
            refinement_fanout: refinement_fanout.max(1),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn refinement_fanout(&self) -> usize {
        self.refinement_fanout
    }

    pub fn with_refinement_fanout(mut self, fanout: usize) -> Self {
        self.refinement_fanout = fanout.max(1);
        self
    }

    /// Canonical signs and no antipodal or repeated pairs, keeping first occurrences.
    pub fn antipodally_reduced(&self) -> Self {
        let mut kept: Vec<Vec<T>> = Vec::with_capacity(self.points.len());
        for pt in &self.points {
            let c = canonical_sign(pt.clone());
            if !kept.iter().any(|k| same_axis(k, &c)) {
                kept.push(c);
            }
        }
        Self {
            p: self.p,
            points: kept,
            refinement_fanout: self.refinement_fanout,
        }
    }

    /// Geodesic distance from `center` to its nearest distinct axis in the grid.
    pub fn neighbor_radius(&self, center: &[T]) -> Option<T> {
        nearest_angle(center, self.points.iter().map(Vec::as_slice))
    }
}

fn canonical_sign<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    if let Some(&first) = v.iter().find(|x| **x != T::zero()) {
        if first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

fn same_axis<T: Scalar>(a: &[T], b: &[T]) -> bool {
    dot(a, b).abs() > T::one() - T::lit(SAME_DIRECTION_TOL)
}

fn same_direction<T: Scalar>(a: &[T], b: &[T]) -> bool {
    dot(a, b) > T::one() - T::lit(SAME_DIRECTION_TOL)
}

fn axis_angle<T: Scalar>(a: &[T], b: &[T]) -> T {
    dot(a, b).abs().min(T::one()).acos()
}

fn nearest_angle<'a, T: Scalar>(center: &[T], others: impl Iterator<Item = &'a [T]>) -> Option<T> {
    let floor = T::lit(1.0e-9);
    others
        .map(|o| axis_angle(center, o))
        .filter(|a| *a > floor)
        .fold(None, |best: Option<T>, a| {
            Some(best.map_or(a, |b| b.min(a)))
        })
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut c = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= c)
            .all(|&p| !c.is_multiple_of(p))
        {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Quasi-uniform directions: a randomly shifted Halton sequence pushed through
/// the normal quantile function, normalized and folded onto a half-sphere.
///
/// `include` is placed first (in canonical sign) when given.
pub fn sphere_grid<T: Scalar>(
    p: usize,
    target_size: usize,
    seed: u64,
    include: Option<&[T]>,
) -> Result<DirectionGrid<T>> {
    if p == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be positive".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
    let bases = first_primes(p);
    let std_normal = Normal::standard();
    let mut points = Vec::with_capacity(target_size + 1);
    if let Some(g0) = include {
        check_direction(g0, p)?;
        points.push(canonical_sign(g0.to_vec()));
    }
    for k in 1..=target_size as u64 {
        let mut v: Vec<T> = bases
            .iter()
            .zip(&shifts)
            .map(|(&b, &s)| {
                let u = (radical_inverse(k, b) + s)
                    .fract()
                    .clamp(1.0e-12, 1.0 - 1.0e-12);
                T::lit(std_normal.inverse_cdf(u))
            })
            .collect();
        if norm(&v) <= T::epsilon() {
            continue;
        }
        normalize(&mut v);
        points.push(v);
    }
    let fanout = default_refinement_fanout(p);
    Ok(DirectionGrid {
        p,
        points,
        refinement_fanout: fanout,
    }
    .antipodally_reduced())
}

/// Tangent-space lattice around `center`, mapped back to the sphere.
///
/// The lattice has an odd number of levels per tangent axis, ordered by
/// distance from the origin, so the first point is `center` itself. Every
/// output lies within geodesic distance `radius` of `center`.
pub fn refine_locally<T: Scalar>(center: &[T], fanout: usize, radius: T) -> Result<Vec<Vec<T>>> {
    let p = center.len();
    check_direction(center, p)?;
    if !(radius > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "refinement radius must be positive, got {radius}"
        )));
    }
    if fanout <= 1 || p == 1 {
        return Ok(vec![center.to_vec()]);
    }
    let dims = p - 1;
    let tangent = tangent_basis(center);
    let mut levels = 3usize;
    while levels.saturating_pow(dims as u32) < fanout {
        levels += 2;
    }
    let half = (levels - 1) / 2;
    let step = radius / T::from_usize(dims).unwrap().sqrt() / T::from_usize(half).unwrap();
    let total = levels.pow(dims as u32);
    let mut offsets: Vec<(usize, Vec<i64>)> = (0..total)
        .map(|mut code| {
            let o: Vec<i64> = (0..dims)
                .map(|_| {
                    let d = (code % levels) as i64 - half as i64;
                    code /= levels;
                    d
                })
                .collect();
            (o.iter().map(|x| (x * x) as usize).sum(), o)
        })
        .collect();
    offsets.sort_by_key(|(r2, _)| *r2);
    Ok(offsets
        .into_iter()
        .take(fanout)
        .map(|(_, o)| {
            let mut v = center.to_vec();
            for (k, &ok) in o.iter().enumerate() {
                let shift = step * T::from_i64(ok).unwrap();
                for (x, &t) in v.iter_mut().zip(&tangent[k]) {
                    *x += shift * t;
                }
            }
            normalize(&mut v);
            v
        })
        .collect())
}

fn tangent_basis<T: Scalar>(center: &[T]) -> Vec<Vec<T>> {
    let p = center.len();
    let mut axes: Vec<usize> = (0..p).collect();
    axes.sort_by(|&a, &b| {
        center[a]
            .abs()
            .partial_cmp(&center[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(p - 1);
    for &axis in &axes {
        if basis.len() == p - 1 {
            break;
        }
        let mut v = vec![T::zero(); p];
        v[axis] = T::one();
        for _ in 0..2 {
            for q in std::iter::once(center).chain(basis.iter().map(Vec::as_slice)) {
                let c = dot(&v, q);
                for (x, &y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        if norm(&v) > T::lit(1.0e-6) {
            normalize(&mut v);
            basis.push(v);
        }
    }
    basis
}

/// Penalty and refinement settings of the direction search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SearchSettings<T> {
    pub alpha_n: T,
    /// Overrides the grid's own fanout when set.
    pub fanout: Option<usize>,
    /// Refinement radius; defaults to the winner's nearest-neighbor distance.
    pub radius: Option<T>,
}

impl<T: Scalar> Default for SearchSettings<T> {
    fn default() -> Self {
        Self {
            alpha_n: T::lit(DEFAULT_ALPHA_N),
            fanout: None,
            radius: None,
        }
    }
}

/// Diagnostic row for one evaluated direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DirectionValue<T> {
    pub gamma: Vec<T>,
    pub q_n: T,
    pub variance: T,
    pub standardized: Option<T>,
    pub refined: bool,
}

/// Outcome of the penalized direction search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SelectionResult<T> {
    pub gamma_hat: Vec<T>,
    /// Penalized criterion at `gamma_hat`.
    pub objective_at_gamma_hat: T,
    /// Unpenalized standardized statistic at `gamma_hat`, i.e. `T_n`.
    pub statistic: T,
    pub q_n: T,
    pub variance: T,
    /// `true` when `gamma_hat` differs from `γ₀`.
    pub penalized: bool,
    /// Standardized statistic at `γ₀`.
    pub statistic_at_gamma0: T,
    pub per_direction_values: Option<Vec<DirectionValue<T>>>,
}

/// Penalized least-favorable direction for one residual vector.
pub fn select_direction<T: Scalar>(
    u: &[T],
    scores: &ScoreMatrix<T>,
    grid: &DirectionGrid<T>,
    gamma0: &[T],
    params: &StatParams<T>,
    settings: &SearchSettings<T>,
    record: bool,
) -> Result<SelectionResult<T>> {
    let mut out = select_core(&[u], scores, grid, gamma0, params, settings, record)?;
    out.pop().expect("one column")
}

/// [`select_direction`] for many residual vectors on the same scores.
pub fn select_directions<T: Scalar>(
    us: &[&[T]],
    scores: &ScoreMatrix<T>,
    grid: &DirectionGrid<T>,
    gamma0: &[T],
    params: &StatParams<T>,
    settings: &SearchSettings<T>,
) -> Result<Vec<Result<SelectionResult<T>>>> {
    select_core(us, scores, grid, gamma0, params, settings, false)
}

/// Standardized statistic at a fixed direction for many residual vectors.
pub fn standardized_at<T: Scalar>(
    us: &[&[T]],
    scores: &ScoreMatrix<T>,
    gamma: &[T],
    gamma0: &[T],
    params: &StatParams<T>,
) -> Result<Vec<Result<T>>> {
    let batch = Batch::new(us, scores, gamma0, params)?;
    check_direction(gamma, scores.p())?;
    let proj = scores.project_onto(gamma);
    let q = batch.q_columns(&proj);
    let tau = match params.variance {
        VarianceChoice::Min => Some(batch.tau_columns(&proj)),
        VarianceChoice::Cond => None,
    };
    Ok((0..batch.width)
        .map(|b| {
            let var = batch.variance(b, tau.as_ref().map(|t| t[b]));
            standardize(batch.n, params.h, q[b], var)
        })
        .collect())
}

/// Residual columns and direction-independent variance terms.
struct Batch<'a, T> {
    n: usize,
    width: usize,
    us: &'a [&'a [T]],
    /// Row-major n×width residuals.
    vals: Vec<T>,
    sq: Vec<T>,
    params: StatParams<T>,
    scale: T,
    /// `τ̂²(γ₀)` (min) or the conditional variance (cond), per column.
    base_var: Vec<T>,
}

impl<'a, T: Scalar> Batch<'a, T> {
    fn new(
        us: &'a [&'a [T]],
        scores: &ScoreMatrix<T>,
        gamma0: &[T],
        params: &StatParams<T>,
    ) -> Result<Self> {
        let n = scores.n();
        if n < 2 {
            return Err(Error::TooFewObservations { needed: 2, got: n });
        }
        check_bandwidth(params.h)?;
        check_direction(gamma0, scores.p())?;
        let width = us.len();
        let mut vals = vec![T::zero(); n * width];
        for (b, u) in us.iter().enumerate() {
            if u.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: u.len(),
                });
            }
            for (i, &x) in u.iter().enumerate() {
                vals[i * width + b] = x;
            }
        }
        let sq: Vec<T> = vals.iter().map(|&x| x * x).collect();
        let proj0 = scores.project_onto(gamma0);
        let scale = pair_scale(n, params.h);
        let four = T::lit(4.0);
        let mut s = vec![T::zero(); width];
        match params.variance {
            VarianceChoice::Min => {
                pair_sums(&proj0, params.h, params.kernel, true, &sq, width, &mut s);
            }
            VarianceChoice::Cond => {
                check_bandwidth(params.h_v)?;
                let windows = variance_windows(&proj0, params.h_v);
                let sigma = windowed_means(&windows, &sq, width);
                pair_sums(&proj0, params.h, params.kernel, true, &sigma, width, &mut s);
            }
        }
        let base_var = s.into_iter().map(|x| four * x * scale).collect();
        Ok(Self {
            n,
            width,
            us,
            vals,
            sq,
            params: *params,
            scale,
            base_var,
        })
    }

    fn q_columns(&self, proj: &[T]) -> Vec<T> {
        let mut s = vec![T::zero(); self.width];
        let p = &self.params;
        pair_sums(proj, p.h, p.kernel, false, &self.vals, self.width, &mut s);
        let two = T::lit(2.0);
        s.into_iter().map(|x| two * x * self.scale).collect()
    }

    fn tau_columns(&self, proj: &[T]) -> Vec<T> {
        let mut s = vec![T::zero(); self.width];
        let p = &self.params;
        pair_sums(proj, p.h, p.kernel, true, &self.sq, self.width, &mut s);
        let four = T::lit(4.0);
        s.into_iter().map(|x| four * x * self.scale).collect()
    }

    fn variance(&self, b: usize, tau: Option<T>) -> T {
        match tau {
            Some(t) => t.min(self.base_var[b]),
            None => self.base_var[b],
        }
    }
}

struct Candidate<T> {
    gamma: Vec<T>,
    is_gamma0: bool,
    q: Vec<T>,
    tau: Option<Vec<T>>,
}

#[derive(Clone, Copy)]
struct Best<T> {
    index: usize,
    objective: T,
    statistic: T,
    q: T,
    var: T,
}

fn select_core<T: Scalar>(
    us: &[&[T]],
    scores: &ScoreMatrix<T>,
    grid: &DirectionGrid<T>,
    gamma0: &[T],
    params: &StatParams<T>,
    settings: &SearchSettings<T>,
    record: bool,
) -> Result<Vec<Result<SelectionResult<T>>>> {
    if grid.p() != scores.p() {
        return Err(Error::LengthMismatch {
            expected: scores.p(),
            got: grid.p(),
        });
    }
    if !(settings.alpha_n >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "penalty alpha_n must be nonnegative, got {}",
            settings.alpha_n
        )));
    }
    let batch = Batch::new(us, scores, gamma0, params)?;
    let min_var = params.variance == VarianceChoice::Min;

    let mut dirs: Vec<(Vec<T>, bool)> = vec![(gamma0.to_vec(), true)];
    dirs.extend(
        grid.points()
            .iter()
            .filter(|g| !same_direction(g, gamma0))
            .map(|g| (g.clone(), false)),
    );
    let candidates: Vec<Candidate<T>> = dirs
        .into_par_iter()
        .map(|(gamma, is_gamma0)| {
            let proj = scores.project_onto(&gamma);
            let q = batch.q_columns(&proj);
            let tau = min_var.then(|| batch.tau_columns(&proj));
            Candidate {
                gamma,
                is_gamma0,
                q,
                tau,
            }
        })
        .collect();

    let fanout = settings.fanout.unwrap_or(grid.refinement_fanout());
    let n = batch.n;
    let h = params.h;
    let alpha = settings.alpha_n;
    let penalty = |is_g0: bool| if is_g0 { T::zero() } else { alpha };

    let results = (0..batch.width)
        .into_par_iter()
        .map(|b| {
            let mut best: Option<Best<T>> = None;
            let mut table = record.then(Vec::new);
            let mut stat0 = None;
            for (c, cand) in candidates.iter().enumerate() {
                let var = batch.variance(b, cand.tau.as_ref().map(|t| t[b]));
                let stat = standardize(n, h, cand.q[b], var).ok();
                if let Some(t) = table.as_mut() {
                    t.push(DirectionValue {
                        gamma: cand.gamma.clone(),
                        q_n: cand.q[b],
                        variance: var,
                        standardized: stat,
                        refined: false,
                    });
                }
                if cand.is_gamma0 {
                    stat0 = stat;
                }
                let Some(stat) = stat else { continue };
                let objective = stat - penalty(cand.is_gamma0);
                if best.is_none_or(|bb| objective > bb.objective) {
                    best = Some(Best {
                        index: c,
                        objective,
                        statistic: stat,
                        q: cand.q[b],
                        var,
                    });
                }
            }
            let Some(mut best) = best else {
                return Err(Error::DegenerateVariance(batch.base_var[b].as_f64()));
            };
            let winner = candidates[best.index].gamma.clone();
            let mut gamma_hat = winner.clone();
            let mut hat_is_g0 = candidates[best.index].is_gamma0;

            let radius = settings
                .radius
                .or_else(|| nearest_angle(&winner, candidates.iter().map(|c| c.gamma.as_slice())));
            if let (true, Some(radius)) = (fanout > 1 && scores.p() > 1, radius) {
                let u = batch.us[b];
                for pt in refine_locally(&winner, fanout, radius)? {
                    if pt == winner {
                        continue;
                    }
                    let is_g0 = same_direction(&pt, gamma0);
                    let proj = scores.project_onto(&pt);
                    let q = q_n_projected(u, &proj, h, params.kernel);
                    let tau =
                        min_var.then(|| squared_kernel_form(&sq_of(u), &proj, h, params.kernel));
                    let var = batch.variance(b, tau);
                    let stat = standardize(n, h, q, var).ok();
                    if let Some(t) = table.as_mut() {
                        t.push(DirectionValue {
                            gamma: pt.clone(),
                            q_n: q,
                            variance: var,
                            standardized: stat,
                            refined: true,
                        });
                    }
                    let Some(stat) = stat else { continue };
                    let objective = stat - penalty(is_g0);
                    if objective > best.objective {
                        best = Best {
                            index: usize::MAX,
                            objective,
                            statistic: stat,
                            q,
                            var,
                        };
                        gamma_hat = pt;
                        hat_is_g0 = is_g0;
                    }
                }
            }
            debug_assert!(is_unit(&gamma_hat));
            Ok(SelectionResult {
                gamma_hat,
                objective_at_gamma_hat: best.objective,
                statistic: best.statistic,
                q_n: best.q,
                variance: best.var,
                penalized: !hat_is_g0,
                statistic_at_gamma0: stat0.unwrap_or(T::nan()),
                per_direction_values: table,
            })
        })
        .collect();
    Ok(results)
}

fn sq_of<T: Scalar>(u: &[T]) -> Vec<T> {
    u.iter().map(|&x| x * x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gamma0_values() {
        assert_eq!(uninformative_gamma0::<f64>(1).unwrap(), vec![1.0]);
        assert_eq!(uninformative_gamma0::<f64>(4).unwrap(), vec![0.5; 4]);
        for p in 1..=10 {
            let g: Vec<f64> = uninformative_gamma0(p).unwrap();
            assert_abs_diff_eq!(norm(&g), 1.0, epsilon = 1e-12);
        }
        assert!(uninformative_gamma0::<f64>(0).is_err());
    }

    #[test]
    fn grid_in_one_dimension_collapses() {
        let g: DirectionGrid<f64> = sphere_grid(1, 50, 3, None).unwrap();
        assert_eq!(g.points(), &[vec![1.0]]);
    }

    #[test]
    fn grid_size_and_norms() {
        let g: DirectionGrid<f64> = sphere_grid(3, 300, 11, None).unwrap();
        assert!((270..=330).contains(&g.len()), "size {}", g.len());
        for pt in g.points() {
            assert!((norm(pt) - 1.0).abs() < 1e-12);
        }
        for (i, a) in g.points().iter().enumerate() {
            for b in &g.points()[i + 1..] {
                assert!(!same_axis(a, b));
            }
        }
        assert_eq!(g.refinement_fanout(), 9);
    }

    #[test]
    fn grid_is_seeded() {
        let a: DirectionGrid<f64> = sphere_grid(5, 200, 42, None).unwrap();
        let b: DirectionGrid<f64> = sphere_grid(5, 200, 42, None).unwrap();
        let c: DirectionGrid<f64> = sphere_grid(5, 200, 43, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn grid_includes_requested_point() {
        let g0: Vec<f64> = uninformative_gamma0(3).unwrap();
        let g = sphere_grid(3, 100, 1, Some(&g0)).unwrap();
        assert_eq!(g.points()[0], g0);
    }

    #[test]
    fn refinement_shapes() {
        let c: Vec<f64> = uninformative_gamma0(3).unwrap();
        assert_eq!(refine_locally(&c, 1, 0.1).unwrap(), vec![c.clone()]);
        let pts = refine_locally(&c, 9, 0.1).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], c);
        for pt in &pts {
            assert!((norm(pt) - 1.0).abs() < 1e-12);
            assert!(dot(pt, &c).min(1.0).acos() <= 0.1 + 1e-12);
        }
        let c5: Vec<f64> = uninformative_gamma0(5).unwrap();
        assert_eq!(refine_locally(&c5, 81, 0.2).unwrap().len(), 81);
        assert_eq!(refine_locally(&c5, 10, 0.2).unwrap().len(), 10);
        assert!(refine_locally(&c, 9, 0.0).is_err());
    }

    #[test]
    fn neighbor_radius_ignores_self() {
        let g = DirectionGrid::from_points(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], 3).unwrap();
        let r = g.neighbor_radius(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn from_points_checks_norms() {
        assert!(DirectionGrid::from_points(2, vec![vec![1.0, 1.0]], 1).is_err());
        let g = DirectionGrid::from_points(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 1).unwrap();
        assert_eq!(g.antipodally_reduced().len(), 1);
    }
}
