use std::sync::Arc;

use fgof::rng::stream_rng;
use fgof::simulate::simulate_brownian;
use fgof::*;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn grid(g: usize) -> Arc<Grid64> {
    Arc::new(Grid::uniform(g).unwrap())
}

fn brownian(n: usize, g: usize, seed: u64) -> Vec<Curve64> {
    simulate_brownian(n, &grid(g), 100, &mut stream_rng(seed, &[0])).unwrap()
}

fn ols_fitted(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let beta = x
        .clone()
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-14)
        .unwrap();
    (x * beta).iter().copied().collect()
}

#[test]
fn eigenvalues_match_dense_solver() {
    let xs = brownian(60, 41, 1);
    let dec = fpca(&xs).unwrap();
    let g = 41;
    let n = xs.len() as f64;
    let w = xs[0].grid().weights().to_vec();
    let mean: Vec<f64> = (0..g)
        .map(|k| xs.iter().map(|x| x.values()[k]).sum::<f64>() / n)
        .collect();
    let c = DMatrix::from_fn(g, g, |a, b| {
        let cov: f64 = xs
            .iter()
            .map(|x| (x.values()[a] - mean[a]) * (x.values()[b] - mean[b]))
            .sum::<f64>()
            / n;
        w[a].sqrt() * cov * w[b].sqrt()
    });
    let mut want: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    want.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (j, (got, want)) in dec.eigenvalues.iter().zip(&want).take(10).enumerate() {
        assert!((got - want).abs() < 1e-12, "{j}");
    }
}

#[test]
fn fpca_reconstructs_centered_curves() {
    let xs = brownian(30, 31, 2);
    let dec = fpca(&xs).unwrap();
    let r = dec.rank();
    let basis = dec.eigenfunctions.truncated(r).unwrap();
    for (i, x) in xs.iter().enumerate() {
        let centered = x.sub(&dec.mean_curve).unwrap();
        let coeffs: Vec<f64> = (0..r).map(|j| dec.scores.get(i, j)).collect();
        let back = basis.reconstruct(&coeffs).unwrap();
        let err = back.sub(&centered).unwrap().l2_norm();
        assert!(
            err <= 1e-6 * centered.l2_norm().max(1e-12),
            "curve {i}: {err}"
        );
    }
}

#[test]
fn flm_equals_ols_on_scores() {
    let xs = brownian(80, 51, 3);
    let mut rng = stream_rng(3, &[1]);
    let y: Vec<f64> = xs
        .iter()
        .map(|x| 0.5 + x.integral() + 0.3 * normal(&mut rng))
        .collect();
    for m in 1..=4 {
        let model = fit_flm(&xs, &y, m).unwrap();
        let dec = &model.decomposition;
        let mut cols = vec![vec![1.0; xs.len()]];
        cols.extend((0..m).map(|j| (0..xs.len()).map(|i| dec.scores.get(i, j)).collect()));
        let ols = ols_fitted(&cols, &y);
        for (a, b) in model.fitted.iter().zip(&ols) {
            assert!((a - b).abs() < 1e-8, "m={m}: {a} vs {b}");
        }
        // coefficientwise: slope_j = cov(Y, ξ_j)/var(ξ_j)
        let x = DMatrix::from_fn(xs.len(), m + 1, |i, j| cols[j][i]);
        let beta = x
            .svd(true, true)
            .solve(&DVector::from_column_slice(&y), 1e-14)
            .unwrap();
        for j in 0..m {
            assert!((model.slope_coeffs[j] - beta[j + 1]).abs() < 1e-8);
        }
        let mean: f64 = model.residuals.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 1e-10);
    }
}

#[test]
fn noiseless_linear_recovery() {
    let xs = brownian(50, 51, 4);
    let dec = fpca(&xs).unwrap();
    let b_coeffs = [0.7, -1.1, 0.4];
    let b = dec
        .eigenfunctions
        .truncated(3)
        .unwrap()
        .reconstruct(&b_coeffs)
        .unwrap();
    let y: Vec<f64> = xs.iter().map(|x| inner_product(&b, x).unwrap()).collect();
    let model = fit_flm(&xs, &y, 3).unwrap();
    assert!(model.slope_curve().sub(&b).unwrap().l2_norm() < 1e-6);
    assert!(model.residuals.iter().all(|r| r.abs() < 1e-8));
}

#[test]
fn hand_three_point_example() {
    // X_i = a_i · 1 with a = (−1, 0, 1): ξ = a, θ = 2/3, ĝ = 5/3 ⇒ b̂₁ = 5/2.
    let g = grid(5);
    let xs: Vec<Curve64> = [-1.0, 0.0, 1.0]
        .iter()
        .map(|&a| Curve::constant(g.clone(), a))
        .collect();
    let y = [0.0, 1.0, 5.0];
    let model = fit_flm(&xs, &y, 1).unwrap();
    let want = [0.5, -1.0, 0.5];
    for (r, w) in model.residuals.iter().zip(want) {
        assert!((r - w).abs() < 1e-12);
    }
    assert!((model.slope_coeffs[0].abs() - 2.5).abs() < 1e-12);
    assert!((model.intercept - 2.0).abs() < 1e-12);
    let direct = residuals(&model, &xs, &y).unwrap();
    assert_eq!(direct, model.residuals);
}

#[test]
fn fitted_values_give_zero_residuals() {
    let xs = brownian(40, 31, 5);
    let y: Vec<f64> = xs.iter().map(|x| x.integral()).collect();
    let model = fit_flm(&xs, &y, 3).unwrap();
    let r = residuals(&model, &xs, &model.fitted).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn quadratic_model_recovery_and_orthogonality() {
    let xs = brownian(120, 51, 6);
    let dec = fpca(&xs).unwrap();
    // noiseless Y = ∫X + 0.6(∫X)² lies in the span of (1, ξ, ξξ) only up to
    // truncation, so build Y from the first 3 scores exactly
    let xi: Vec<Vec<f64>> = (0..xs.len())
        .map(|i| (0..3).map(|j| dec.scores.get(i, j)).collect())
        .collect();
    let y: Vec<f64> = xi
        .iter()
        .map(|s| 0.2 + s[0] - 0.5 * s[1] + 0.6 * (s[0] + s[1]).powi(2) + 0.3 * s[1] * s[2])
        .collect();
    let model = fit_fqm(&xs, &y, 3).unwrap();
    let rms = (model.residuals.iter().map(|r| r * r).sum::<f64>() / xs.len() as f64).sqrt();
    assert!(rms < 1e-6, "rms {rms}");

    let mut rng = stream_rng(6, &[9]);
    let noisy: Vec<f64> = y.iter().map(|v| v + normal(&mut rng)).collect();
    let q = fit_fqm(&xs, &noisy, 3).unwrap();
    let mut regressors = vec![vec![1.0; xs.len()]];
    for j in 0..3 {
        regressors.push(xi.iter().map(|s| s[j]).collect());
        for k in j..3 {
            regressors.push(xi.iter().map(|s| s[j] * s[k]).collect());
        }
    }
    for col in &regressors {
        let dot: f64 = col.iter().zip(&q.residuals).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-8, "{dot}");
    }
    // nested least squares
    let l = fit_flm(&xs, &noisy, 3).unwrap();
    let rss = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    assert!(rss(&q.residuals) <= rss(&l.residuals) + 1e-12);
    // OLS oracle for the fitted values
    let ols = ols_fitted(&regressors, &noisy);
    for (a, b) in q.fitted.iter().zip(&ols) {
        assert!((a - b).abs() < 1e-8);
    }
    assert_eq!(residuals(&q, &xs, &noisy).unwrap(), q.residuals);
}

#[test]
fn quadratic_model_exact_in_finite_span() {
    // Y = ∫X + 0.6(∫X)² with X spanned by 4 KL terms, so m = 4 is adequate
    let xs = simulate_brownian(200, &grid(101), 4, &mut stream_rng(7, &[0])).unwrap();
    let y: Vec<f64> = xs
        .iter()
        .map(|x| x.integral() + 0.6 * x.integral().powi(2))
        .collect();
    let model = fit_fqm(&xs, &y, 4).unwrap();
    let rms = (model.residuals.iter().map(|r| r * r).sum::<f64>() / 200.0).sqrt();
    assert!(rms < 1e-6, "rms {rms}");
}

#[test]
fn constant_response_quadratic() {
    let xs = brownian(30, 21, 8);
    let model = fit_fqm(&xs, &[4.0; 30], 2).unwrap();
    assert!((model.intercept - 4.0).abs() < 1e-12);
    assert!(model.slope_coeffs.iter().all(|c| c.abs() < 1e-10));
    assert!(model
        .quadratic_coeffs
        .unwrap()
        .iter()
        .flatten()
        .all(|c| c.abs() < 1e-10));
}

#[test]
fn quadratic_needs_enough_observations() {
    let xs = brownian(10, 21, 9);
    let y = vec![0.0; 10];
    // 1 + 3 + 6 = 10 regressors
    assert!(fit_fqm(&xs, &y, 3).is_err());
    assert!(fit_fqm(&xs, &y, 2).is_ok());
}

#[test]
fn eigenvalue_error_shrinks_with_n() {
    let truth = |j: usize| 1.0 / ((j as f64 - 0.5).powi(2) * std::f64::consts::PI.powi(2));
    let err = |n: usize, seed: u64| {
        let dec = fpca(&brownian(n, 101, seed)).unwrap();
        (1..=3)
            .map(|j| (dec.eigenvalues[j - 1] - truth(j)).abs() / truth(j))
            .sum::<f64>()
    };
    let reps = 20;
    let wins = (0..reps)
        .filter(|&s| err(1000, 1000 + s) < err(100, 2000 + s))
        .count();
    assert!(wins as f64 >= 0.8 * reps as f64, "{wins}/{reps}");
}

fn normal(rng: &mut impl rand::Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
