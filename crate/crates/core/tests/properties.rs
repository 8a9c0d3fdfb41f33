mod common;

use common::*;
use fgof::direction::{uninformative_gamma0, SearchSettings};
use fgof::*;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, f64)> {
    (2usize..14, 1usize..5).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), n),
            prop::collection::vec(-1.0f64..1.0, p)
                .prop_filter("nonzero", |g| g.iter().map(|v| v * v).sum::<f64>() > 1e-4),
            0.1f64..2.0,
        )
    })
}

fn unit(g: &[f64]) -> Vec<f64> {
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    g.iter().map(|v| v / n).collect()
}

proptest! {
    #[test]
    fn q_n_sign_symmetric((u, x, g, h) in instance()) {
        let s = ScoreMatrix::from_rows(&x).unwrap();
        let g = unit(&g);
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        for k in [Kernel::Epanechnikov, Kernel::Gaussian] {
            prop_assert_eq!(q_n(&u, &s, &g, h, k).unwrap(), q_n(&u, &s, &neg, h, k).unwrap());
        }
    }

    #[test]
    fn q_n_permutation_invariant((u, x, g, h) in instance(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = u.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut fgof::rng::stream_rng(seed, &[]));
        let s = ScoreMatrix::from_rows(&x).unwrap();
        let up: Vec<f64> = perm.iter().map(|&i| u[i]).collect();
        let g = unit(&g);
        let a = q_n(&u, &s, &g, h, Kernel::Epanechnikov).unwrap();
        let b = q_n(&up, &s.permuted(&perm), &g, h, Kernel::Epanechnikov).unwrap();
        prop_assert!(close(a, b, 1e-12), "{} vs {}", a, b);
        let a = tau_hat_sq(&u, &s, &g, h, Kernel::Epanechnikov).unwrap();
        let b = tau_hat_sq(&up, &s.permuted(&perm), &g, h, Kernel::Epanechnikov).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn tau_nonnegative((u, x, g, h) in instance()) {
        let s = ScoreMatrix::from_rows(&x).unwrap();
        prop_assert!(tau_hat_sq(&u, &s, &unit(&g), h, Kernel::Gaussian).unwrap() >= 0.0);
    }

    #[test]
    fn standardized_stat_scale_invariant((u, x, g, h) in instance(), c in 0.01f64..50.0) {
        let s = ScoreMatrix::from_rows(&x).unwrap();
        let p = g.len();
        let g0 = uninformative_gamma0::<f64>(p).unwrap();
        let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
        for variance in [VarianceChoice::Min, VarianceChoice::Cond] {
            let params = StatParams { h, kernel: Kernel::Epanechnikov, variance, h_v: 0.4 };
            let a = standardized_stat(&u, &s, &unit(&g), &g0, &params);
            let b = standardized_stat(&cu, &s, &unit(&g), &g0, &params);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!(close(a, b, 1e-10), "{} vs {}", a, b),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn inner_product_symmetric_bilinear(a in prop::collection::vec(-2.0f64..2.0, 11),
                                        b in prop::collection::vec(-2.0f64..2.0, 11),
                                        c in -3.0f64..3.0) {
        let g = std::sync::Arc::new(Grid::uniform(11).unwrap());
        let f = Curve::new(g.clone(), a.clone()).unwrap();
        let h = Curve::new(g.clone(), b).unwrap();
        let cf = Curve::new(g, a.iter().map(|v| c * v).collect()).unwrap();
        let fh = inner_product(&f, &h).unwrap();
        prop_assert!((fh - inner_product(&h, &f).unwrap()).abs() < 1e-14);
        prop_assert!((inner_product(&cf, &h).unwrap() - c * fh).abs() < 1e-12);
    }

    #[test]
    fn bessel_inequality(coeffs in prop::collection::vec(-1.0f64..1.0, 8)) {
        let g = std::sync::Arc::new(Grid::uniform(101).unwrap());
        let x = Curve::from_fn(g.clone(), |t: f64| {
            coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * 2.9 * t).cos()).sum()
        }).unwrap();
        let basis = kl_sine_basis(g, 4).unwrap();
        let s = project(std::slice::from_ref(&x), &basis).unwrap();
        let sum: f64 = s.row(0).iter().map(|v| v * v).sum();
        prop_assert!(x.l2_norm().powi(2) >= sum - 1e-3);
    }
}

fn small_problem(seed: u64) -> (Vec<f64>, ScoreMatrix<f64>) {
    let (x, y) = linear_null(60, seed, 41);
    let u: Vec<f64> = x.iter().zip(&y).map(|(c, v)| v - c.integral()).collect();
    (u, kl_scores(&x, 3))
}

fn params(h: f64) -> StatParams<f64> {
    StatParams::new(h, 60)
}

#[test]
fn selection_scale_invariant() {
    for seed in 0..10 {
        let (u, s) = small_problem(seed);
        let g0 = uninformative_gamma0::<f64>(3).unwrap();
        let grid = sphere_grid(3, 80, 3, Some(&g0)).unwrap();
        let base = select_direction(
            &u,
            &s,
            &grid,
            &g0,
            &params(0.3),
            &SearchSettings::default(),
            false,
        )
        .unwrap();
        for c in [0.1, 7.3] {
            let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
            let r = select_direction(
                &cu,
                &s,
                &grid,
                &g0,
                &params(0.3),
                &SearchSettings::default(),
                false,
            )
            .unwrap();
            assert_eq!(r.gamma_hat, base.gamma_hat);
            assert!(close(r.statistic, base.statistic, 1e-10));
        }
    }
}

#[test]
fn duplicated_candidates_do_not_move_argmax() {
    let settings = SearchSettings {
        alpha_n: 0.0,
        ..SearchSettings::default()
    };
    for seed in 0..10 {
        let (u, s) = small_problem(100 + seed);
        let g0 = uninformative_gamma0::<f64>(3).unwrap();
        let grid = sphere_grid(3, 60, 9, Some(&g0)).unwrap();
        let mut doubled = grid.points().to_vec();
        doubled.extend(grid.points().iter().rev().cloned());
        let dup = DirectionGrid::from_points(3, doubled, grid.refinement_fanout()).unwrap();
        let no_refine = SearchSettings {
            fanout: Some(1),
            ..settings
        };
        let a = select_direction(&u, &s, &grid, &g0, &params(0.3), &no_refine, false).unwrap();
        let b = select_direction(&u, &s, &dup, &g0, &params(0.3), &no_refine, false).unwrap();
        assert_eq!(a.gamma_hat, b.gamma_hat);
    }
}

#[test]
fn half_sphere_equals_full_sphere() {
    let settings = SearchSettings {
        alpha_n: 0.0,
        fanout: Some(1),
        radius: None,
    };
    for seed in 0..10 {
        let (u, s) = small_problem(200 + seed);
        let g0 = uninformative_gamma0::<f64>(3).unwrap();
        let half = sphere_grid(3, 60, 4, Some(&g0)).unwrap();
        let mut full = half.points().to_vec();
        full.extend(
            half.points()
                .iter()
                .map(|g| g.iter().map(|v| -v).collect::<Vec<_>>()),
        );
        let full = DirectionGrid::from_points(3, full, 1).unwrap();
        for variance in [VarianceChoice::Cond, VarianceChoice::Min] {
            let p = StatParams {
                variance,
                ..params(0.3)
            };
            let a = select_direction(&u, &s, &half, &g0, &p, &settings, false).unwrap();
            let b = select_direction(&u, &s, &full, &g0, &p, &settings, false).unwrap();
            assert_eq!(a.objective_at_gamma_hat, b.objective_at_gamma_hat);
        }
    }
}

#[test]
fn multiplier_moments() {
    let mut rng = fgof::rng::stream_rng(11, &[]);
    let z: Vec<f64> = fgof::bootstrap::draw_multipliers(200_000, &mut rng);
    let n = z.len() as f64;
    let m = z.iter().sum::<f64>() / n;
    let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    // sd(Z) = 1 and Var(Z²) = E Z⁴ − 1 = 11, so loosen the variance band
    assert!(m.abs() < 4.0 / n.sqrt());
    assert!((v - 1.0).abs() < 4.0 * (11.0 / n).sqrt());
}
