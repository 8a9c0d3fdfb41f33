mod common;

use common::*;
use fgof::bootstrap::BootstrapDraws;
use fgof::direction::uninformative_gamma0;
use fgof::*;

fn small_config() -> TestConfig64 {
    TestConfig {
        bandwidths: vec![0.3, 0.5],
        grid_size: Some(60),
        replicates: 39,
        seed: 17,
        ..TestConfig::default()
    }
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let (x, y) = linear_null(60, 1, 41);
    let a = run_test(&small_config(), &x, &y).unwrap();
    let b = run_test(&small_config(), &x, &y).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.provenance.config_hash, small_config().hash());
    // the embedded config reproduces the run
    assert_eq!(run_test(&a.config, &x, &y).unwrap(), a);
}

#[test]
fn thread_count_does_not_change_results() {
    let (x, y) = linear_null(60, 2, 41);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_test(&small_config(), &x, &y).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn p_values_on_discrete_support() {
    let (x, y) = linear_null(60, 3, 41);
    let r = run_test(&small_config(), &x, &y).unwrap();
    let b = small_config().replicates as f64;
    for row in &r.per_bandwidth {
        let p = row.p_value_bootstrap.unwrap();
        let k = p * (b + 1.0);
        assert!(p > 0.0 && p <= 1.0);
        assert!((k - k.round()).abs() < 1e-9, "{p}");
        assert!((row.p_value_percent - 100.0 * p).abs() < 1e-12);
        assert!(row.p_value_normal > 0.0 && row.p_value_normal <= 1.0);
    }
}

#[test]
fn observed_errors_path_matches_direct_statistic() {
    let (x, y) = linear_null(60, 4, 41);
    let u: Vec<f64> = x.iter().zip(&y).map(|(c, v)| v - c.integral()).collect();
    let config = TestConfig {
        model: ModelKind::None,
        calibration: Calibration::Normal,
        ..small_config()
    };
    let r = run_test(&config, &x, &u).unwrap();
    let scores = kl_scores(&x, 3);
    let g0 = uninformative_gamma0::<f64>(3).unwrap();
    let prep = PreparedTest::from_parts(&config, None, u.clone(), scores.clone()).unwrap();
    for row in &r.per_bandwidth {
        let params = prep.params(row.h);
        let direct = standardized_stat(&u, &scores, &row.gamma_hat, &g0, &params).unwrap();
        assert_eq!(direct, row.statistic);
        let sel = select_direction(
            &u,
            &scores,
            prep.direction_grid(),
            &g0,
            &params,
            &prep.search_settings(),
            false,
        )
        .unwrap();
        assert_eq!(sel.statistic, row.statistic);
    }
}

#[test]
fn bootstrap_stats_scale_invariant() {
    let (x, y) = linear_null(60, 5, 41);
    let u: Vec<f64> = x.iter().zip(&y).map(|(c, v)| v - c.integral()).collect();
    let config = TestConfig {
        model: ModelKind::None,
        ..small_config()
    };
    let scores = kl_scores(&x, 3);
    let cal = |u: Vec<f64>| {
        let prep = PreparedTest::from_parts(&config, None, u, scores.clone()).unwrap();
        bootstrap_test(&prep, 0.3, &config.bootstrap_plan()).unwrap()
    };
    let a = cal(u.clone());
    let b = cal(u.iter().map(|v| 7.3 * v).collect());
    assert_eq!(a.p_value, b.p_value);
    for (s, t) in a.bootstrap_stats.iter().zip(&b.bootstrap_stats) {
        assert!(close(*s, *t, 1e-9));
    }
}

#[test]
fn refitted_and_frozen_models_both_run() {
    let (x, y) = linear_null(60, 6, 41);
    let base = run_test(&small_config(), &x, &y).unwrap();
    for (fd, fm) in [(true, false), (false, true), (true, true)] {
        let config = TestConfig {
            freeze_direction: fd,
            freeze_model: fm,
            ..small_config()
        };
        let r = run_test(&config, &x, &y).unwrap();
        assert_eq!(
            r.per_bandwidth[0].statistic,
            base.per_bandwidth[0].statistic
        );
        assert_eq!(
            r.per_bandwidth[0]
                .calibration
                .as_ref()
                .unwrap()
                .bootstrap_stats
                .len(),
            39
        );
    }
}

#[test]
fn bootstrap_draws_reused_across_bandwidths() {
    let (x, y) = linear_null(60, 7, 41);
    let config = small_config();
    let prep = PreparedTest::new(&config, &x, &y).unwrap();
    let draws = BootstrapDraws::generate(&prep, &config.bootstrap_plan()).unwrap();
    let r = prep.run(false).unwrap();
    for row in &r.per_bandwidth {
        let again = prep.evaluate(row.h, Some(&draws), false).unwrap();
        assert_eq!(&again, row);
    }
}

#[test]
fn noiseless_linear_data_is_degenerate() {
    // curves in a 3-dimensional span, response exactly linear in them
    let g = std::sync::Arc::new(Grid::uniform(41).unwrap());
    let x =
        fgof::simulate::simulate_brownian(40, &g, 3, &mut fgof::rng::stream_rng(8, &[])).unwrap();
    let y: Vec<f64> = x.iter().map(|c| c.integral()).collect();
    let err = run_test(&small_config(), &x, &y).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Degenerate, "{err}");
    let zero = vec![0.0; 40];
    let config = TestConfig {
        model: ModelKind::None,
        ..small_config()
    };
    assert_eq!(
        run_test(&config, &x, &zero).unwrap_err().kind(),
        ErrorKind::Degenerate
    );
}

#[test]
fn input_validation() {
    let (x, y) = linear_null(9, 9, 21);
    assert!(matches!(
        run_test(&small_config(), &x, &y),
        Err(Error::TooFewObservations { needed: 10, got: 9 })
    ));
    let (x, y) = linear_null(20, 9, 21);
    assert!(matches!(
        run_test(&small_config(), &x, &y[..19]),
        Err(Error::LengthMismatch { .. })
    ));
    let bad = TestConfig {
        level: 0.0,
        ..small_config()
    };
    assert_eq!(
        run_test(&bad, &x, &y).unwrap_err().kind(),
        ErrorKind::Config
    );
}

#[test]
fn fpca_basis_and_quadratic_model() {
    let (x, y) = linear_null(80, 10, 41);
    let config = TestConfig {
        basis: BasisKind::Fpca,
        model: ModelKind::Quadratic,
        variance: VarianceChoice::Min,
        kernel: Kernel::Gaussian,
        ..small_config()
    };
    let r = run_test(&config, &x, &y).unwrap();
    assert_eq!(r.per_bandwidth.len(), 2);
    assert!(r.per_bandwidth.iter().all(|b| b.statistic.is_finite()));
}

#[test]
fn config_json_round_trip() {
    let c = TestConfig {
        h_v: Some(0.2),
        refinement_radius: Some(0.05),
        ..small_config()
    };
    let text = serde_json::to_string(&c).unwrap();
    let back: TestConfig64 = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}

#[test]
fn single_precision_pipeline() {
    let (x, y) = linear_null(50, 12, 31);
    let g = std::sync::Arc::new(Grid::<f32>::uniform(31).unwrap());
    let x32: Vec<Curve32> = x
        .iter()
        .map(|c| Curve::new(g.clone(), c.values().iter().map(|&v| v as f32).collect()).unwrap())
        .collect();
    let y32: Vec<f32> = y.iter().map(|&v| v as f32).collect();
    let config = TestConfig32 {
        grid_size: Some(40),
        replicates: 19,
        ..Default::default()
    };
    let r32 = run_test(&config, &x32, &y32).unwrap();
    let config64 = TestConfig64 {
        grid_size: Some(40),
        replicates: 19,
        ..Default::default()
    };
    let r64 = run_test(&config64, &x, &y).unwrap();
    let (a, b) = (
        r32.per_bandwidth[0].statistic as f64,
        r64.per_bandwidth[0].statistic,
    );
    assert!((a - b).abs() < 1e-3 * b.abs().max(1.0), "{a} vs {b}");
}
