use wte_core::simulation::{
    monte_carlo_sigma2, run_coverage_experiment, run_efficiency_experiment, run_orthogonality_experiment,
    ExperimentConfig, GaussianCateDgp, OrthogonalityConfig, SimNuisance,
};
use wte_core::{Method, NuisanceConfig, PropensitySpec};

#[test]
fn true_variance_matches_ten_million_draws() {
    let cases = [
        GaussianCateDgp { cate_mean: 0.0, cate_sd: 1.0, noise_sd: 0.0, ..GaussianCateDgp::default() },
        GaussianCateDgp::default(),
        GaussianCateDgp { cate_mean: 2.0, cate_sd: 0.5, noise_sd: 2.0, propensity: 0.3, ..GaussianCateDgp::default() },
    ];
    for (i, dgp) in cases.iter().enumerate() {
        for alpha in [0.1, 0.5, 0.8, 1.0] {
            let truth = dgp.true_sigma2_alpha(alpha).unwrap();
            let (mc, se) = monte_carlo_sigma2(dgp, alpha, 10_000_000, 100 + i as u64).unwrap();
            assert!((truth - mc).abs() <= 3.0 * se, "case {i} alpha {alpha}: {truth} vs {mc} (se {se})");
        }
    }
}

#[test]
fn no_corruption_leaves_every_estimator_unbiased() {
    let cfg = OrthogonalityConfig { ns: vec![500, 2000], amplitude: 0.0, reps: 100, ..OrthogonalityConfig::default() };
    let report = run_orthogonality_experiment(&GaussianCateDgp::default(), &cfg, 4).unwrap();
    for row in &report.rows {
        assert!(row.scaled_bias <= 4.0 * row.scaled_bias_se + 0.05, "{row:?}");
    }
}

#[test]
fn one_third_rate_keeps_dm_biased_and_augmented_flat() {
    let cfg = OrthogonalityConfig { gamma: 1.0 / 3.0, ns: vec![1000, 8000], reps: 100, ..OrthogonalityConfig::default() };
    let report = run_orthogonality_experiment(&GaussianCateDgp::default(), &cfg, 1).unwrap();
    let dm = report.row(Method::Dm, 8000).unwrap();
    assert!(dm.scaled_bias > 4.0 * dm.scaled_bias_se, "{dm:?}");
    assert!(report.trend(Method::Augmented).unwrap().contains_zero());
}

#[test]
fn no_variant_beats_the_variance_floor() {
    let ridge_known = NuisanceConfig { propensity_model: PropensitySpec::KnownConstant(0.5), ..NuisanceConfig::default() };
    let variants = vec![
        ("oracle".to_string(), SimNuisance::Oracle),
        ("ridge, known propensity".to_string(), SimNuisance::Fitted(ridge_known)),
        ("ridge, logistic".to_string(), SimNuisance::Fitted(NuisanceConfig::default())),
    ];
    let report = run_efficiency_experiment(&GaussianCateDgp::default(), 2000, 0.5, 300, 3, &variants, 7).unwrap();
    assert!(report.respects_floor(), "{report:?}");
}

#[test]
fn coverage_with_fitted_nuisances() {
    let cfg = ExperimentConfig { nuisance: SimNuisance::Fitted(NuisanceConfig::default()), ..ExperimentConfig::default() };
    let r = run_coverage_experiment(&GaussianCateDgp::default(), 2000, 0.5, 200, &cfg, 12).unwrap();
    // Binomial 3-sigma band around 0.95 for 200 replications.
    assert!((0.903..=0.997).contains(&r.empirical_coverage), "{}", r.empirical_coverage);
}

#[test]
fn oracle_coverage_bias_band() {
    let r = run_coverage_experiment(&GaussianCateDgp::default(), 2000, 0.5, 500, &ExperimentConfig::default(), 3).unwrap();
    let band = 3.0 * (r.true_sigma2 / (2000.0 * 500.0)).sqrt();
    assert!(r.mean_bias.abs() <= band, "{} vs {band}", r.mean_bias);
    assert_eq!(r.per_rep.len(), 500);
}

#[test]
fn reports_are_reproducible() {
    let dgp = GaussianCateDgp::default();
    let a = run_coverage_experiment(&dgp, 400, 0.7, 20, &ExperimentConfig::default(), 9).unwrap();
    let b = run_coverage_experiment(&dgp, 400, 0.7, 20, &ExperimentConfig::default(), 9).unwrap();
    assert_eq!(a, b);
    let c = run_coverage_experiment(&dgp, 400, 0.7, 20, &ExperimentConfig::default(), 10).unwrap();
    assert_ne!(a, c);
}
