//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use wte_core::crossfit::kappa;
use wte_core::nuisance::CovariateFn;
use wte_core::simulation::{
    run_coverage_experiment_multi, run_orthogonality_experiment, ExperimentConfig, GaussianCateDgp, OrthogonalityConfig,
};
use wte_core::{
    closed_form_normal_wte, empirical_cvar, estimate_wte, min_sample_size, CrossFit, EffectDirection, Method,
    NuisanceConfig, OutcomeModel, PowerSpec, PropensitySpec,
};

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn run(id: usize, name: &'static str, budget: Duration, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    Outcome { id, name, pass: ok && elapsed <= budget, detail, elapsed, budget }
}

fn closed_form() -> (bool, String) {
    let w90 = closed_form_normal_wte(-0.1_f64, 1.0, 0.9).unwrap();
    let w50 = closed_form_normal_wte(-0.1_f64, 1.0, 0.5).unwrap();
    let ok = (w90 - 0.095).abs() <= 5e-4 && (w50 - 0.698).abs() <= 5e-4;
    (ok, format!("alpha 0.9 -> {w90:.6}, alpha 0.5 -> {w50:.6}"))
}

fn cvar_oracle() -> (bool, String) {
    let mut r = common::rng(2024);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..1000 {
        let len = r.random_range(1..=12);
        let v: Vec<f64> = (0..len).map(|_| r.random_range(-5.0..5.0)).collect();
        for a in 1..=10 {
            let alpha = a as f64 / 10.0;
            let got = empirical_cvar(&v, alpha).unwrap().value;
            let want = common::brute_force_cvar(&v, alpha);
            worst = worst.max((got - want).abs());
            checks += 1;
        }
    }
    (worst <= 1e-10, format!("{checks} checks, max abs diff {worst:.2e}"))
}

fn ate_reduction() -> (bool, String) {
    let mut r = common::rng(77);
    let mut worst: f64 = 0.0;
    for rep in 0..50u64 {
        let n = r.random_range(60..=500);
        let d = r.random_range(1..=4);
        let data = common::random_dataset(1000 + rep, n, d);
        let outcome_model = match rep % 3 {
            0 => OutcomeModel::Ridge,
            1 => OutcomeModel::PolynomialSieve { degree: 2 },
            _ => OutcomeModel::ElasticNetLinear,
        };
        let propensity_model =
            if rep % 2 == 0 { PropensitySpec::ElasticNetLogistic } else { PropensitySpec::KnownConstant(0.5) };
        let config = NuisanceConfig { outcome_model, propensity_model, seed: rep, ..NuisanceConfig::default() };
        let k = 2 + (rep as usize % 4);
        let est = estimate_wte(&data, 1.0, k, &config, EffectDirection::AdverseHigh, None, rep).unwrap();
        let cf = CrossFit::fit(&data, k, &config, rep).unwrap();
        let aipw = common::independent_aipw(&cf, &data);
        worst = worst.max((est.point - aipw).abs());
    }
    (worst <= 1e-10, format!("50 datasets, max abs diff {worst:.2e}"))
}

fn coverage_and_efficiency() -> ((bool, String), (bool, String)) {
    let dgp = GaussianCateDgp::default();
    let reports = run_coverage_experiment_multi(&dgp, 2000, &[0.5, 0.8], 500, &ExperimentConfig::default(), 1).unwrap();
    let mut cov_ok = true;
    let mut eff_ok = true;
    let mut cov = Vec::new();
    let mut eff = Vec::new();
    for r in &reports {
        cov_ok &= (0.92..=0.98).contains(&r.empirical_coverage);
        let sigma_ratio = r.mean_sigma2_hat / r.true_sigma2;
        eff_ok &= (0.8..=1.2).contains(&r.variance_ratio) && (sigma_ratio - 1.0).abs() <= 0.1;
        cov.push(format!("alpha {}: coverage {:.3}", r.alpha, r.empirical_coverage));
        eff.push(format!(
            "alpha {}: n Var/sigma2 {:.3}, mean sigma2_hat/sigma2 {:.3}",
            r.alpha, r.variance_ratio, sigma_ratio
        ));
    }
    ((cov_ok, cov.join("; ")), (eff_ok, eff.join("; ")))
}

fn orthogonality() -> (bool, String) {
    let report = run_orthogonality_experiment(&GaussianCateDgp::default(), &OrthogonalityConfig::default(), 1).unwrap();
    let dm: Vec<String> = report
        .config
        .ns
        .iter()
        .map(|&n| format!("{:.3}", report.row(Method::Dm, n).unwrap().scaled_bias))
        .collect();
    let trend = report.trend(Method::Augmented).unwrap();
    let ok = report.strictly_increasing(Method::Dm) && trend.contains_zero();
    (
        ok,
        format!(
            "DM sqrt(n)|bias| [{}]; augmented slope {:.3} CI [{:.3}, {:.3}]",
            dm.join(", "),
            trend.slope,
            trend.ci_lower,
            trend.ci_upper
        ),
    )
}

fn power_constant() -> (bool, String) {
    let spec = PowerSpec::new(1.0, 1.0);
    let m = spec.multiplier().unwrap();
    let n = min_sample_size(&spec).unwrap();
    ((m - 6.183).abs() <= 1e-3 && n == 7, format!("multiplier {m:.4}, n(sigma2=1, eps=1) = {n}"))
}

fn property_suites() -> (bool, String) {
    let mut failures = Vec::new();
    let mut r = common::rng(8);

    // Coherence and the quantile definition.
    for _ in 0..500 {
        let len = r.random_range(1..=30);
        let v: Vec<f64> = (0..len).map(|_| r.random_range(-10.0..10.0)).collect();
        let c = r.random_range(-5.0..5.0);
        let lam = r.random_range(0.0..4.0);
        let a1 = r.random_range(0.01..1.0);
        let a2 = r.random_range(a1..=1.0);
        let base = empirical_cvar(&v, a1).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let scaled: Vec<f64> = v.iter().map(|x| x * lam).collect();
        let mean = v.iter().sum::<f64>() / len as f64;
        let tol = 1e-9 * (1.0 + base.value.abs());
        if (empirical_cvar(&shifted, a1).unwrap().value - base.value - c).abs() > tol {
            failures.push("translation");
        }
        if (empirical_cvar(&scaled, a1).unwrap().value - lam * base.value).abs() > tol * (1.0 + lam) {
            failures.push("homogeneity");
        }
        if empirical_cvar(&v, a2).unwrap().value > base.value + tol || base.value < mean - tol {
            failures.push("alpha monotonicity or mean bound");
        }
        let p = 1.0 - a1;
        let below = |t: f64| v.iter().filter(|&&x| x <= t).count() as f64 / len as f64;
        let strictly_below = v.iter().filter(|&&x| x < base.eta_star).count() as f64 / len as f64;
        if a1 < 1.0 && (below(base.eta_star) < p || strictly_below >= p) {
            failures.push("quantile definition");
        }
    }

    // Clipping with a wildly out-of-range propensity function.
    let data = common::random_dataset(5, 300, 3);
    let wild: CovariateFn<f64> = Arc::new(|x: &[f64]| 3.0 * x[0]);
    let zero: CovariateFn<f64> = Arc::new(|_| 0.0);
    let mut clip_cfg = NuisanceConfig::oracle(zero.clone(), zero, wild);
    clip_cfg.clip_c = 0.05;
    let cf = CrossFit::fit(&data, 3, &clip_cfg, 1).unwrap();
    for m in cf.models() {
        if m.e.predict_prob(data.covariates()).iter().any(|&p| !(0.05..=0.95).contains(&p)) {
            failures.push("clipping");
        }
    }
    let fitted = NuisanceConfig { clip_c: 0.05, ..NuisanceConfig::default() };
    let cf = CrossFit::fit(&data, 3, &fitted, 1).unwrap();
    for m in cf.models() {
        if m.e.predict_prob(data.covariates()).iter().any(|&p| !(0.05..=0.95).contains(&p)) {
            failures.push("clipping (fitted)");
        }
    }

    // Determinism under different degrees of parallelism.
    let forest = NuisanceConfig {
        outcome_model: OutcomeModel::TreeEnsemble,
        propensity_model: PropensitySpec::TreeEnsembleClassifier,
        hyper_grid: wte_core::HyperGrid { tree_depths: vec![3, 5], tree_counts: vec![20], ..Default::default() },
        ..NuisanceConfig::default()
    };
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let e = estimate_wte(&data, 0.3, 3, &forest, EffectDirection::AdverseHigh, None, 11).unwrap();
            let rep = run_coverage_experiment_multi(
                &GaussianCateDgp::default(),
                300,
                &[0.5],
                8,
                &ExperimentConfig::default(),
                3,
            )
            .unwrap();
            (e.point.to_bits(), e.variance.to_bits(), rep)
        })
    };
    if in_pool(1) != in_pool(4) {
        failures.push("determinism under parallelism");
    }

    // DM monotone in alpha for fixed fits; sign symmetry for every method.
    let cf = CrossFit::fit(&data, 3, &NuisanceConfig::default(), 2).unwrap();
    let alphas = [0.1, 0.25, 0.4, 0.6, 0.8, 1.0];
    let dm: Vec<f64> = alphas
        .iter()
        .map(|&a| cf.estimate(&data, a, Method::Dm, EffectDirection::AdverseHigh, None).unwrap().point)
        .collect();
    if dm.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        failures.push("DM alpha monotonicity");
    }
    let negated = data.with_negated_outcomes();
    let cf_neg = CrossFit::fit(&negated, 3, &NuisanceConfig::default(), 2).unwrap();
    for method in [Method::Augmented, Method::Dm, Method::Ipw] {
        for &a in &alphas {
            let up = cf.estimate(&data, a, method, EffectDirection::AdverseHigh, None).unwrap().point;
            let down = cf_neg.estimate(&negated, a, method, EffectDirection::DesiredHigh, None).unwrap().point;
            if (up + down).abs() > 1e-12 * (1.0 + up.abs()) {
                failures.push("sign symmetry");
            }
        }
    }

    // kappa has mean zero under ignorability with true nuisances.
    let dgp = GaussianCateDgp::default();
    let alpha = 0.3;
    let q = dgp.true_threshold(alpha).unwrap();
    let mut inside = 0;
    for rep in 0..200u64 {
        let sim = dgp.with_seed(9000 + rep).generate(1000).unwrap();
        let k: Vec<f64> = sim
            .data
            .covariates()
            .row_iter()
            .enumerate()
            .map(|(i, x)| {
                let (m0, m1) = ((sim.mu0)(x), (sim.mu1)(x));
                let h = if m1 - m0 >= q { 1.0 / alpha } else { 0.0 };
                kappa(sim.data.outcomes()[i], sim.data.treatments()[i], m0, m1, 0.5, h)
            })
            .collect();
        let n = k.len() as f64;
        let mean = k.iter().sum::<f64>() / n;
        let sd = (k.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if (mean / (sd / n.sqrt())).abs() <= 4.0 {
            inside += 1;
        }
    }
    if inside < 198 {
        failures.push("kappa mean zero");
    }

    failures.dedup();
    let ok = failures.is_empty();
    let detail = if ok {
        format!("coherence, quantile, clipping, determinism, DM monotonicity, sign symmetry, kappa ({inside}/200 inside)")
    } else {
        format!("failed: {}", failures.join(", "))
    };
    (ok, detail)
}

fn main() -> ExitCode {
    let mut outcomes = vec![
        run(1, "closed-form example", Duration::from_millis(1), closed_form),
        run(2, "CVaR oracle equivalence", Duration::from_secs(5), cvar_oracle),
        run(3, "ATE reduction at alpha = 1", Duration::from_secs(60), ate_reduction),
    ];
    let start = Instant::now();
    let (cov, eff) = coverage_and_efficiency();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(300);
    outcomes.push(Outcome { id: 4, name: "CLT coverage", pass: cov.0 && elapsed <= budget, detail: cov.1, elapsed, budget });
    outcomes.push(Outcome {
        id: 5,
        name: "variance calibration",
        pass: eff.0 && elapsed <= budget,
        detail: eff.1,
        elapsed,
        budget,
    });
    outcomes.push(run(6, "orthogonality", Duration::from_secs(900), orthogonality));
    outcomes.push(run(7, "power constant", Duration::from_millis(10), power_constant));
    outcomes.push(run(8, "property suites", Duration::from_secs(600), property_suites));

    let mut all = true;
    for o in &outcomes {
        all &= o.pass;
        println!(
            "{} criterion {} ({}): {} [{:.3}s, budget {}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
