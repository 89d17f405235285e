use serde::Serialize;
use wte_core::simulation::{
    run_coverage_experiment_multi, run_efficiency_experiment, run_orthogonality_experiment, ExperimentConfig,
    GaussianCateDgp, OrthogonalityConfig, SimNuisance, SimulationReport,
};
use wte_core::{NuisanceConfig, OutcomeModel, PropensitySpec};

use crate::args::{
    parse_alphas, parse_list, CoverageArgs, EfficiencyArgs, ModelEcho, OrthogonalityArgs, SimNuisanceArg, SimulateArgs,
    SimulateKind,
};
use crate::estimate::{emit, to_json};
use crate::CliError;

#[derive(Serialize)]
struct Envelope<C, R> {
    schema_version: u32,
    command: &'static str,
    config: C,
    dgp: GaussianCateDgp,
    report: R,
}

pub fn run(a: SimulateArgs) -> Result<(), CliError> {
    match a.kind {
        SimulateKind::Coverage(c) => coverage(c),
        SimulateKind::Orthogonality(o) => orthogonality(o),
        SimulateKind::Efficiency(e) => efficiency(e),
    }
}

fn check_reps(reps: usize) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct CoverageConfig {
    n: usize,
    alphas: Vec<f64>,
    reps: usize,
    k: usize,
    level: f64,
    nuisance: SimNuisanceArg,
    fitted_models: Option<ModelEcho>,
    seed: u64,
}

fn coverage(a: CoverageArgs) -> Result<(), CliError> {
    check_reps(a.reps)?;
    let alphas = parse_alphas(&a.alpha)?;
    let (nuisance, fitted_models) = match a.nuisance {
        SimNuisanceArg::Oracle => (SimNuisance::Oracle, None),
        SimNuisanceArg::Fitted => {
            let (cfg, echo) = a.models.build(a.seed)?;
            (SimNuisance::Fitted(cfg), Some(echo))
        }
    };
    let dgp = a.dgp.dgp();
    let cfg = ExperimentConfig { k: a.k, level: a.level, nuisance };
    let reports = run_coverage_experiment_multi(&dgp, a.n, &alphas, a.reps, &cfg, a.seed)?;

    let mut csv = String::from("alpha,n,reps,true_wte,true_sigma2,mean_bias,bias_se,coverage,variance_ratio,mean_sigma2_hat\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.alpha, r.n, r.reps, r.true_wte, r.true_sigma2, r.mean_bias, r.bias_se, r.empirical_coverage, r.variance_ratio,
            r.mean_sigma2_hat
        ));
    }
    let config = CoverageConfig { n: a.n, alphas, reps: a.reps, k: a.k, level: a.level, nuisance: a.nuisance, fitted_models, seed: a.seed };
    let json = to_json(&Envelope { schema_version: 1, command: "simulate coverage", config, dgp, report: &reports })?;
    if a.output.out.is_some() {
        print_coverage(&reports);
    }
    emit(a.output.out.as_deref(), a.output.csv.as_deref(), &json, &csv)
}

fn print_coverage(reports: &[SimulationReport]) {
    println!("{:>6} {:>10} {:>10} {:>9} {:>9}", "alpha", "truth", "bias", "coverage", "var_ratio");
    for r in reports {
        println!(
            "{:>6} {:>10.5} {:>10.5} {:>9.3} {:>9.3}",
            r.alpha, r.true_wte, r.mean_bias, r.empirical_coverage, r.variance_ratio
        );
    }
}

fn orthogonality(a: OrthogonalityArgs) -> Result<(), CliError> {
    check_reps(a.reps)?;
    let ns: Vec<usize> = parse_list(&a.ns, "ns")?;
    let cfg = OrthogonalityConfig { ns, gamma: a.gamma, amplitude: a.amplitude, alpha: a.alpha, reps: a.reps, k: a.k };
    let dgp = a.dgp.dgp();
    let report = run_orthogonality_experiment(&dgp, &cfg, a.seed)?;

    let mut csv = String::from("method,n,mean_error,scaled_bias,scaled_bias_se\n");
    for r in &report.rows {
        csv.push_str(&format!("{},{},{},{},{}\n", r.method.name(), r.n, r.mean_error, r.scaled_bias, r.scaled_bias_se));
    }
    if a.output.out.is_some() {
        println!("{:>10} {:>7} {:>12} {:>10}", "method", "n", "sqrt(n)|bias|", "se");
        for r in &report.rows {
            println!("{:>10} {:>7} {:>12.4} {:>10.4}", r.method.name(), r.n, r.scaled_bias, r.scaled_bias_se);
        }
        for (m, t) in &report.trends {
            println!("{} slope on ln n: {:.4} [{:.4}, {:.4}]", m.name(), t.slope, t.ci_lower, t.ci_upper);
        }
    }
    #[derive(Serialize)]
    struct Config {
        seed: u64,
    }
    let json = to_json(&Envelope {
        schema_version: 1,
        command: "simulate orthogonality",
        config: Config { seed: a.seed },
        dgp,
        report: &report,
    })?;
    emit(a.output.out.as_deref(), a.output.csv.as_deref(), &json, &csv)
}

fn variant(name: &str, dgp: &GaussianCateDgp) -> Result<SimNuisance, CliError> {
    let fitted = |outcome_model, propensity_model| SimNuisance::Fitted(NuisanceConfig { outcome_model, propensity_model, ..NuisanceConfig::default() });
    Ok(match name {
        "oracle" => SimNuisance::Oracle,
        "ridge-known" => fitted(OutcomeModel::Ridge, PropensitySpec::KnownConstant(dgp.propensity)),
        "ridge-logistic" => fitted(OutcomeModel::Ridge, PropensitySpec::ElasticNetLogistic),
        "forest-logistic" => fitted(OutcomeModel::TreeEnsemble, PropensitySpec::ElasticNetLogistic),
        other => return Err(CliError::Config(format!("unknown variant `{other}`"))),
    })
}

#[derive(Serialize)]
struct EfficiencyConfig {
    n: usize,
    alpha: f64,
    reps: usize,
    k: usize,
    variants: Vec<String>,
    seed: u64,
}

fn efficiency(a: EfficiencyArgs) -> Result<(), CliError> {
    check_reps(a.reps)?;
    let dgp = a.dgp.dgp();
    let names: Vec<String> = parse_list(&a.variants, "variants")?;
    let variants = names.iter().map(|v| Ok((v.clone(), variant(v, &dgp)?))).collect::<Result<Vec<_>, CliError>>()?;
    let report = run_efficiency_experiment(&dgp, a.n, a.alpha, a.reps, a.k, &variants, a.seed)?;

    let mut csv = String::from("variant,scaled_variance,ratio,mean_bias\n");
    for r in &report.rows {
        csv.push_str(&format!("{},{},{},{}\n", r.variant, r.scaled_variance, r.ratio, r.mean_bias));
    }
    if a.output.out.is_some() {
        println!("bound sigma2 = {:.5}", report.true_sigma2);
        for r in &report.rows {
            println!("{:<16} n*var = {:.5}  ratio = {:.3}", r.variant, r.scaled_variance, r.ratio);
        }
    }
    let config = EfficiencyConfig { n: a.n, alpha: a.alpha, reps: a.reps, k: a.k, variants: names, seed: a.seed };
    let json = to_json(&Envelope { schema_version: 1, command: "simulate efficiency", config, dgp, report: &report })?;
    emit(a.output.out.as_deref(), a.output.csv.as_deref(), &json, &csv)
}
