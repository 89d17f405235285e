use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wte_core::{
    confidence_interval, estimate_curves, load_dataset, load_unlabeled, validate, CrossFit, EffectDirection, FoldEstimate,
    Method,
};

use crate::args::{parse_alphas, parse_list, parse_methods, DirectionArg, EstimateArgs, ModelEcho, SidedArg};
use crate::CliError;

#[derive(Serialize)]
struct EffectiveConfig {
    data: String,
    outcome: String,
    treatment: String,
    drop: Vec<String>,
    alphas: Vec<f64>,
    k: usize,
    methods: Vec<Method>,
    direction: DirectionArg,
    level: f64,
    interval: SidedArg,
    pool: Option<String>,
    seed: u64,
    nuisance: ModelEcho,
}

#[derive(Serialize)]
struct Row {
    alpha: f64,
    method: Method,
    point: f64,
    variance: f64,
    /// `calibrated` for the augmented estimator, `naive` for the baselines.
    variance_kind: &'static str,
    std_error: f64,
    ci_lower: f64,
    ci_upper: f64,
    level: f64,
    folds: Vec<FoldEstimate<f64>>,
}

#[derive(Serialize)]
struct Report {
    schema_version: u32,
    command: &'static str,
    config: EffectiveConfig,
    n: usize,
    n_treated: usize,
    covariates: Vec<String>,
    results: Vec<Row>,
}

pub fn run(a: EstimateArgs) -> Result<(), CliError> {
    let alphas = parse_alphas(&a.alphas)?;
    let methods = parse_methods(&a.method)?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Config(format!("confidence level out of (0,1): {}", a.level)));
    }
    let drop: Vec<String> = if a.drop.trim().is_empty() { Vec::new() } else { parse_list(&a.drop, "drop")? };
    let (nuisance, echo) = a.models.build(a.seed)?;
    let direction: EffectDirection = a.direction.into();

    let data = load_dataset::<f64>(&a.data, &a.outcome, &a.treatment, &drop)?;
    validate(&data, true)?;
    let pool = match &a.pool {
        Some(p) => {
            let mut skip = drop.clone();
            skip.extend([a.outcome.clone(), a.treatment.clone()]);
            let pool = load_unlabeled::<f64>(p, &skip)?;
            pool.check_dim(data.dim())?;
            Some(pool)
        }
        None => None,
    };

    let cf = CrossFit::fit(&data, a.k, &nuisance, a.seed)?;
    let curves = estimate_curves(&cf, &data, &alphas, &methods, direction, pool.as_ref())?;
    let mut results = Vec::new();
    for (i, &alpha) in alphas.iter().enumerate() {
        for curve in &curves {
            let est = &curve.estimates[i];
            let ci = confidence_interval(est, a.level, a.interval.into())?;
            results.push(Row {
                alpha,
                method: est.method,
                point: est.point,
                variance: est.variance,
                variance_kind: if est.method.variance_is_calibrated() { "calibrated" } else { "naive" },
                std_error: est.std_error(),
                ci_lower: ci.lower,
                ci_upper: ci.upper,
                level: a.level,
                folds: est.folds.clone(),
            });
        }
    }

    let report = Report {
        schema_version: 1,
        command: "estimate",
        config: EffectiveConfig {
            data: a.data.display().to_string(),
            outcome: a.outcome.clone(),
            treatment: a.treatment.clone(),
            drop,
            alphas,
            k: a.k,
            methods,
            direction: a.direction,
            level: a.level,
            interval: a.interval,
            pool: a.pool.as_ref().map(|p| p.display().to_string()),
            seed: a.seed,
            nuisance: echo,
        },
        n: data.len(),
        n_treated: data.treatments().iter().filter(|&&z| z == 1).count(),
        covariates: data.column_names().map(<[String]>::to_vec).unwrap_or_default(),
        results,
    };
    let json = to_json(&report)?;
    let config_json = serde_json::to_string(&report.config).map_err(|e| CliError::Estimation(e.to_string()))?;
    let mut csv = format!("# schema_version=1\n# config={config_json}\n");
    csv.push_str("alpha,method,point,variance,variance_kind,ci_lower,ci_upper,level\n");
    for r in &report.results {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.alpha,
            r.method.name(),
            r.point,
            r.variance,
            r.variance_kind,
            r.ci_lower,
            r.ci_upper,
            r.level
        ));
    }
    emit(a.out.as_deref(), a.csv.as_deref(), &json, &csv)
}

pub fn to_json<S: Serialize>(v: &S) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Estimation(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// JSON to `out` (or stdout) and CSV to `csv`, defaulting to `out` with a `.csv` extension.
pub fn emit(out: Option<&Path>, csv_path: Option<&Path>, json: &str, csv: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, json)?,
        None => std::io::stdout()
            .write_all(json.as_bytes())
            .map_err(|e| CliError::Config(format!("stdout: {e}")))?,
    }
    let csv_target: Option<PathBuf> = csv_path.map(Path::to_path_buf).or_else(|| out.map(|p| p.with_extension("csv")));
    if let Some(p) = csv_target {
        write_file(&p, csv)?;
    }
    Ok(())
}
