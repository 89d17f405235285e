use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use wte_core::{EffectDirection, HyperGrid, Method, NuisanceConfig, OutcomeModel, PropensitySpec, Sided, TestSides};

use crate::CliError;

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EstimateArgs {
    /// Input CSV with a header row; all remaining columns are numeric covariates.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub outcome: String,
    #[arg(long)]
    pub treatment: String,
    /// Columns to ignore, comma separated.
    #[arg(long, default_value = "")]
    pub drop: String,
    /// Tail masses in (0,1], comma separated and strictly increasing.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    pub alphas: String,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// augmented, dm, ipw, all, or a comma list.
    #[arg(long, default_value = "augmented")]
    pub method: String,
    #[arg(long, value_enum, default_value_t = DirectionArg::AdverseHigh)]
    pub direction: DirectionArg,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    pub interval: SidedArg,
    /// Unlabeled covariate CSV used to estimate the CATE quantile.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Long-format CSV path. Defaults to the JSON path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct PowerArgs {
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub size: f64,
    #[arg(long, default_value_t = 0.8)]
    pub power: f64,
    #[arg(long, value_enum, default_value_t = SidesArg::One)]
    pub sided: SidesArg,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(subcommand)]
    pub kind: SimulateKind,
}

#[derive(clap::Subcommand, Debug)]
pub enum SimulateKind {
    /// Confidence interval coverage and bias of the augmented estimator.
    Coverage(CoverageArgs),
    /// Bias scaling under nuisance errors shrinking like n^-gamma.
    Orthogonality(OrthogonalityArgs),
    /// Scaled variance of several nuisance variants against the efficiency bound.
    Efficiency(EfficiencyArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct CoverageArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// One tail mass or a comma list.
    #[arg(long, default_value = "0.5")]
    pub alpha: String,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = SimNuisanceArg::Oracle)]
    pub nuisance: SimNuisanceArg,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct OrthogonalityArgs {
    #[arg(long, default_value = "1000,4000,16000")]
    pub ns: String,
    #[arg(long, default_value_t = 0.25)]
    pub gamma: f64,
    /// Size of the injected nuisance error at n = 1.
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub dgp: DgpArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EfficiencyArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 300)]
    pub reps: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Comma list from oracle, ridge-known, ridge-logistic, forest-logistic.
    #[arg(long, default_value = "oracle,ridge-known,ridge-logistic")]
    pub variants: String,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub dgp: DgpArgs,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV summary path. Defaults to the JSON path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// The simulated design: `tau(X) ~ N(cate_mean, cate_sd^2)`, noise, and a constant treatment probability.
#[derive(Args, Debug)]
pub struct DgpArgs {
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub cate_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cate_sd: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.5)]
    pub treat_prob: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
}

impl DgpArgs {
    pub fn dgp(&self) -> wte_core::simulation::GaussianCateDgp {
        wte_core::simulation::GaussianCateDgp {
            cate_mean: self.cate_mean,
            cate_sd: self.cate_sd,
            noise_sd: self.noise_sd,
            propensity: self.treat_prob,
            dim: self.dim,
            seed: 0,
        }
    }
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// ridge, enet, forest, or sieve:DEGREE.
    #[arg(long, default_value = "ridge")]
    pub outcome_model: String,
    /// logistic, forest, or known:P.
    #[arg(long, default_value = "logistic")]
    pub propensity: String,
    /// Propensity clipping constant in (0, 0.5).
    #[arg(long, default_value_t = 0.01)]
    pub clip: f64,
    /// Folds for hyperparameter selection.
    #[arg(long, default_value_t = 2)]
    pub cv_folds: usize,
    #[arg(long)]
    pub ridge_penalties: Option<String>,
    #[arg(long)]
    pub enet_lambdas: Option<String>,
    #[arg(long)]
    pub logistic_lambdas: Option<String>,
    #[arg(long)]
    pub l1_ratio: Option<f64>,
    #[arg(long)]
    pub tree_depths: Option<String>,
    #[arg(long)]
    pub tree_counts: Option<String>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

/// Echo of the nuisance settings actually used.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub outcome_model: String,
    pub propensity: String,
    pub clip: f64,
    pub cv_folds: usize,
    pub ridge_penalties: Vec<f64>,
    pub enet_lambdas: Vec<f64>,
    pub logistic_lambdas: Vec<f64>,
    pub l1_ratio: f64,
    pub tree_depths: Vec<usize>,
    pub tree_counts: Vec<usize>,
    pub min_leaf: usize,
    pub max_iter: usize,
}

impl ModelArgs {
    pub fn build(&self, seed: u64) -> Result<(NuisanceConfig<f64>, ModelEcho), CliError> {
        let outcome_model = parse_outcome_model(&self.outcome_model)?;
        let propensity_model = parse_propensity(&self.propensity)?;
        let mut grid = HyperGrid::<f64>::default();
        if let Some(s) = &self.ridge_penalties {
            grid.ridge_penalties = parse_list(s, "ridge-penalties")?;
        }
        if let Some(s) = &self.enet_lambdas {
            grid.enet_lambdas = parse_list(s, "enet-lambdas")?;
        }
        if let Some(s) = &self.logistic_lambdas {
            grid.logistic_lambdas = parse_list(s, "logistic-lambdas")?;
        }
        if let Some(v) = self.l1_ratio {
            grid.l1_ratio = v;
        }
        if let Some(s) = &self.tree_depths {
            grid.tree_depths = parse_list(s, "tree-depths")?;
        }
        if let Some(s) = &self.tree_counts {
            grid.tree_counts = parse_list(s, "tree-counts")?;
        }
        if let Some(v) = self.min_leaf {
            grid.min_leaf = v;
        }
        let echo = ModelEcho {
            outcome_model: self.outcome_model.clone(),
            propensity: self.propensity.clone(),
            clip: self.clip,
            cv_folds: self.cv_folds,
            ridge_penalties: grid.ridge_penalties.clone(),
            enet_lambdas: grid.enet_lambdas.clone(),
            logistic_lambdas: grid.logistic_lambdas.clone(),
            l1_ratio: grid.l1_ratio,
            tree_depths: grid.tree_depths.clone(),
            tree_counts: grid.tree_counts.clone(),
            min_leaf: grid.min_leaf,
            max_iter: self.max_iter,
        };
        let config = NuisanceConfig {
            outcome_model,
            propensity_model,
            clip_c: self.clip,
            cv_folds: self.cv_folds,
            hyper_grid: grid,
            seed,
            max_iter: self.max_iter,
            ..NuisanceConfig::default()
        };
        config.validate()?;
        Ok((config, echo))
    }
}

pub fn parse_outcome_model(s: &str) -> Result<OutcomeModel<f64>, CliError> {
    match s.trim() {
        "ridge" => Ok(OutcomeModel::Ridge),
        "enet" | "elastic-net" => Ok(OutcomeModel::ElasticNetLinear),
        "forest" | "trees" => Ok(OutcomeModel::TreeEnsemble),
        other => match other.strip_prefix("sieve") {
            Some("") => Ok(OutcomeModel::PolynomialSieve { degree: 2 }),
            Some(rest) => rest
                .strip_prefix(':')
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&d| d >= 1)
                .map(|degree| OutcomeModel::PolynomialSieve { degree })
                .ok_or_else(|| CliError::Config(format!("bad sieve degree in `{other}`"))),
            None => Err(CliError::Config(format!("unknown outcome model `{other}`"))),
        },
    }
}

pub fn parse_propensity(s: &str) -> Result<PropensitySpec<f64>, CliError> {
    match s.trim() {
        "logistic" => Ok(PropensitySpec::ElasticNetLogistic),
        "forest" | "trees" => Ok(PropensitySpec::TreeEnsembleClassifier),
        other => {
            let p = other
                .strip_prefix("known:")
                .ok_or_else(|| CliError::Config(format!("unknown propensity model `{other}`")))?
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad known propensity in `{other}`")))?;
            if !(p > 0.0 && p < 1.0) {
                return Err(CliError::Config(format!("known propensity {p} outside (0,1)")));
            }
            Ok(PropensitySpec::KnownConstant(p))
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    let v = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| CliError::Config(format!("bad value `{t}` in --{what}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err(CliError::Config(format!("--{what} is empty")));
    }
    Ok(v)
}

/// Tail masses: each in (0,1], strictly increasing.
pub fn parse_alphas(s: &str) -> Result<Vec<f64>, CliError> {
    let alphas: Vec<f64> = parse_list(s, "alphas")?;
    for &a in &alphas {
        if !(a > 0.0 && a <= 1.0) {
            return Err(CliError::Config(format!("alpha out of (0,1]: {a}")));
        }
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("alphas must be strictly increasing".into()));
    }
    Ok(alphas)
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>, CliError> {
    let mut out = Vec::new();
    for t in s.split(',').map(str::trim) {
        let add: &[Method] = match t {
            "augmented" => &[Method::Augmented],
            "dm" => &[Method::Dm],
            "ipw" => &[Method::Ipw],
            "all" => &[Method::Augmented, Method::Dm, Method::Ipw],
            other => return Err(CliError::Config(format!("unknown method `{other}`"))),
        };
        for m in add {
            if !out.contains(m) {
                out.push(*m);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    /// Large effects are harmful.
    AdverseHigh,
    /// Large effects are desirable.
    DesiredHigh,
}

impl From<DirectionArg> for EffectDirection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::AdverseHigh => EffectDirection::AdverseHigh,
            DirectionArg::DesiredHigh => EffectDirection::DesiredHigh,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SidedArg {
    Two,
    Upper,
    Lower,
}

impl From<SidedArg> for Sided {
    fn from(s: SidedArg) -> Self {
        match s {
            SidedArg::Two => Sided::TwoSided,
            SidedArg::Upper => Sided::UpperOnly,
            SidedArg::Lower => Sided::LowerOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SidesArg {
    One,
    Two,
}

impl From<SidesArg> for TestSides {
    fn from(s: SidesArg) -> Self {
        match s {
            SidesArg::One => TestSides::OneSided,
            SidesArg::Two => TestSides::TwoSided,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimNuisanceArg {
    Oracle,
    Fitted,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_lists() {
        assert_eq!(parse_alphas("0.2, 0.5,1").unwrap(), vec![0.2, 0.5, 1.0]);
        let msg = match parse_alphas("0.5,1.5") {
            Err(CliError::Config(m)) => m,
            other => panic!("{other:?}"),
        };
        assert!(msg.contains("alpha out of (0,1]"));
        assert!(parse_alphas("0").is_err());
        assert!(parse_alphas("0.5,0.5").is_err());
        assert!(parse_alphas("").is_err());
    }

    #[test]
    fn model_names() {
        assert!(matches!(parse_outcome_model("sieve:3").unwrap(), OutcomeModel::PolynomialSieve { degree: 3 }));
        assert!(parse_outcome_model("sieve:0").is_err());
        assert!(parse_outcome_model("lasso").is_err());
        assert!(matches!(parse_propensity("known:0.5").unwrap(), PropensitySpec::KnownConstant(p) if p == 0.5));
        assert!(parse_propensity("known:1").is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(parse_methods("all").unwrap(), vec![Method::Augmented, Method::Dm, Method::Ipw]);
        assert_eq!(parse_methods("dm,dm,ipw").unwrap(), vec![Method::Dm, Method::Ipw]);
        assert!(parse_methods("best").is_err());
    }
}
