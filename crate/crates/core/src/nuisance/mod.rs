//! Nuisance estimation: outcome regressions per arm and the propensity score.
//!
//! Built-in learners minimize an empirical (penalized) loss on the auxiliary
//! rows. Small hyperparameter grids are tuned by K-fold cross-validation on
//! the same rows. Oracle modes pass known functions through, which the
//! simulation harness uses for ground-truth and orthogonality experiments.

pub mod forest;
pub mod linear;
pub mod logistic;
pub mod oracle;

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::scalar::{stable_mean, Scalar};

pub use forest::{ForestModel, ForestParams};
pub use linear::{fit_ridge, ElasticNetModel, LinearModel, PolynomialSieveModel};
pub use logistic::{EnetPenalty, LogisticModel};
pub use oracle::{corrupt_oracle, CorruptedOracle, CovariateFn, OraclePropensity, OracleRegressor};

/// A fitted conditional-mean model.
pub trait OutcomeRegressor<T: Scalar>: Send + Sync {
    fn predict_row(&self, x: &[T]) -> T;

    fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        x.row_iter().map(|r| self.predict_row(r)).collect()
    }
}

/// A fitted treatment-probability model before clipping.
pub trait PropensityModel<T: Scalar>: Send + Sync {
    fn raw_prob(&self, x: &[T]) -> T;
}

pub type SharedRegressor<T> = Arc<dyn OutcomeRegressor<T>>;

impl<T: Scalar> fmt::Debug for dyn OutcomeRegressor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OutcomeRegressor")
    }
}

/// Propensity model with predictions clipped to `[clip_c, 1 - clip_c]`.
#[derive(Clone)]
pub struct ClippedPropensity<T> {
    model: Arc<dyn PropensityModel<T>>,
    clip_c: T,
}

impl<T: Scalar> ClippedPropensity<T> {
    pub fn new(model: Arc<dyn PropensityModel<T>>, clip_c: T) -> Self {
        Self { model, clip_c }
    }

    pub fn clip_c(&self) -> T {
        self.clip_c
    }

    pub fn predict_prob_row(&self, x: &[T]) -> T {
        let p = self.model.raw_prob(x);
        let lo = self.clip_c;
        let hi = T::one() - self.clip_c;
        if p.is_nan() {
            return T::of(0.5).max(lo).min(hi);
        }
        p.max(lo).min(hi)
    }

    pub fn predict_prob(&self, x: &Matrix<T>) -> Vec<T> {
        x.row_iter().map(|r| self.predict_prob_row(r)).collect()
    }
}

impl<T> fmt::Debug for ClippedPropensity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClippedPropensity")
    }
}

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn code(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }
}

/// Outcome model class.
#[derive(Clone)]
pub enum OutcomeModel<T> {
    Ridge,
    ElasticNetLinear,
    TreeEnsemble,
    PolynomialSieve { degree: usize },
    Oracle { control: CovariateFn<T>, treated: CovariateFn<T> },
}

impl<T> fmt::Debug for OutcomeModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeModel::Ridge => f.write_str("Ridge"),
            OutcomeModel::ElasticNetLinear => f.write_str("ElasticNetLinear"),
            OutcomeModel::TreeEnsemble => f.write_str("TreeEnsemble"),
            OutcomeModel::PolynomialSieve { degree } => write!(f, "PolynomialSieve({degree})"),
            OutcomeModel::Oracle { .. } => f.write_str("Oracle"),
        }
    }
}

/// Propensity model class.
#[derive(Clone)]
pub enum PropensitySpec<T> {
    ElasticNetLogistic,
    TreeEnsembleClassifier,
    /// Known design probability, e.g. a randomized trial.
    KnownConstant(T),
    KnownFunction(CovariateFn<T>),
    Oracle(CovariateFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for PropensitySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropensitySpec::ElasticNetLogistic => f.write_str("ElasticNetLogistic"),
            PropensitySpec::TreeEnsembleClassifier => f.write_str("TreeEnsembleClassifier"),
            PropensitySpec::KnownConstant(c) => write!(f, "Known({c:?})"),
            PropensitySpec::KnownFunction(_) => f.write_str("Known(fn)"),
            PropensitySpec::Oracle(_) => f.write_str("Oracle"),
        }
    }
}

impl<T> PropensitySpec<T> {
    /// Whether fitting needs treatment labels.
    pub fn is_estimated(&self) -> bool {
        matches!(self, PropensitySpec::ElasticNetLogistic | PropensitySpec::TreeEnsembleClassifier)
    }
}

/// Hyperparameter candidates tuned by cross-validation. Single-element lists skip tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid<T> {
    pub ridge_penalties: Vec<T>,
    pub enet_lambdas: Vec<T>,
    pub logistic_lambdas: Vec<T>,
    /// Elastic-net mixing weight on the L1 term.
    pub l1_ratio: T,
    pub tree_depths: Vec<usize>,
    pub tree_counts: Vec<usize>,
    pub min_leaf: usize,
}

impl<T: Scalar> Default for HyperGrid<T> {
    fn default() -> Self {
        let grid = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<_>>();
        Self {
            ridge_penalties: grid(&[1e-3, 1e-2, 1e-1, 1.0, 10.0]),
            enet_lambdas: grid(&[1e-4, 1e-3, 1e-2, 1e-1, 1.0]),
            logistic_lambdas: grid(&[1e-4, 1e-3, 1e-2, 1e-1]),
            l1_ratio: T::of(0.5),
            tree_depths: vec![3, 5, 8],
            tree_counts: vec![50, 200],
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NuisanceConfig<T> {
    pub outcome_model: OutcomeModel<T>,
    pub propensity_model: PropensitySpec<T>,
    pub clip_c: T,
    pub cv_folds: usize,
    pub hyper_grid: HyperGrid<T>,
    pub seed: u64,
    /// Iteration cap for iterative solvers.
    pub max_iter: usize,
    pub tol: T,
}

impl<T: Scalar> Default for NuisanceConfig<T> {
    fn default() -> Self {
        Self {
            outcome_model: OutcomeModel::Ridge,
            propensity_model: PropensitySpec::ElasticNetLogistic,
            clip_c: T::of(0.01),
            cv_folds: 2,
            hyper_grid: HyperGrid::default(),
            seed: 0,
            max_iter: 500,
            // 1e-8 in double precision; single precision cannot resolve that.
            tol: T::of(1e-8).max(T::epsilon() * T::of(100.0)),
        }
    }
}

impl<T: Scalar> NuisanceConfig<T> {
    /// Configuration that uses known functions for every nuisance.
    pub fn oracle(control: CovariateFn<T>, treated: CovariateFn<T>, propensity: CovariateFn<T>) -> Self {
        Self {
            outcome_model: OutcomeModel::Oracle { control, treated },
            propensity_model: PropensitySpec::Oracle(propensity),
            ..Self::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let half = T::of(0.5);
        if !(self.clip_c > T::zero() && self.clip_c < half) {
            return Err(Error::InvalidConfig(format!("clip_c {} outside (0, 0.5)", self.clip_c)));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidConfig("cv_folds must be at least 2".into()));
        }
        let g = &self.hyper_grid;
        if g.ridge_penalties.is_empty()
            || g.enet_lambdas.is_empty()
            || g.logistic_lambdas.is_empty()
            || g.tree_depths.is_empty()
            || g.tree_counts.is_empty()
        {
            return Err(Error::InvalidConfig("hyperparameter grids must be nonempty".into()));
        }
        if g.ridge_penalties.iter().chain(&g.enet_lambdas).chain(&g.logistic_lambdas).any(|&l| !(l >= T::zero())) {
            return Err(Error::InvalidConfig("penalties must be nonnegative".into()));
        }
        if !(g.l1_ratio >= T::zero() && g.l1_ratio <= T::one()) {
            return Err(Error::InvalidConfig("l1_ratio outside [0, 1]".into()));
        }
        if let PropensitySpec::KnownConstant(c) = &self.propensity_model {
            if !(*c > T::zero() && *c < T::one()) {
                return Err(Error::InvalidConfig(format!("known propensity {c} outside (0, 1)")));
            }
        }
        Ok(())
    }

    fn min_arm_rows(&self) -> usize {
        match self.outcome_model {
            OutcomeModel::Oracle { .. } => 0,
            // A single row still has a well-defined penalized fit (intercept only).
            OutcomeModel::Ridge => 1,
            OutcomeModel::TreeEnsemble => self.hyper_grid.min_leaf.max(2),
            _ => 2,
        }
    }
}

/// Shuffled K-fold split of `0..n` used for tuning.
fn cv_splits(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, 0x6376));
    (0..folds).map(|f| idx.iter().copied().skip(f).step_by(folds).collect()).collect()
}

fn complement(n: usize, held: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    held.iter().for_each(|&i| mask[i] = false);
    (0..n).filter(|&i| mask[i]).collect()
}

/// Index of the candidate with the smallest cross-validated loss; ties keep the first.
/// Falls back to candidate 0 when there are too few rows to tune.
fn select_by_cv<T: Scalar, M>(
    n_candidates: usize,
    x: &Matrix<T>,
    target: &[T],
    folds: usize,
    seed: u64,
    fit: impl Fn(usize, &Matrix<T>, &[T]) -> Result<M>,
    loss: impl Fn(&M, &[T], T) -> T,
) -> usize {
    let n = x.rows();
    if n_candidates <= 1 || n < 2 * folds {
        return 0;
    }
    let splits = cv_splits(n, folds, seed);
    let mut best = (T::infinity(), 0);
    for c in 0..n_candidates {
        let mut losses = Vec::with_capacity(n);
        for held in &splits {
            let train = complement(n, held);
            let xt = x.select_rows(&train);
            let yt: Vec<T> = train.iter().map(|&i| target[i]).collect();
            match fit(c, &xt, &yt) {
                Ok(model) => losses.extend(held.iter().map(|&i| loss(&model, x.row(i), target[i]))),
                Err(_) => losses.push(T::infinity()),
            }
        }
        let score = stable_mean(&losses);
        if score < best.0 {
            best = (score, c);
        }
    }
    best.1
}

fn forest_grid<T>(g: &HyperGrid<T>) -> Vec<ForestParams> {
    g.tree_depths
        .iter()
        .flat_map(|&max_depth| {
            g.tree_counts.iter().map(move |&n_trees| ForestParams { n_trees, max_depth, min_leaf: g.min_leaf })
        })
        .collect()
}

fn squared_error<T: Scalar, M: OutcomeRegressor<T>>(m: &M, x: &[T], y: T) -> T {
    let e = m.predict_row(x) - y;
    e * e
}

/// Fits the outcome model of `arm` on the rows selected by `arm_mask`.
pub fn fit_outcome_model<T: Scalar>(
    config: &NuisanceConfig<T>,
    covariates: &Matrix<T>,
    outcomes: &[T],
    arm_mask: &[bool],
    arm: Arm,
) -> Result<SharedRegressor<T>> {
    config.validate()?;
    if let OutcomeModel::Oracle { control, treated } = &config.outcome_model {
        let f = match arm {
            Arm::Control => control.clone(),
            Arm::Treated => treated.clone(),
        };
        return Ok(Arc::new(OracleRegressor(f)));
    }
    let rows: Vec<usize> = (0..arm_mask.len()).filter(|&i| arm_mask[i]).collect();
    let required = config.min_arm_rows();
    if rows.len() < required {
        return Err(Error::InsufficientArmSamples { found: rows.len(), required });
    }
    let x = covariates.select_rows(&rows);
    let y: Vec<T> = rows.iter().map(|&i| outcomes[i]).collect();
    let g = &config.hyper_grid;
    let seed = derive_seed(config.seed, &[u64::from(arm.code())]);
    let folds = config.cv_folds;
    let model: SharedRegressor<T> = match &config.outcome_model {
        OutcomeModel::Ridge => {
            let fit = |c: usize, x: &Matrix<T>, y: &[T]| fit_ridge(x, y, g.ridge_penalties[c]);
            let c = select_by_cv(g.ridge_penalties.len(), &x, &y, folds, seed, fit, squared_error);
            Arc::new(fit(c, &x, &y)?)
        }
        OutcomeModel::ElasticNetLinear => {
            let fit = |c: usize, x: &Matrix<T>, y: &[T]| {
                ElasticNetModel::fit(x, y, g.enet_lambdas[c], g.l1_ratio, config.max_iter * 20, config.tol)
            };
            let c = select_by_cv(g.enet_lambdas.len(), &x, &y, folds, seed, fit, squared_error);
            Arc::new(fit(c, &x, &y)?)
        }
        OutcomeModel::PolynomialSieve { degree } => {
            let fit = |c: usize, x: &Matrix<T>, y: &[T]| PolynomialSieveModel::fit(x, y, *degree, g.ridge_penalties[c]);
            let c = select_by_cv(g.ridge_penalties.len(), &x, &y, folds, seed, fit, squared_error);
            Arc::new(fit(c, &x, &y)?)
        }
        OutcomeModel::TreeEnsemble => {
            let grid = forest_grid(g);
            let fit = |c: usize, x: &Matrix<T>, y: &[T]| ForestModel::fit(x, y, grid[c], seed);
            let c = select_by_cv(grid.len(), &x, &y, folds, seed, fit, squared_error);
            Arc::new(fit(c, &x, &y)?)
        }
        OutcomeModel::Oracle { .. } => unreachable!("handled above"),
    };
    Ok(model)
}

fn log_loss<T: Scalar>(p: T, z: T) -> T {
    let eps = T::of(1e-12);
    let p = p.max(eps).min(T::one() - eps);
    -(z * p.ln() + (T::one() - z) * (T::one() - p).ln())
}

/// Fits `P(Z = 1 | X)`; predictions are clipped to `[clip_c, 1 - clip_c]`.
pub fn fit_propensity_model<T: Scalar>(
    config: &NuisanceConfig<T>,
    covariates: &Matrix<T>,
    treatments: &[u8],
) -> Result<ClippedPropensity<T>> {
    config.validate()?;
    let model: Arc<dyn PropensityModel<T>> = match &config.propensity_model {
        PropensitySpec::KnownConstant(c) => Arc::new(oracle::ConstantPropensity(*c)),
        PropensitySpec::KnownFunction(f) | PropensitySpec::Oracle(f) => Arc::new(OraclePropensity(f.clone())),
        spec => {
            let treated = treatments.iter().filter(|&&z| z == 1).count();
            if treated == 0 || treated == treatments.len() {
                return Err(Error::SingleArmInput);
            }
            let z: Vec<T> = treatments.iter().map(|&v| T::of(f64::from(v))).collect();
            let g = &config.hyper_grid;
            let seed = derive_seed(config.seed, &[2]);
            let folds = config.cv_folds;
            let loss = |m: &dyn PropensityModel<T>, x: &[T], z: T| log_loss(m.raw_prob(x), z);
            if matches!(spec, PropensitySpec::ElasticNetLogistic) {
                let fit = |c: usize, x: &Matrix<T>, z: &[T]| {
                    let penalty = EnetPenalty { lambda: g.logistic_lambdas[c], l1_ratio: g.l1_ratio };
                    LogisticModel::fit(x, z, penalty, config.max_iter, config.tol)
                };
                let c = select_by_cv(g.logistic_lambdas.len(), covariates, &z, folds, seed, fit, |m, x, z| loss(m, x, z));
                Arc::new(fit(c, covariates, &z)?)
            } else {
                let grid = forest_grid(g);
                let fit = |c: usize, x: &Matrix<T>, z: &[T]| ForestModel::fit(x, z, grid[c], seed);
                let c = select_by_cv(grid.len(), covariates, &z, folds, seed, fit, |m, x, z| {
                    let e = PropensityModel::raw_prob(m, x) - z;
                    e * e
                });
                Arc::new(fit(c, covariates, &z)?)
            }
        }
    };
    Ok(ClippedPropensity::new(model, config.clip_c))
}
