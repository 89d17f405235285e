use thiserror::Error;

/// Problems with the input table itself. Rows are 1-indexed data rows
/// (the header is not counted).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`")]
    NonNumericCell { row: usize, col: String },
    #[error("treatment at row {0} is not 0 or 1")]
    NonBinaryTreatment(usize),
    #[error("non-finite value at row {row}, column `{col}`")]
    NaNValue { row: usize, col: String },
    #[error("container lengths disagree: {0}")]
    ShapeMismatch(String),
    #[error("both treatment arms must be nonempty")]
    BothArmsRequired,
    #[error("io error: {0}")]
    Io(String),
}

/// Everything that can go wrong once the data is accepted.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("empty input")]
    EmptyInput,
    #[error("alpha out of (0,1]: {0}")]
    AlphaOutOfRange(f64),
    #[error("confidence level out of (0,1): {0}")]
    LevelOutOfRange(f64),
    #[error("fold count {k} out of range for n = {n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("fold {fold} has {size} rows; at least 2 required")]
    FoldTooSmall { fold: usize, size: usize },
    #[error("arm has {found} rows, at least {required} required")]
    InsufficientArmSamples { found: usize, required: usize },
    #[error("propensity model needs both arms in the training rows")]
    SingleArmInput,
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("optimizer did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid power parameters: {0}")]
    InvalidSpec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
