use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("activation input is not finite: {0}")]
    Domain(f64),

    #[error("non-finite value produced in layer {layer}")]
    Evaluation { layer: usize },

    #[error("degenerate marginal: normalizer {normalizer:e} is below the guard")]
    DegenerateMarginal { normalizer: f64 },

    #[error("inverse CDF for p = {p} did not converge, bracket [{lower}, {upper}]")]
    Inversion { p: f64, lower: f64, upper: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid bounds: lower {lower} must be strictly below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("point is within {margin} of the boundary in dimension {dim}")]
    Bracket { dim: usize, margin: f64 },

    #[error("{0}")]
    Contract(String),

    #[error("non-finite loss at sample {index}")]
    NonFiniteLoss { index: usize },

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("training failed: every batch of epoch {epoch} produced a non-finite loss")]
    TrainingFailed { epoch: usize, last_good: Box<Vec<f64>> },

    #[error("target column {0} is constant, cannot fit bounds")]
    DegenerateDimension(usize),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    Parse { row: usize, column: String, value: String },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unsupported model version '{0}'")]
    Version(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attaches `path` to an I/O error.
    pub fn file(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::File {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for failures that come from the numbers rather than from the
    /// inputs or files supplied by the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Evaluation { .. }
                | Error::DegenerateMarginal { .. }
                | Error::Inversion { .. }
                | Error::NonFiniteLoss { .. }
                | Error::NonFiniteGradient
                | Error::TrainingFailed { .. }
        )
    }
}
