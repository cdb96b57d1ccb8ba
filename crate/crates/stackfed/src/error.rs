//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    // --- tabular ---
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("target column '{0}' not found in header")]
    TargetNotFound(String),
    #[error("empty input file: {0}")]
    EmptyFile(String),
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error("fewer than 2 classes remain after preprocessing")]
    InsufficientClasses,
    #[error("feature '{0}' required by the schema is absent from the dataset")]
    MissingFeature(String),
    #[error("feature '{feature}' kind does not match the schema")]
    FeatureKindMismatch { feature: String },
    #[error("category '{label}' of feature '{feature}' is outside the schema vocabulary")]
    CategoryOutsideVocabulary { feature: String, label: String },
    #[error("cannot encode a missing value (feature '{0}'); preprocess first")]
    MissingValueAtEncode(String),
    #[error("class '{0}' too small to stratify (need at least 3 rows)")]
    ClassTooSmall(String),
    #[error("split fractions must be positive and sum to 1")]
    BadFractions,
    #[error("labels are not clean binary {{0,1}}; run preprocess_binary first")]
    BinaryLabelsRequired,

    // --- partition ---
    #[error("beta must lie in (0, 1], got {0}")]
    BetaOutOfRange(f64),
    #[error("alpha must be positive, got {0}")]
    AlphaOutOfRange(f64),
    #[error("p must lie in (0, 1], got {0}")]
    FeatureProportionOutOfRange(f64),
    #[error("epsilon must be non-negative, got {0}")]
    EpsilonOutOfRange(f64),
    #[error("degenerate partition: client {client} would receive {rows} rows (minimum 15)")]
    DegeneratePartition { client: u32, rows: usize },
    #[error("total demand {demand} exceeds available rows {available}")]
    NotEnoughRows { demand: usize, available: usize },
    #[error("partition column '{0}' not found")]
    PartitionColumnMissing(String),
    #[error("partition column '{0}' is not categorical")]
    PartitionColumnNotCategorical(String),
    #[error("no client group satisfies the minimum size requirement")]
    NoViableGroups,
    #[error("n_clients must be at least 1")]
    NoClients,

    // --- forest ---
    #[error("cannot fit on an empty dataset")]
    EmptyTrainingSet,
    #[error("column mismatch: missing {missing:?}, extra {extra:?}")]
    ColumnMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("model deserialization failed: {0}")]
    ModelFormat(String),

    // --- federation ---
    #[error("client {0} already published a model")]
    DuplicatePublish(u32),
    #[error("registry is frozen; no further publishes accepted")]
    RegistryFrozen,
    #[error("registry must be frozen before models can be fetched")]
    RegistryNotFrozen,
    #[error("client {0} already reported this round")]
    DuplicateReport(u32),
    #[error("no reports recorded")]
    NoReports,

    // --- metrics ---
    #[error("balanced accuracy undefined: y_true contains a single class")]
    BalancedAccuracyUndefined,
    #[error("input vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("jaccard undefined for two empty sets")]
    JaccardUndefined,
    #[error("undefined correlation: zero rank variance")]
    UndefinedCorrelation,
    #[error("spearman requires at least 3 observations, got {0}")]
    TooFewObservations(usize),

    // --- runner ---
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown panel '{name}'; valid panels: {valid}")]
    UnknownPanel { name: String, valid: String },
    #[error("every experiment cell failed; see log for per-cell errors")]
    AllCellsFailed,
    #[error("no result rows to write")]
    NoRows,
    #[error("results parse error at line {line}: {message}")]
    ResultsFormat { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
