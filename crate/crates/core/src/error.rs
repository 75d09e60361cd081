use thiserror::Error;

/// Errors shared across the crate. Operations return the variant closest to
/// the failed precondition rather than panicking.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("cell budget exceeded: {requested} cells > budget {budget}")]
    CellBudgetExceeded { requested: usize, budget: usize },

    #[error("domain mismatch between grid functions")]
    DomainMismatch,

    #[error("value count {got} does not match cell count {expected}")]
    ValueCountMismatch { expected: usize, got: usize },

    #[error("non-finite value at cell {index} in a function not flagged extended-real")]
    NonFiniteValue { index: usize },

    #[error("catalog arity mismatch for {id}: expected {expected} params, got {got}")]
    ArityMismatch {
        id: String,
        expected: usize,
        got: usize,
    },

    #[error("unknown catalog id {0:?}")]
    UnknownCatalogId(String),

    #[error("expression parse failure: {0}")]
    ExpressionParse(String),

    #[error("resolution too small for {op}: need at least {need} cells per axis")]
    ResolutionTooSmall { op: &'static str, need: usize },

    #[error("empty radius grid (no admissible radius below the truncation)")]
    EmptyRadiusGrid,

    #[error("invalid radius grid: {0}")]
    InvalidRadiusGrid(String),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid weight parameter: {0}")]
    InvalidWeight(String),

    #[error("cube family has no fully interior cube on this domain")]
    NoInteriorCube,

    #[error("point {0:?} lies outside the domain")]
    PointOutsideDomain(Vec<f64>),

    #[error("dimension {got} unsupported for {op} (supported: {supported})")]
    UnsupportedDimension {
        op: &'static str,
        got: usize,
        supported: &'static str,
    },

    #[error("Lipschitz bound violated by input data: |v[{i}] - v[{j}]| = {diff} > L * {dist}")]
    LipschitzViolation { i: usize, j: usize, diff: f64, dist: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("divergent estimate: {0}")]
    DivergentEstimate(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("malformed field file: {0}")]
    MalformedFieldFile(String),
}
