//! Error type shared by all modules. Diagnostic payloads are carried as
//! `f64` regardless of the working scalar type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} outside window [-{window}, {window}]")]
    OutOfWindow { index: i64, window: i64 },

    #[error("window {have} too small: need at least {need}")]
    WindowTooSmall { have: i64, need: i64 },

    #[error("window too small for requested tolerance: need {need} trusted slices, have {have}")]
    WindowTooSmallForTol { need: i64, have: i64 },

    #[error("matrix at index {index} is numerically singular (defect {defect:.3e})")]
    SingularMatrix { index: i64, defect: f64 },

    #[error("condition number {cond:.3e} exceeds guard {guard:.3e} at index {index}")]
    IllConditioned { index: i64, cond: f64, guard: f64 },

    #[error("unknown cocycle family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("projection ranks inconsistent across the window: {0}")]
    RankInconsistent(String),

    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("every sampled gamma is resonant; declared bounds are violated")]
    AllResonant,

    #[error("{found} spectral intervals detected but dimension is {dim}; threshold misconfiguration")]
    TooManyIntervals { found: usize, dim: usize },

    #[error("spectral gap too narrow for a reliable splitting (margin {margin:.3e} below {threshold:.3e})")]
    GapTooNarrow { margin: f64, threshold: f64 },

    #[error("inflating by {varsigma:.3e} merges intervals {first} and {second}")]
    InflationOverlap { varsigma: f64, first: usize, second: usize },

    #[error("non-resonance violated at multi-index {witness:?} (product [{lo:.6e}, {hi:.6e}])")]
    NonResonanceViolation { witness: Vec<u32>, lo: f64, hi: f64 },

    #[error("enumeration budget exceeded: {count} multi-indices > {budget}")]
    EnumerationBudget { count: u128, budget: u128 },

    #[error("series terms stopped decreasing after {terms} terms; divergence")]
    SeriesDiverged { terms: usize },

    #[error("near-resonant rate {rate:.6} exceeds guard 0.999; refusing to emit huge coefficients")]
    NearResonance { rate: f64 },

    #[error("system jets truncated at order {have}, need order {need}")]
    MissingJetOrders { have: u32, need: u32 },

    #[error("composition arity mismatch: outer has {expected} variables, {got} inner jets given")]
    ArityMismatch { expected: usize, got: usize },

    #[error("unknown axis group `{0}`")]
    UnknownGroup(String),

    #[error("jet shapes incompatible: {0}")]
    ShapeMismatch(String),

    #[error("order bookkeeping violated at stage {stage}: {detail}")]
    OrderBookkeeping { stage: String, detail: String },

    #[error("stage `{stage}` failed: {source}")]
    StageFailed {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &str) -> Error {
        Error::StageFailed {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
