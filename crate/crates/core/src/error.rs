use thiserror::Error;

/// Errors raised by the library. Every variant carries enough context to be
/// reported verbatim by the CLI.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error in {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid curve: {0}")]
    CurveSpec(String),

    #[error("enumeration budget exceeded in {context}: needs {needed}, budget {budget}")]
    BudgetExceeded {
        context: String,
        needed: u128,
        budget: u128,
    },

    #[error("dangerous interval too long at stage {stage}: length {length} >= |B_s| / 2 = {half_ball}")]
    Fact1Violation {
        stage: usize,
        length: String,
        half_ball: String,
    },

    #[error("{} distinct dangerous pairs meet B_s at stage {stage}: {hits:?}", hits.len())]
    Fact2Violation {
        stage: usize,
        hits: Vec<(Vec<i64>, Vec<i64>)>,
    },

    #[error("gamma too large: small parallelepiped contains nonzero point u={u:?} v={v:?} at T={scale}")]
    GammaTooLarge {
        u: Vec<i64>,
        v: Vec<i64>,
        scale: String,
    },

    #[error("invariant ({tag}) violated: {detail}")]
    Invariant { tag: String, detail: String },

    #[error("range exhausted: threshold below the last psi; largest admissible |q| is {max_admissible_q}")]
    RangeExhausted { max_admissible_q: u64 },
}

impl Error {
    pub fn invariant(tag: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invariant {
            tag: tag.into(),
            detail: detail.into(),
        }
    }

    pub fn parse(input: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
