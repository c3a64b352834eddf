use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("output vector sums to zero and cannot be normalized")]
    AllZeroOutput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid raw output: {0}")]
    InvalidOutput(String),
    #[error("budget {budget} exceeds available pool of {available}")]
    BudgetExceedsPool { budget: usize, available: usize },
    #[error("NaN score for sample {0}")]
    NanScore(u64),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("labeled set is empty")]
    EmptyLabeledSet,
    #[error("split is empty")]
    EmptySplit,
    #[error("index {index} out of range for {len} classes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown sample id {0}")]
    UnknownId(u64),
    #[error("sample {0} is already labeled")]
    AlreadyLabeled(u64),
    #[error("unknown strategy `{0}` (expected one of: random, entropy, margin, least_confident, smem, smem_jsd, smem_full, kld, ad_kld, mi)")]
    UnknownStrategy(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
