use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bit string: {0}")]
    Parse(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("period {period} out of range for a string of length {len}")]
    PeriodOutOfRange { period: usize, len: usize },

    #[error("expected an odd-length prefix, got length {0}")]
    EvenLength(usize),

    #[error("pattern of length {pattern} is longer than the string ({text})")]
    PatternTooLong { pattern: usize, text: usize },

    #[error("edit radius {k} exceeds string length {len}")]
    RadiusTooLarge { k: usize, len: usize },

    #[error("deletion probability must lie in [0, 1), got {0}")]
    InvalidChannel(String),

    #[error("exhaustive enumeration limited to length {max}, got {len}")]
    EnumerationGuard { len: usize, max: usize },

    #[error("invalid statistic: {0}")]
    InvalidSpec(String),

    #[error("trace list is empty")]
    EmptyTraces,

    #[error("exact rational arithmetic requested but q is not a fraction")]
    NotRational,

    #[error("the zero polynomial has no finite divisibility order")]
    ZeroPolynomial,

    #[error("(z - 1)^{order} does not divide the polynomial")]
    NotDivisible { order: usize },

    #[error("no separating power: {0}")]
    NoSeparatingPower(String),

    #[error("{bits} bits of precision cannot separate the value from the bound")]
    PrecisionInsufficient { bits: u32 },

    #[error("degenerate pair: x and y are identical")]
    DegeneratePair,

    #[error("x is not within {k} deletions and {k} insertions of y ({deletions} del / {insertions} ins)")]
    NotInEditBall {
        k: usize,
        deletions: usize,
        insertions: usize,
    },

    #[error("no statistic in the family separates the two hypotheses")]
    NoSeparatingStatistic,

    #[error("statistic family too large: {0}")]
    FamilyTooLarge(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
