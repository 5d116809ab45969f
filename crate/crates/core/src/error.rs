use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vectors do not span a subspace of the requested dimension (singular value ratio {ratio:.3e})")]
    DegenerateSpan { ratio: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tangent frame is rank deficient at {at}")]
    RankDeficient { at: String },

    #[error("transversality violated: {0}")]
    TransversalityViolation(String),

    #[error("root finding failed: {0}")]
    RootFindFailure(String),

    #[error("normal wedge degenerates (min {min:.3e})")]
    NormalWedgeDegenerate { min: f64 },

    #[error("too many maps for basis enumeration: {m} > {cap}")]
    TooManyMaps { m: usize, cap: usize },

    #[error("wrong scenario: {0}")]
    WrongScenario(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
