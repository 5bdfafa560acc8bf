use thiserror::Error;

/// Failure modes of the market math and the protocol state machines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("price component {index} = {value:e} lies outside the interior clamp")]
    BoundaryPrice { index: usize, value: f64 },

    #[error("no gradient available: {0}")]
    NoGradient(String),

    #[error(
        "simplex solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("generator is unbounded at vertex {0}")]
    VertexUnbounded(usize),

    #[error("quadrature failed to converge on [{lo}, {hi}]")]
    DivergentIntegral { lo: f64, hi: f64 },

    #[error("unsupported family for this operation: {0}")]
    UnsupportedFamily(String),

    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),

    #[error("invalid price: {0}")]
    InvalidPrice(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("initial generator is not a pseudobarrier (strict mode)")]
    NotPseudobarrier,

    #[error("liability does not match the generator's zero level set (deviation {deviation:e})")]
    LiabilityMismatch { deviation: f64 },

    #[error("trade leaves the aggregate level set (cost change {deviation:e})")]
    NotLevelSet { deviation: f64 },

    #[error("trade split does not sum to the net trade (deviation {deviation:e})")]
    SplitMismatch { deviation: f64 },

    #[error("unknown liquidity provider {0}")]
    UnknownLp(usize),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invariant violated (deviation {deviation:e})")]
    InvariantViolated { deviation: f64 },

    #[error("insufficient reserves")]
    InsufficientReserves,

    #[error("trade traverses bucket {0}, which holds no liquidity")]
    EmptyBucket(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
