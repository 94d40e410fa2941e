use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid problem data: {0}")]
    InvalidInstance(String),
    #[error("|(Ax)_{index}| = {value} exceeds the overflow guard {guard}")]
    OverflowGuard { index: usize, value: f64, guard: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("A has zero smallest singular value")]
    SingularA,
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("B + W^2 is not positive definite")]
    IndefinitePencil,
    #[error("A^T D A is not positive definite")]
    IndefiniteBase,
    #[error("weighted matrix is rank deficient (numerical rank {rank} < {d})")]
    RankDeficient { rank: usize, d: usize },
    #[error("eps = {0} outside (0, 0.1]")]
    InvalidEps(f64),
    #[error("delta = {0} outside (0, 0.1)")]
    InvalidDelta(f64),
    #[error("diagonal entry {index} = {value} is not strictly positive")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("diagonal Hessian surrogate entry {index} = {value} is not strictly positive")]
    NonPositiveSurrogate { index: usize, value: f64 },
    #[error("matrix is not positive definite (Cholesky failed)")]
    NotPositiveDefinite,
    #[error("alpha(x) = {0:e} is numerically zero")]
    AlphaZero(f64),
    #[error("dense n x n blocks limited to n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
