use thiserror::Error;

/// Errors raised by the POSI toolkit.
#[derive(Debug, Error)]
pub enum PosiError {
    #[error("matrix is not positive semidefinite: {0}")]
    NonPsd(String),
    #[error("level alpha must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("argument outside the function domain: {0}")]
    DomainError(String),
    #[error("column index {index} out of range for {p} columns")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("design submatrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("no residual degrees of freedom: n = {n}, model size = {m}")]
    DegenerateDof { n: usize, m: usize },
    #[error("selected model {0} is not in the candidate set")]
    ModelNotInCandidateSet(String),
    #[error("candidate model {0} does not contain the forced coefficient")]
    MissingForcedIndex(String),
    #[error("response must be binary (0/1), found {0}")]
    NonBinaryResponse(f64),
    #[error("success probability {value} violates the variance floor tau = {tau}")]
    ProbOutOfRange { value: f64, tau: f64 },
    #[error("Hessian is singular")]
    SingularHessian,
    #[error("maximum likelihood estimate does not exist for model {0}")]
    MleNonexistent(String),
    #[error("requested {k} steps but only {p} columns")]
    KTooLarge { k: usize, p: usize },
    #[error("selection failed: {0}")]
    SelectionFailed(String),
    #[error("no candidate model could be fitted")]
    AllModelsFailed,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PosiError>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(PosiError::BadLevel(alpha))
    }
}
