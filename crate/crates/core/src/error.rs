use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum HedgeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid claim: {0}")]
    InvalidClaim(String),

    #[error("non-finite result evaluating {0}")]
    NonFiniteResult(String),

    #[error("argument outside the moment domain: {0}")]
    DomainViolation(String),

    #[error("branch of complex logarithm could not be resolved: {0}")]
    BranchAmbiguity(String),

    #[error("transform pole at u = {0}")]
    PoleError(f64),

    #[error("no admissible integration strip: {0}")]
    NoValidStrip(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("imaginary residue too large: {0}")]
    ImaginaryResidue(String),

    #[error("active-set iteration limit reached after {0} iterations")]
    MaxIterations(usize),

    #[error("asset is redundant given the conditioning set (Schur complement {0:e})")]
    RedundantAsset(f64),

    #[error("subset budget exceeded: {needed} subsets > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HedgeError {
    fn from(e: std::io::Error) -> Self {
        HedgeError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HedgeError {
    fn from(e: serde_json::Error) -> Self {
        HedgeError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HedgeError>;
