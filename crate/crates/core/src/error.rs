use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model size {size} is not below the sample size {n}")]
    SizeTooLarge { size: usize, n: usize },

    #[error("design submatrix has rank {rank} < model size {size}")]
    RankDeficient { rank: usize, size: usize },

    #[error("infeasible model scored before any feasible model was seen")]
    NoFeasibleHistory,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("HOLP requires d >= n (got n = {n}, d = {d})")]
    HolpRequiresWide { n: usize, d: usize },

    #[error("all association measures are zero")]
    AllGammaZero,

    #[error("initial population contract violated: {0}")]
    ContractViolation(String),

    #[error("both samples have zero variance")]
    DegenerateVariance,

    #[error("mutation rate {0} exceeds 0.5")]
    PiTooLarge(f64),

    #[error("state space too large: {0} states")]
    TooLarge(u128),

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("minimum one-step entry probability into M_max is zero")]
    XiZero,

    #[error("every candidate has a leverage value of one")]
    LeverageOne,

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that stem from bad user input or configuration rather than
    /// from a numerical breakdown.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidDataset(_)
                | Error::Parse(_)
                | Error::LengthMismatch { .. }
                | Error::HolpRequiresWide { .. }
                | Error::PiTooLarge(_)
                | Error::TooLarge(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
