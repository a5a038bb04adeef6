use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("transition matrix row {row} sums to {sum} (expected 1)")]
    RowSum { row: usize, sum: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate initialization: total posterior mass is numerically zero")]
    DegenerateInit,

    #[error("filter collapse at step {step}: all weights are zero")]
    FilterCollapse { step: usize },

    #[error("incompatible filter representations: {0}")]
    Representation(String),

    #[error("insufficient data: {usable} usable points, need at least 3")]
    InsufficientData { usable: usize },

    #[error("preimage distance unavailable: {0}")]
    DUnavailable(String),

    #[error("envelope order violated: eps_minus {minus} > eps_plus {plus}")]
    EnvelopeOrder { minus: f64, plus: f64 },

    #[error("(H2) failure: {0}")]
    H2Failure(String),

    #[error("infeasible activation constraint: need {needed} of {available}")]
    InfeasibleConstraint { needed: usize, available: usize },

    #[error("oracle scale exceeded: {paths} paths (limit {limit})")]
    OracleScale { paths: f64, limit: f64 },

    #[error("local Doeblin construction failed: {0}")]
    LdConstruction(String),

    #[error("seed list contains duplicates: {0}")]
    DuplicateSeed(u64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::RowSum { .. }
                | Error::Validation(_)
                | Error::DuplicateSeed(_)
                | Error::Json(_)
                | Error::InfeasibleConstraint { .. }
                | Error::OracleScale { .. }
                | Error::LdConstruction(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
