use thiserror::Error;

use crate::data::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("panel failed validation: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular")]
    Singular,

    #[error("attribute matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("sampler failed at iteration {iteration} in {conditional}: {source}")]
    Sampler {
        iteration: usize,
        conditional: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("chain contains no draws")]
    EmptyChain,

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
