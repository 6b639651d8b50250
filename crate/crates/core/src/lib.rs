//! Multi-robot motion planning by sequential penalized relaxation.

pub mod bench;
pub mod io;
pub mod model;
pub mod plot;
pub mod relax;
pub mod scp;
pub mod sequential;
pub mod trajectory;

use mrmp_conic::ConicError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("missing data: {0}")]
    Missing(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("subproblem: {0}")]
    Subproblem(String),
    #[error("instance generation failed: {0}")]
    Generation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
