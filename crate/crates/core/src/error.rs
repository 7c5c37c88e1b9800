use std::path::PathBuf;

use basis_lp::{LpError, SolveStatus};
use thiserror::Error;

use crate::system::Violation;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid case ({} violation(s)): {}", .0.len(), first_violation(.0))]
    Validation(Vec<Violation>),
    #[error("variant {variant} cannot be built: {reason}")]
    VariantRequirement { variant: String, reason: String },
    #[error("representative periods cover {got} hours, horizon is {expected}")]
    Coverage { expected: usize, got: usize },
    #[error("hour {hour} is out of range for a horizon of {horizon}")]
    HourOutOfRange { hour: usize, horizon: usize },
    #[error("no integer decomposition of marginal cost {mc} within tolerance")]
    NoDecomposition { mc: f64 },
    #[error("{stage}: solver returned {status:?}")]
    Solver { stage: String, status: SolveStatus },
    #[error("{stage}: {source}")]
    Lp { stage: String, source: LpError },
    #[error("unknown synthetic profile `{0}`")]
    UnknownProfile(String),
    #[error("refusing to enumerate partitions of {n} items ({count} partitions); the limit is n <= {limit}")]
    EnumerationGuard { n: usize, count: u128, limit: usize },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", .path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", .path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

fn first_violation(v: &[Violation]) -> String {
    v.first().map(|x| x.to_string()).unwrap_or_default()
}

impl CoreError {
    pub(crate) fn lp(stage: impl Into<String>) -> impl FnOnce(LpError) -> CoreError {
        let stage = stage.into();
        move |source| CoreError::Lp { stage, source }
    }
}
