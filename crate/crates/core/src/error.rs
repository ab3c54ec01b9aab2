use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("situation is invalid ({} violation(s)): {}", .0.len(), render(.0))]
    Invalid(Vec<Violation>),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("{0} is defined for unbounded production only")]
    RequiresUnbounded(&'static str),

    #[error("internal error: {0}")]
    Internal(String),
}

fn render(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
