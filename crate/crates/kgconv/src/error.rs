//! Crate-wide error type.

use thiserror::Error;

use crate::kg::{EntityId, PropertyId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dangling references: {}", ids.join(", "))]
    DanglingReferences { ids: Vec<String> },

    #[error("unknown root entity {0}")]
    UnknownRoot(EntityId),

    #[error("could not sample a sequence from root {root} after {attempts} attempts")]
    WalkExhausted { root: EntityId, attempts: usize },

    #[error("cannot merge conditions over different properties: {0} vs {1}")]
    PropertyMismatch(PropertyId, PropertyId),

    #[error("template {id} has no subject slot")]
    MissingSlot { id: u64 },

    #[error("subject label {label:?} does not occur in question {question:?}")]
    LabelNotFound { label: String, question: String },

    #[error("subject label {label:?} occurs more than once in question {question:?}")]
    AmbiguousLabel { label: String, question: String },

    #[error("no template covers property {0}")]
    NoTemplate(PropertyId),

    #[error("unknown turn id {0}")]
    UnknownTurnId(String),

    #[error("service unreachable at {url}: {message}")]
    ServiceUnreachable { url: String, message: String },

    #[error("malformed service response from {url}: {message}")]
    MalformedResponse { url: String, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
