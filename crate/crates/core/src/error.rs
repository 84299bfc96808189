use std::path::{Path, PathBuf};

use crate::project::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("infeasible fault request: {0}")]
    Infeasible(String),

    #[error("training data has a single class ({label}); both labels are required")]
    SingleClass { label: bool },

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("non-finite feature value at column {column}")]
    NonFiniteFeature { column: usize },

    #[error("feature importance for {feature}: {source}")]
    Importance {
        feature: String,
        #[source]
        source: Box<Error>,
    },

    #[error("input lengths differ ({scores} scores, {labels} labels)")]
    LengthMismatch { scores: usize, labels: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("failed trace #{index} is empty and cannot be hit by any diagnosis")]
    UnhittableTrace { index: usize },

    #[error("no candidate diagnoses")]
    NoCandidates,

    #[error("no consistent diagnosis: every candidate has zero likelihood")]
    NoConsistentDiagnosis,

    #[error("no tests left to plan")]
    NoTestsLeft,

    #[error("episode for fault {fault:?} with {planner} planner: {source}")]
    Episode {
        fault: Vec<NodeId>,
        planner: String,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
