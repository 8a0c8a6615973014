use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("parse error in {path}: {location}: {message}")]
    Parse {
        path: PathBuf,
        location: ParseLocation,
        message: String,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("face {face} deviates {deviation:.4} m from its best-fit plane")]
    NonPlanarFace { face: usize, deviation: f64 },

    #[error("model has {0} logical faces, at least 4 are required")]
    TooFewFaces(usize),

    #[error("no cluster matched any candidate model")]
    NoMatchFound,

    #[error("every face of the model was matched; nothing is left to anchor the refinement")]
    AllFacesRemoved,

    #[error("selection problem has no candidate faces")]
    EmptyProblem,

    #[error("selection problem is infeasible")]
    Infeasible,

    #[error("optimal selection is empty; lower tau_cov to admit weakly supported faces")]
    EmptyModel,

    #[error("solver hit the {limit_s:.1} s time limit")]
    Timeout { limit_s: f64 },

    #[error("extracted mesh is not watertight: {0}")]
    TopologyViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseLocation {
    Line(usize),
    Byte(usize),
}

impl std::fmt::Display for ParseLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseLocation::Line(l) => write!(f, "line {l}"),
            ParseLocation::Byte(b) => write!(f, "byte {b}"),
        }
    }
}

/// Machine-readable failure class, surfaced by the CLI as exit code and tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCategory {
    NoMatch,
    Infeasible,
    EmptyModel,
    Timeout,
    Io,
    Parse,
    Internal,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::NoMatch => 2,
            ErrorCategory::Infeasible | ErrorCategory::EmptyModel => 3,
            ErrorCategory::Timeout => 4,
            ErrorCategory::Io | ErrorCategory::Parse => 5,
            ErrorCategory::Internal => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::NoMatch => "NO_MATCH",
            ErrorCategory::Infeasible => "INFEASIBLE",
            ErrorCategory::EmptyModel => "EMPTY_MODEL",
            ErrorCategory::Timeout => "TIMEOUT",
            ErrorCategory::Io => "IO",
            ErrorCategory::Parse => "PARSE",
            ErrorCategory::Internal => "INTERNAL",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::NoMatchFound | Error::AllFacesRemoved => ErrorCategory::NoMatch,
            Error::Infeasible => ErrorCategory::Infeasible,
            Error::EmptyModel | Error::EmptyProblem => ErrorCategory::EmptyModel,
            Error::Timeout { .. } => ErrorCategory::Timeout,
            Error::Io { .. } => ErrorCategory::Io,
            Error::Parse { .. }
            | Error::EmptyCloud
            | Error::NonPlanarFace { .. }
            | Error::TooFewFaces(_)
            | Error::Config(_) => ErrorCategory::Parse,
            Error::DegenerateInput(_) | Error::EmptyMesh | Error::TopologyViolation(_) => {
                ErrorCategory::Internal
            }
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, location: ParseLocation, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            location,
            message: message.into(),
        }
    }
}
