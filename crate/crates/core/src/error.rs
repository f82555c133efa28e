use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: {message}")]
    Semantic {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid graph: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),
    #[error("unknown vertex '{0}'")]
    UnknownVertex(String),
    #[error("vertex '{0}' is not a boundary vertex")]
    NotBoundary(String),
    #[error("invalid position: {0}")]
    InvalidPosition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("event cap of {0} exceeded")]
    EventCap(usize),
    #[error("lattice closure cap of {0} exceeded")]
    ClosureCap(usize),
    #[error("partition does not cover the reached set: {0}")]
    NonCovering(String),
    #[error("inconsistent family: {0}")]
    InconsistentFamily(String),
    #[error("structural fault: {0}")]
    Structural(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable identifier for scripts.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroDenominator => "zero_denominator",
            Error::Parse(_) => "parse",
            Error::Syntax { .. } => "syntax",
            Error::Semantic { .. } => "semantic",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::UnknownVertex(_) => "unknown_vertex",
            Error::NotBoundary(_) => "not_boundary",
            Error::InvalidPosition(_) => "invalid_position",
            Error::InvalidInput(_) => "invalid_input",
            Error::EventCap(_) => "event_cap",
            Error::ClosureCap(_) => "closure_cap",
            Error::NonCovering(_) => "non_covering",
            Error::InconsistentFamily(_) => "inconsistent_family",
            Error::Structural(_) => "structural",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
