use thiserror::Error;

/// Errors produced by the rotation-averaging pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("duplicate edge between vertices {0} and {1}")]
    DuplicateEdge(usize, usize),

    /// The graph splits into more than one connected component. Each entry
    /// lists the vertices of one component, sorted ascending.
    #[error("graph is not connected ({} components)", .components.len())]
    NotConnected { components: Vec<Vec<usize>> },

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
