use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    InvalidMatrix,

    #[error("invalid topology: {}", .0.join("; "))]
    InvalidTopology(Vec<String>),

    #[error("invalid association: {0}")]
    InvalidAssociation(String),

    #[error("stream {stream} has an empty zero-forcing null space")]
    InfeasibleAssociation { stream: usize },

    #[error("all beamformers are zero")]
    ZeroSolution,

    #[error("no positive scaling satisfies the interference constraints")]
    NoFeasibleScaling,

    #[error("surrogate anchor c must be positive, got {0}")]
    NonPositiveAnchor(f64),

    #[error("no data stream is feasible (maximum DoF is zero)")]
    NoFeasibleStream,

    #[error("start point is not strictly feasible (constraint {index} = {value:e})")]
    InfeasibleStart { index: usize, value: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
