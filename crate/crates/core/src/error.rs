use thiserror::Error;

/// Failures raised by the lattice engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// No site was occupied at time zero.
    #[error("no occupied site in the initial configuration")]
    EmptyWorld,
    /// Every pending clock has been consumed.
    #[error("event queue is empty")]
    QueueEmpty,
    #[error("clusters {0} and {1} are not adjacent")]
    NotAdjacent(u32, u32),
    #[error("move of cluster {0} is not blocked")]
    NotBlocked(u32),
    #[error("unknown or dead cluster {0}")]
    UnknownCluster(u32),
    #[error("lattice of {sites} sites exceeds the budget of {budget}")]
    TooLarge { sites: usize, budget: usize },
}

pub type EngineResult<T> = Result<T, EngineError>;
